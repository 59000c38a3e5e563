// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/splatter.hpp"

#include "artikin/parallel.hpp"
#include "artikin/simd/kernels.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace artikin {

Vec3 to_camera(const CameraModel& cam, const Vec3& world) { return cam.world_to_camera.apply(world); }

Vec2 project_point(const CameraModel& cam, const Vec3& c)
{
    return {cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy};
}

std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& p, const CameraModel& cam,
                                                  const RasterConfig& cfg, std::size_t source_index)
{
    const Vec3 c = to_camera(cam, p.center);
    if (!(c.z() > cfg.z_near)) {
        return std::nullopt;
    }
    const double z = c.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx / z, 0.0, -cam.fx * c.x() / (z * z), 0.0, cam.fy / z, -cam.fy * c.y() / (z * z);
    const Eigen::Matrix<double, 2, 3> jw = jac * cam.world_to_camera.rotation;
    Mat2 cov = jw * covariance_of(p) * jw.transpose();
    cov(1, 0) = cov(0, 1);
    cov(0, 0) += cfg.low_pass;
    cov(1, 1) += cfg.low_pass;

    ProjectedGaussian pg;
    pg.mean2d = project_point(cam, c);
    pg.cov2d = cov;
    pg.depth = z;
    pg.source_index = source_index;

    const double rx = cfg.cutoff_sigma * std::sqrt(cov(0, 0));
    const double ry = cfg.cutoff_sigma * std::sqrt(cov(1, 1));
    if (pg.mean2d.x() + rx < 0.0 || pg.mean2d.x() - rx > cam.width || pg.mean2d.y() + ry < 0.0 ||
        pg.mean2d.y() - ry > cam.height) {
        return std::nullopt;
    }
    return pg;
}

double pixel_density(const ProjectedGaussian& pg, double opacity, const Vec2& x, const RasterConfig& cfg)
{
    const Vec2 d = x - pg.mean2d;
    const double q = d.dot(pg.cov2d.inverse() * d);
    if (!(q <= cfg.cutoff_sigma * cfg.cutoff_sigma)) {
        return 0.0;
    }
    return std::min(opacity * std::exp(-0.5 * q), cfg.max_density);
}

CompositeResult composite_pixel(std::span<const CompositeSample> samples)
{
    CompositeResult out;
    out.weights.reserve(samples.size());
    double t = 1.0;
    for (const auto& s : samples) {
        const double w = s.density * t;
        out.weights.push_back(w);
        out.color += w * s.color;
        auto it = std::lower_bound(out.part_weights.begin(), out.part_weights.end(), s.part,
                                   [](const auto& pw, int label) { return pw.first < label; });
        if (it == out.part_weights.end() || it->first != s.part) {
            it = out.part_weights.insert(it, {s.part, 0.0});
        }
        it->second += w;
        t *= 1.0 - s.density;
    }
    out.transmittance = t;
    return out;
}

const std::vector<double>* RenderOutput::weight_map(int label) const
{
    const auto it = std::lower_bound(part_labels.begin(), part_labels.end(), label);
    if (it == part_labels.end() || *it != label) {
        return nullptr;
    }
    return &weight_maps[static_cast<std::size_t>(it - part_labels.begin())];
}

namespace {

struct Splat {
    simd::SplatParams params;
    std::size_t part_slot = 0;
    int x0 = 0;
    int x1 = 0; // exclusive
    int y0 = 0;
    int y1 = 0; // exclusive
};

} // namespace

RenderOutput render_view(const StateSnapshot& field, const CameraModel& cam, const RenderOptions& opts)
{
    const RasterConfig& cfg = opts.raster;
    RenderOutput out;
    out.width = cam.width;
    out.height = cam.height;
    const std::size_t npix = out.pixel_count();

    for (const auto& p : field.primitives) {
        if (!opts.only_label || p.label == *opts.only_label) {
            out.part_labels.push_back(p.label);
        }
    }
    std::sort(out.part_labels.begin(), out.part_labels.end());
    out.part_labels.erase(std::unique(out.part_labels.begin(), out.part_labels.end()), out.part_labels.end());
    out.weight_maps.assign(out.part_labels.size(), std::vector<double>(npix, 0.0));

    std::vector<ProjectedGaussian> projected;
    projected.reserve(field.primitives.size());
    for (std::size_t i = 0; i < field.primitives.size(); ++i) {
        const auto& p = field.primitives[i];
        if (opts.only_label && p.label != *opts.only_label) {
            continue;
        }
        if (auto pg = project_gaussian(p, cam, cfg, i)) {
            projected.push_back(*pg);
        }
    }
    std::sort(projected.begin(), projected.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.source_index < b.source_index);
    });

    std::vector<Splat> splats;
    splats.reserve(projected.size());
    for (const auto& pg : projected) {
        const auto& p = field.primitives[pg.source_index];
        Splat s;
        const Mat2 conic = pg.cov2d.inverse();
        s.params.conic_xx = conic(0, 0);
        s.params.conic_xy = 0.5 * (conic(0, 1) + conic(1, 0));
        s.params.conic_yy = conic(1, 1);
        s.params.mean_x = pg.mean2d.x();
        s.params.mean_y = pg.mean2d.y();
        s.params.opacity = p.opacity;
        s.params.max_density = cfg.max_density;
        s.params.cutoff_sq = cfg.cutoff_sigma * cfg.cutoff_sigma;
        s.params.red = p.color.x();
        s.params.green = p.color.y();
        s.params.blue = p.color.z();
        s.params.depth = pg.depth;
        const double rx = cfg.cutoff_sigma * std::sqrt(pg.cov2d(0, 0));
        const double ry = cfg.cutoff_sigma * std::sqrt(pg.cov2d(1, 1));
        s.x0 = std::max(0, static_cast<int>(std::ceil(pg.mean2d.x() - rx - 0.5)));
        s.x1 = std::min(cam.width, static_cast<int>(std::floor(pg.mean2d.x() + rx - 0.5)) + 1);
        s.y0 = std::max(0, static_cast<int>(std::ceil(pg.mean2d.y() - ry - 0.5)));
        s.y1 = std::min(cam.height, static_cast<int>(std::floor(pg.mean2d.y() + ry - 0.5)) + 1);
        if (s.x0 >= s.x1 || s.y0 >= s.y1) {
            continue;
        }
        s.part_slot = static_cast<std::size_t>(
            std::lower_bound(out.part_labels.begin(), out.part_labels.end(), p.label) - out.part_labels.begin());
        splats.push_back(s);
    }

    std::vector<double> red(npix, 0.0), green(npix, 0.0), blue(npix, 0.0);
    std::vector<double> depth_sum(npix, 0.0), weight_sum(npix, 0.0);
    out.transmittance.assign(npix, 1.0);

    const auto& k = simd::kernels();
    const unsigned bands = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(cam.height)));
    parallel_for(bands, bands, [&](std::size_t band) {
        const int row_begin = static_cast<int>(band * cam.height / bands);
        const int row_end = static_cast<int>((band + 1) * cam.height / bands);
        for (const auto& s : splats) {
            const int ya = std::max(s.y0, row_begin);
            const int yb = std::min(s.y1, row_end);
            for (int y = ya; y < yb; ++y) {
                const std::size_t base = out.index(s.x0, y);
                simd::RowAccumulators acc;
                acc.transmittance = out.transmittance.data() + base;
                acc.red = red.data() + base;
                acc.green = green.data() + base;
                acc.blue = blue.data() + base;
                acc.depth_sum = depth_sum.data() + base;
                acc.weight_sum = weight_sum.data() + base;
                acc.part_weight = out.weight_maps[s.part_slot].data() + base;
                k.splat_row(s.params, static_cast<double>(y) + 0.5, s.x0, s.x1 - s.x0, acc);
            }
        }
    });

    // Accumulated weights can overshoot 1 by an ulp once transmittance
    // saturates; part weights are bounded by 1 by definition.
    for (auto& map : out.weight_maps) {
        for (double& w : map) {
            w = std::min(w, 1.0);
        }
    }

    out.color.resize(3 * npix);
    out.depth.assign(npix, 0.0);
    for (std::size_t i = 0; i < npix; ++i) {
        out.color[3 * i] = red[i];
        out.color[3 * i + 1] = green[i];
        out.color[3 * i + 2] = blue[i];
        if (weight_sum[i] >= cfg.depth_weight_floor) {
            out.depth[i] = depth_sum[i] / weight_sum[i];
        }
    }
    return out;
}

std::vector<RenderOutput> render_views(const StateSnapshot& field, std::span<const CameraModel> cams,
                                       const RenderOptions& opts)
{
    std::vector<RenderOutput> out(cams.size());
    RenderOptions inner = opts;
    inner.threads = 1;
    parallel_for(cams.size(), opts.threads, [&](std::size_t v) { out[v] = render_view(field, cams[v], inner); });
    return out;
}

} // namespace artikin

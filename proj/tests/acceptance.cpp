// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. One line per criterion: "[PASS] n: ..." or "[FAIL] n: ...".
// Exits nonzero when any criterion fails.

#include "artikin/boundary_refiner.hpp"
#include "artikin/cli.hpp"
#include "artikin/deform_field.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/metrics.hpp"
#include "artikin/scene_io.hpp"
#include "artikin/splatter.hpp"
#include "artikin/synth_oracle.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace artikin;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// ---------------------------------------------------------------- helpers

Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

Quat random_quat(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 v;
    do {
        v = Vec4(n(rng), n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return Quat::from_vector(v.normalized());
}

Mat3 rodrigues(const Vec3& axis, double angle)
{
    Mat3 k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

GaussianPrimitive random_primitive(std::mt19937_64& rng, double spread)
{
    std::uniform_real_distribution<double> u(-spread, spread);
    std::uniform_real_distribution<double> s(0.01, 0.2);
    std::uniform_real_distribution<double> c(0.0, 1.0);
    GaussianPrimitive p;
    p.center = Vec3(u(rng), u(rng), u(rng));
    p.orientation = random_quat(rng);
    p.scale = Vec3(s(rng), s(rng), s(rng));
    p.color = Vec3(c(rng), c(rng), c(rng));
    p.opacity = c(rng);
    return p;
}

/// Angle between two directions, accurate near zero.
double direction_angle(const Vec3& a, const Vec3& b)
{
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

double line_distance(const Vec3& point, const Vec3& line_point, const Vec3& dir)
{
    const Vec3 d = point - line_point;
    return (d - d.dot(dir) * dir).norm();
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr)
{
    std::vector<const char*> argv{"artikin"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text) {
        *err_text = err.str();
    }
    return code;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------- 1, 2

Outcome end_to_end(const fs::path& work, const std::string& preset)
{
    const fs::path scene = work / (preset + "_scene");
    const fs::path out = work / (preset + "_run");
    fs::remove_all(out);
    std::string err;
    if (cli({"synth", "--preset", preset, "--seed", "0", "--out", scene.string()}, &err) != 0) {
        return {false, "synth failed: " + err};
    }
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli({"--threads", "1", "pipeline", "--scene", scene.string(), "--out", out.string()}, &err);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (code != 0) {
        return {false, "pipeline exited with " + std::to_string(code) + ": " + err};
    }
    const auto report = read_json_file(out / "report.json");
    bool kinds = true;
    double ang = 0.0, pos = 0.0, motion_deg = 0.0, motion_units = 0.0;
    for (const auto& p : report["parts"]) {
        kinds = kinds && p["kind_correct"].get<bool>();
        if (!p["kind_correct"].get<bool>()) {
            continue;
        }
        ang = std::max(ang, p["axis_ang_deg"].get<double>());
        if (!p["axis_pos"].is_null()) {
            pos = std::max(pos, p["axis_pos"].get<double>());
        }
        if (p["part_motion_unit"] == "deg") {
            motion_deg = std::max(motion_deg, p["part_motion"].get<double>());
        } else {
            motion_units = std::max(motion_units, p["part_motion"].get<double>());
        }
    }
    const double acc = report["label_accuracy"].get<double>();
    const std::size_t parts = report["parts"].size();
    const bool pass = kinds && parts > 0 && ang < 0.5 && pos < 0.01 && motion_deg < 0.5 && motion_units < 0.01 &&
                      acc >= 0.99 && seconds < 120.0;
    return {pass, fmt("parts=%zu kinds=%s axis_ang=%.3g deg axis_pos=%.3g motion=%.3g deg/%.3g units "
                      "label_acc=%.4f runtime=%.2f s",
                      parts, kinds ? "all correct" : "WRONG", ang, pos, motion_deg, motion_units, acc, seconds)};
}

// ---------------------------------------------------------------- 3

Outcome compositing_identity(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> len(0, 24);
    std::uniform_int_distribution<int> part(0, 3);
    double worst = 0.0;
    double worst_color = 0.0;
    bool bounded = true;
    std::vector<CompositeSample> stack;
    for (int trial = 0; trial < 1000000; ++trial) {
        stack.resize(static_cast<std::size_t>(len(rng)));
        for (auto& s : stack) {
            // Mix of tiny, moderate and saturated densities.
            const double r = u(rng);
            s.density = r < 0.1 ? 0.99 : (r < 0.2 ? 1e-6 * u(rng) : u(rng));
            s.color = Vec3(u(rng), u(rng), u(rng));
            s.part = part(rng);
        }
        const CompositeResult c = composite_pixel(stack);
        double sum = 0.0, part_sum = 0.0;
        Vec3 color = Vec3::Zero();
        for (std::size_t i = 0; i < stack.size(); ++i) {
            sum += c.weights[i];
            color += c.weights[i] * stack[i].color;
            bounded = bounded && c.weights[i] >= 0.0 && c.weights[i] <= 1.0;
        }
        for (const auto& [label, w] : c.part_weights) {
            part_sum += w;
            bounded = bounded && w >= 0.0 && w <= 1.0;
        }
        worst = std::max({worst, std::abs(sum + c.transmittance - 1.0), std::abs(part_sum + c.transmittance - 1.0)});
        worst_color = std::max(worst_color, (color - c.color).cwiseAbs().maxCoeff());
    }

    // Rendered weight maps of a real scene.
    const SceneBundle b = synth::generate_scene(synth::preset("storage3", seed));
    StateSnapshot field = b.canonical;
    assign_labels(field, b.ground_truth->labels);
    double map_lo = 0.0, map_hi = 0.0, map_sum_err = 0.0;
    for (std::size_t v = 0; v < 4; ++v) {
        const RenderOutput r = render_view(field, b.cameras[0][v]);
        for (std::size_t i = 0; i < r.pixel_count(); ++i) {
            double s = r.transmittance[i];
            for (const auto& m : r.weight_maps) {
                map_lo = std::min(map_lo, m[i]);
                map_hi = std::max(map_hi, m[i]);
                s += m[i];
            }
            map_sum_err = std::max(map_sum_err, std::abs(s - 1.0));
        }
    }
    const bool pass = worst <= 1e-9 && worst_color <= 1e-9 && bounded && map_lo >= 0.0 && map_hi <= 1.0 &&
                      map_sum_err <= 1e-9;
    return {pass, fmt("10^6 stacks: max |sum w + T - 1|=%.2e, max color residual=%.2e, weights in [0,1]: %s; "
                      "rendered maps in [%.3g, %.17g], max |sum maps + T - 1|=%.2e",
                      worst, worst_color, bounded ? "yes" : "NO", map_lo, map_hi, map_sum_err)};
}

// ---------------------------------------------------------------- 4

Outcome projection_jacobian(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const RasterConfig cfg;
    double worst = 0.0;
    int checked = 0;
    int attempts = 0;
    while (checked < 1000 && attempts < 100000) {
        ++attempts;
        const Vec3 eye = 3.0 * random_unit(rng);
        const CameraModel cam =
            synth::look_at(eye, 0.2 * Vec3(u(rng), u(rng), u(rng)), 128, 96, 50.0 + 20.0 * u(rng));
        const GaussianPrimitive p = random_primitive(rng, 0.3);
        const auto pg = project_gaussian(p, cam, cfg);
        if (!pg) {
            continue;
        }
        const auto pi = [&](const Vec3& x) { return project_point(cam, to_camera(cam, x)); };
        Eigen::Matrix<double, 2, 3> j;
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            const Vec3 d = Vec3::Unit(k) * h;
            j.col(k) = (pi(p.center + d) - pi(p.center - d)) / (2 * h);
        }
        const Mat2 expected = j * covariance_of(p) * j.transpose() + cfg.low_pass * Mat2::Identity();
        worst = std::max(worst, (pg->cov2d - expected).norm() / expected.norm());
        ++checked;
    }
    return {checked == 1000 && worst <= 1e-4, fmt("%d pairs, max relative error %.2e (limit 1e-4)", checked, worst)};
}

// ---------------------------------------------------------------- 5

Outcome deform_gradients(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
    double worst = 0.0;
    int coords = 0;
    for (int net_index = 0; net_index < 10; ++net_index) {
        SceneBundle b;
        for (int i = 0; i < 6; ++i) {
            b.canonical.primitives.push_back(random_primitive(rng, 0.5));
        }
        std::normal_distribution<double> g(0.0, 0.05);
        for (int s = 0; s < 3; ++s) {
            StateSnapshot st = b.canonical;
            const Quat turn = Quat::from_axis_angle(Vec3::UnitZ(), 0.2 * s);
            for (auto& p : st.primitives) {
                p.center += Vec3(g(rng), g(rng), 0.1 * s);
                p.orientation = turn * p.orientation;
                p.scale += Vec3::Constant(0.01 * s);
            }
            b.states.push_back(st);
            b.cameras.push_back({CameraModel{}});
        }
        const int dim = 3;
        const DeformNet net = DeformNet::create(dim, 8, 2, seed + static_cast<std::uint64_t>(net_index), 0.5);
        std::normal_distribution<double> lg(0.0, 0.5);
        std::vector<LatentCode> latents(3);
        for (auto& l : latents) {
            l.values = Eigen::VectorXd::NullaryExpr(dim, [&] { return lg(rng); });
        }
        LossGradient grad;
        deform_loss(net, latents, b, {}, &grad);
        const Eigen::VectorXd theta = net.parameters();
        const std::size_t n_params = static_cast<std::size_t>(theta.size());
        const std::size_t n_latent = latents.size() * dim;
        std::uniform_int_distribution<std::size_t> pick(0, n_params + n_latent - 1);
        const double h = 1e-5;
        for (int c = 0; c < 20; ++c) {
            const std::size_t w = pick(rng);
            double analytic = 0.0, fd = 0.0;
            if (w < n_params) {
                DeformNet plus = net, minus = net;
                Eigen::VectorXd tp = theta, tm = theta;
                tp[static_cast<Eigen::Index>(w)] += h;
                tm[static_cast<Eigen::Index>(w)] -= h;
                plus.set_parameters(tp);
                minus.set_parameters(tm);
                analytic = grad.parameters[static_cast<Eigen::Index>(w)];
                fd = (deform_loss(plus, latents, b) - deform_loss(minus, latents, b)) / (2 * h);
            } else {
                const std::size_t s = (w - n_params) / dim;
                const int d = static_cast<int>((w - n_params) % dim);
                auto plus = latents, minus = latents;
                plus[s].values[d] += h;
                minus[s].values[d] -= h;
                analytic = grad.latents[s][d];
                fd = (deform_loss(net, plus, b) - deform_loss(net, minus, b)) / (2 * h);
            }
            worst = std::max(worst, rel(analytic, fd));
            ++coords;
        }
    }
    return {worst <= 1e-4, fmt("10 nets x 20 coordinates (%d checks), max relative error %.2e (limit 1e-4)", coords,
                               worst)};
}

// ---------------------------------------------------------------- 6

double spearman(const std::vector<double>& x, const std::vector<double>& y)
{
    const auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
                ++j;
            }
            for (std::size_t k = i; k <= j; ++k) {
                r[idx[k]] = 0.5 * static_cast<double>(i + j);
            }
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Outcome latent_interpolation()
{
    const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> rhos;
    bool strict_all = true;
    bool endpoints = true;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SceneBundle b = synth::generate_scene(synth::preset("drawer1", seed));
        FitConfig cfg;
        cfg.seed = seed;
        cfg.epochs = 500;
        cfg.optimizer = Optimizer::adam;
        const FitResult r = fit(b, cfg);
        const auto& gt = *b.ground_truth;
        const Vec3 axis = gt.parts.front().axis;
        const LatentCode& a = r.latents.front();
        const LatentCode& z = r.latents.back();
        std::vector<double> shift;
        StateSnapshot first;
        for (double t : ts) {
            const StateSnapshot s = interpolate(r.net, a, z, t, b.canonical);
            if (t == 0.0) {
                first = s;
                endpoints = endpoints && s == deform(r.net, a, b.canonical);
            }
            if (t == 1.0) {
                endpoints = endpoints && s == deform(r.net, z, b.canonical);
            }
            double d = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < b.primitive_count(); ++i) {
                if (gt.labels[i] == gt.parts.front().label) {
                    d += axis.dot(s.primitives[i].center - first.primitives[i].center);
                    ++n;
                }
            }
            shift.push_back(d / static_cast<double>(n));
        }
        bool strict = true;
        for (std::size_t i = 1; i < shift.size(); ++i) {
            strict = strict && shift[i] > shift[i - 1];
        }
        strict_all = strict_all && strict;
        rhos.push_back(spearman(ts, shift));
        per_seed += fmt(" %.3f", shift.back());
    }
    std::vector<double> sorted = rhos;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    return {median == 1.0 && endpoints,
            fmt("median Spearman rho=%.3f (min %.3f), strictly monotone on all seeds: %s, endpoints exact: %s, "
                "t=1 drawer shift per seed:%s",
                median, sorted.front(), strict_all ? "yes" : "no", endpoints ? "yes" : "NO", per_seed.c_str())};
}

// ---------------------------------------------------------------- 7

Outcome joint_suite(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(2.0 * kDeg, 178.0 * kDeg);
    std::uniform_real_distribution<double> dist(0.05, 0.5);
    std::normal_distribution<double> noise(0.0, 1e-3);
    const KinematicsConfig cfg;

    double ang_err = 0.0, axis_err = 0.0, line_err = 0.0, d_err = 0.0;
    std::size_t correct = 0, total = 0;
    // Under noise the criterion bounds the rotation angle; the axis
    // direction error is reported alongside.
    double noisy_theta = 0.0, noisy_axis = 0.0;
    std::size_t noisy_correct = 0, noisy_total = 0;

    const auto cloud = [&] {
        std::vector<Vec3> p(200);
        for (auto& x : p) {
            x = 0.15 * Vec3(u(rng), u(rng), u(rng));
        }
        return p;
    };
    const auto perturb = [&](std::vector<Vec3> q) {
        for (auto& x : q) {
            x += Vec3(noise(rng), noise(rng), noise(rng));
        }
        return q;
    };

    for (int i = 0; i < 200; ++i) {
        // Revolute: pivot within 0.3 of the part.
        const auto p = cloud();
        const Vec3 axis = random_unit(rng);
        const Vec3 pivot = 0.3 * Vec3(u(rng), u(rng), u(rng));
        const double theta = angle(rng);
        const Mat3 r = rodrigues(axis, theta);
        std::vector<Vec3> q;
        for (const auto& x : p) {
            q.push_back(r * (x - pivot) + pivot);
        }
        const Classification c = classify_joint(p, q, cfg);
        ++total;
        if (c.kind == JointKind::revolute) {
            ++correct;
            const JointModel j = fit_revolute(p, q, cfg);
            ang_err = std::max(ang_err, std::abs(j.magnitude - theta));
            axis_err = std::max(axis_err, direction_angle(j.axis, axis));
            line_err = std::max(line_err, line_distance(j.pivot, pivot, axis));
        }
        const auto qn = perturb(q);
        const Classification cn = classify_joint(p, qn, cfg);
        ++noisy_total;
        if (cn.kind == JointKind::revolute) {
            ++noisy_correct;
            const JointModel j = fit_revolute(p, qn, cfg);
            noisy_theta = std::max(noisy_theta, std::abs(j.magnitude - theta) / kDeg);
            noisy_axis = std::max(noisy_axis, direction_angle(j.axis, axis) / kDeg);
        }
    }
    for (int i = 0; i < 200; ++i) {
        const auto p = cloud();
        const Vec3 axis = random_unit(rng);
        const double d = dist(rng);
        std::vector<Vec3> q;
        for (const auto& x : p) {
            q.push_back(x + d * axis);
        }
        const Classification c = classify_joint(p, q, cfg);
        ++total;
        if (c.kind == JointKind::prismatic) {
            ++correct;
            const JointModel j = fit_prismatic(p, q);
            d_err = std::max(d_err, std::abs(j.magnitude - d));
            axis_err = std::max(axis_err, direction_angle(j.axis, axis));
        }
        const auto qn = perturb(q);
        const Classification cn = classify_joint(p, qn, cfg);
        ++noisy_total;
        if (cn.kind == JointKind::prismatic) {
            ++noisy_correct;
            const JointModel j = fit_prismatic(p, qn);
            noisy_axis = std::max(noisy_axis, direction_angle(j.axis, axis) / kDeg);
        }
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(total);
    const double noisy_acc = static_cast<double>(noisy_correct) / static_cast<double>(noisy_total);
    const bool pass = correct == total && ang_err < 1e-9 && axis_err < 1e-9 && line_err < 1e-9 && d_err < 1e-12 &&
                      noisy_acc >= 0.99 && noisy_theta < 0.5;
    return {pass, fmt("noiseless: classification %.1f%%, angle err %.2e rad, axis dir err %.2e rad, axis-line dist "
                      "%.2e, d err %.2e; sigma=1e-3: classification %.1f%%, angle err %.3f deg, axis dir err %.3f deg",
                      100.0 * acc, ang_err, axis_err, line_err, d_err, 100.0 * noisy_acc, noisy_theta, noisy_axis)};
}

// ---------------------------------------------------------------- 8

Outcome split_conservation(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const GaussianPrimitive p = random_primitive(rng, 1.0);
        int k = 0;
        p.scale.maxCoeff(&k);
        const Vec3 axis = p.orientation.to_matrix().col(k);
        const Vec3 e = u(rng) < 0.5 ? axis : Vec3(-axis);
        const double lambda = 0.001 + 0.998 * u(rng);
        const auto [part, bg] = split_gaussian(p, lambda, e);
        const double s = p.scale[k];
        const double part_mid = e.dot(part.center - p.center);
        const double bg_mid = e.dot(bg.center - p.center);
        worst = std::max({worst, std::abs(part_mid + 0.5 * part.scale[k] - 0.5 * s),
                          std::abs(bg_mid - 0.5 * bg.scale[k] + 0.5 * s),
                          std::abs((part_mid - 0.5 * part.scale[k]) - (bg_mid + 0.5 * bg.scale[k])),
                          ((part.center - p.center) - part_mid * e).norm(), ((bg.center - p.center) - bg_mid * e).norm()});
    }

    // Adversarial straddlers: many, long and evenly split across the edge.
    std::string runs;
    bool bounded = true;
    for (const auto& [per_part, length, inside] :
         std::vector<std::tuple<std::size_t, double, double>>{{30, 0.12, 0.5}, {20, 0.2, 0.3}, {12, 0.08, 0.9}}) {
        auto spec = synth::preset("storage2", seed);
        spec.straddlers.per_part = per_part;
        spec.straddlers.length = length;
        spec.straddlers.inside_fraction = inside;
        const SceneBundle b = synth::generate_scene(spec);
        std::vector<std::size_t> views(b.cameras[0].size());
        std::iota(views.begin(), views.end(), 0);
        for (std::size_t depth : {2u, 6u}) {
            RefineConfig cfg;
            cfg.max_depth = depth;
            OracleSegmenter seg(b);
            const MaskSet masks = acquire_masks(seg, b, b.ground_truth->labels, views, cfg);
            const RefinedField r = refine_labels(b, b.ground_truth->labels, masks, cfg);
            const std::size_t deepest = *std::max_element(r.depth.begin(), r.depth.end());
            bounded = bounded && deepest <= depth && r.stats.max_depth <= depth &&
                      r.field.primitives.size() == b.primitive_count() + r.stats.splits;
            runs += fmt(" [%zu straddlers/part, bound %zu: %zu splits, depth %zu]", per_part, depth, r.stats.splits,
                        deepest);
        }
    }
    return {worst <= 1e-12 && bounded,
            fmt("10^4 splits max tiling residual %.2e; refinement%s", worst, runs.c_str())};
}

// ---------------------------------------------------------------- 9

Outcome chamfer_oracle(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    std::uniform_int_distribution<std::size_t> size(1, 500);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vec3> a(size(rng)), b(size(rng));
        for (auto& p : a) {
            p = Vec3(g(rng), g(rng), g(rng));
        }
        for (auto& p : b) {
            p = Vec3(g(rng), g(rng), g(rng));
        }
        const auto one_way = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
            double sum = 0.0;
            for (const auto& p : from) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& q : to) {
                    best = std::min(best, (p - q).squaredNorm());
                }
                sum += best;
            }
            return sum / static_cast<double>(from.size());
        };
        const double brute = 1e3 * 0.5 * (one_way(a, b) + one_way(b, a));
        worst = std::max(worst, std::abs(chamfer(a, b) - brute));
    }
    return {worst <= 1e-9, fmt("100 pairs, max |indexed - brute force| = %.2e", worst)};
}

// ---------------------------------------------------------------- 10

Outcome determinism(const fs::path& work)
{
    const fs::path scene = work / "storage2_scene";
    if (!fs::exists(scene / "scene.json") && cli({"synth", "--preset", "storage2", "--out", scene.string()}) != 0) {
        return {false, "synth failed"};
    }
    std::vector<fs::path> runs{work / "determinism_a", work / "determinism_b"};
    for (const auto& out : runs) {
        fs::remove_all(out);
        std::string err;
        if (cli({"--seed", "5", "pipeline", "--scene", scene.string(), "--out", out.string()}, &err) != 0) {
            return {false, "pipeline failed: " + err};
        }
    }
    std::string compared;
    bool same = true;
    for (const char* name : {"report.json", "report.csv", "labels.json", "joints.json", "refined_field.json"}) {
        const bool eq = fs::exists(runs[0] / name) && slurp(runs[0] / name) == slurp(runs[1] / name);
        same = same && eq;
        compared += std::string(" ") + name + (eq ? "" : "(DIFFERS)");
    }
    std::size_t masks = 0;
    for (const auto& e : fs::directory_iterator(runs[0] / "masks")) {
        const fs::path other = runs[1] / "masks" / e.path().filename();
        const bool eq = fs::exists(other) && slurp(e.path()) == slurp(other);
        same = same && eq;
        ++masks;
    }
    return {same, fmt("byte-identical:%s and %zu mask files", compared.c_str(), masks)};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"artikin acceptance suite"};
    std::string work_dir = (fs::temp_directory_path() / "artikin_acceptance").string();
    std::uint64_t seed = 20240601;
    std::vector<int> only;
    app.add_option("--work-dir", work_dir, "Scratch directory for scenes and runs");
    app.add_option("--seed", seed, "Seed for the randomized suites");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const fs::path work(work_dir);
    fs::create_directories(work);

    struct Criterion {
        int id;
        std::string name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "storage2 end to end (oracle provider and segmenter)", [&] { return end_to_end(work, "storage2"); }},
        {2, "storage3 end to end (three movable parts)", [&] { return end_to_end(work, "storage3"); }},
        {3, "compositing identity", [&] { return compositing_identity(seed + 3); }},
        {4, "projection Jacobian", [&] { return projection_jacobian(seed + 4); }},
        {5, "deformation gradients", [&] { return deform_gradients(seed + 5); }},
        {6, "latent interpolation monotone on drawer1", [&] { return latent_interpolation(); }},
        {7, "Kabsch and joint fitting", [&] { return joint_suite(seed + 7); }},
        {8, "split conservation and bounded refinement", [&] { return split_conservation(seed + 8); }},
        {9, "Chamfer equals brute force", [&] { return chamfer_oracle(seed + 9); }},
        {10, "pipeline determinism", [&] { return determinism(work); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << ": " << c.name << " (" << o.detail << "; "
                  << fmt("%.1f s", secs) << ")" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}

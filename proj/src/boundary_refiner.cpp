// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/boundary_refiner.hpp"

#include "artikin/error.hpp"
#include "artikin/parallel.hpp"
#include "artikin/synth_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

namespace artikin {

namespace {

bool pixel_inside(const BinaryImage& mask, const Vec2& p)
{
    const int x = static_cast<int>(std::floor(p.x()));
    const int y = static_cast<int>(std::floor(p.y()));
    return mask.inside(x, y) && mask.at(x, y);
}

std::set<int> moving_labels(const std::vector<int>& labels)
{
    std::set<int> out;
    for (int l : labels) {
        if (l >= 1) {
            out.insert(l);
        }
    }
    return out;
}

struct ViewLookup {
    const MaskSet* masks = nullptr;
    std::span<const CameraModel> cameras;
    /// Moving-part masks per entry of masks->views.
    std::vector<std::vector<const PartMask*>> per_view;
};

ViewLookup make_lookup(const MaskSet& masks, std::span<const CameraModel> cameras)
{
    ViewLookup lk;
    lk.masks = &masks;
    lk.cameras = cameras;
    lk.per_view.resize(masks.views.size());
    for (std::size_t j = 0; j < masks.views.size(); ++j) {
        if (masks.views[j] >= cameras.size()) {
            throw ValidationError("mask set references a view without a camera");
        }
        for (const auto& m : masks.masks) {
            if (m.label >= 1 && static_cast<std::size_t>(m.view) == masks.views[j]) {
                lk.per_view[j].push_back(&m);
            }
        }
    }
    return lk;
}

const PartMask* mask_in(const ViewLookup& lk, std::size_t j, int label)
{
    for (const PartMask* m : lk.per_view[j]) {
        if (m->label == label) {
            return m;
        }
    }
    return nullptr;
}

// Not hidden behind the rendered surface at its pixel.
bool visible(const RenderOutput& r, const Vec2& px, double z, const RefineConfig& cfg)
{
    const double d = r.depth[r.index(static_cast<int>(std::floor(px.x())), static_cast<int>(std::floor(px.y())))];
    return d <= 0.0 || z <= d + cfg.visibility_tolerance;
}

// The render gives `label` the larger share of the pixel's coverage.
bool rendered_as(const RenderOutput& r, const Vec2& px, int label, const RefineConfig& cfg)
{
    const int x = static_cast<int>(std::floor(px.x()));
    const int y = static_cast<int>(std::floor(px.y()));
    if (x < 0 || y < 0 || x >= r.width || y >= r.height) {
        return false;
    }
    const std::vector<double>* w = r.weight_map(label);
    const std::size_t i = r.index(x, y);
    const double cover = 1.0 - r.transmittance[i];
    return w != nullptr && cover > cfg.coverage_threshold && (*w)[i] > 0.5 * cover;
}

struct ViewTest {
    std::size_t j = 0;
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    double depth = 0.0;
};

// Projected major-axis endpoints in entry j, or nullopt when the primitive
// is not visible there.
std::optional<ViewTest> project_axis(const GaussianPrimitive& g, const Vec3& axis, double reach, std::size_t j,
                                     const ViewLookup& lk, const RefineConfig& cfg)
{
    const RasterConfig raster;
    if (mask_in(lk, j, g.label) == nullptr) {
        return std::nullopt;
    }
    const CameraModel& cam = lk.cameras[lk.masks->views[j]];
    const Vec3 c = to_camera(cam, g.center);
    const Vec3 ca = to_camera(cam, g.center + reach * axis);
    const Vec3 cb = to_camera(cam, g.center - reach * axis);
    if (std::min({c.z(), ca.z(), cb.z()}) <= raster.z_near) {
        return std::nullopt;
    }
    const Vec2 px = project_point(cam, c);
    if (px.x() < 0.0 || px.y() < 0.0 || px.x() >= cam.width || px.y() >= cam.height) {
        return std::nullopt;
    }
    if (!visible(lk.masks->renders[j], px, c.z(), cfg)) {
        return std::nullopt;
    }
    return ViewTest{j, project_point(cam, ca), project_point(cam, cb), c.z()};
}

std::optional<BoundaryCandidate> test_view(const GaussianPrimitive& g, std::size_t index, const Vec3& axis,
                                           const ViewTest& vt, const ViewLookup& lk, const RefineConfig& cfg)
{
    const BinaryImage& mask = mask_in(lk, vt.j, g.label)->mask;
    const Vec2& a = vt.a;
    const Vec2& b = vt.b;
    const bool in_a = pixel_inside(mask, a);
    const bool in_b = pixel_inside(mask, b);
    if (in_a && in_b) {
        return std::nullopt;
    }
    // Overflow only counts where the current labelling renders the part but
    // the segmenter disagrees; elsewhere the end is hidden or off the object.
    const RenderOutput& r = lk.masks->renders[vt.j];
    if ((!in_a && !rendered_as(r, a, g.label, cfg)) || (!in_b && !rendered_as(r, b, g.label, cfg))) {
        return std::nullopt;
    }

    BoundaryCandidate cand;
    cand.index = index;
    cand.label = g.label;
    cand.view = static_cast<int>(lk.masks->views[vt.j]);
    if (!in_a && !in_b) {
        cand.inside_end = a;
        cand.outside_end = b;
        cand.axis = axis;
        return cand;
    }
    cand.inside_end = in_a ? a : b;
    cand.outside_end = in_a ? b : a;
    cand.axis = in_a ? axis : Vec3(-axis);
    const double f = crossing_fraction(mask, cand.inside_end, cand.outside_end);
    const double len = (b - a).norm();
    cand.overflow_px = (1.0 - f) * len;
    // Crossing at τ = reach − 2 f reach along the axis from the center; the
    // in-mask share of [−σ, σ] follows.
    const double lambda = 0.5 * (1.0 - cfg.ellipse_sigma + 2.0 * cfg.ellipse_sigma * f);
    cand.lambda = std::clamp(lambda, cfg.lambda_clamp, 1.0 - cfg.lambda_clamp);
    cand.splittable = lambda > 0.0 && lambda < 1.0 && f * len >= cfg.min_segment_px &&
                      (1.0 - f) * len >= cfg.min_segment_px;
    return cand;
}

std::optional<BoundaryCandidate> evaluate(const GaussianPrimitive& g, std::size_t index, const ViewLookup& lk,
                                          const RefineConfig& cfg)
{
    int k = 0;
    const double s = g.scale.maxCoeff(&k);
    const Vec3 axis = g.orientation.to_matrix().col(k);
    const double reach = cfg.ellipse_sigma * 0.5 * s;

    std::vector<ViewTest> seen;
    for (std::size_t j = 0; j < lk.per_view.size(); ++j) {
        if (auto vt = project_axis(g, axis, reach, j, lk, cfg)) {
            seen.push_back(*vt);
        }
    }
    if (seen.empty()) {
        return std::nullopt;
    }
    if (cfg.view_choice != ViewChoice::max_overflow) {
        const auto score = [&](const ViewTest& vt) {
            return cfg.view_choice == ViewChoice::nearest ? -vt.depth : (vt.b - vt.a).norm();
        };
        const auto best = std::max_element(seen.begin(), seen.end(), [&](const ViewTest& x, const ViewTest& y) {
            return score(x) < score(y);
        });
        return test_view(g, index, axis, *best, lk, cfg);
    }
    // Largest splittable overflow over all views; an unsplittable verdict
    // only when no view allows a split.
    std::optional<BoundaryCandidate> out;
    for (const ViewTest& vt : seen) {
        auto c = test_view(g, index, axis, vt, lk, cfg);
        if (!c) {
            continue;
        }
        const bool better = !out || (c->splittable && !out->splittable) ||
                            (c->splittable == out->splittable && c->overflow_px > out->overflow_px);
        if (better) {
            out = c;
        }
    }
    return out;
}

int vote(const GaussianPrimitive& g, int parent, const ViewLookup& lk, const RefineConfig& cfg)
{
    const RasterConfig raster;
    std::map<int, int> counts;
    for (std::size_t j = 0; j < lk.per_view.size(); ++j) {
        const CameraModel& cam = lk.cameras[lk.masks->views[j]];
        const Vec3 c = to_camera(cam, g.center);
        if (c.z() <= raster.z_near) {
            continue;
        }
        const Vec2 px = project_point(cam, c);
        const int x = static_cast<int>(std::floor(px.x()));
        const int y = static_cast<int>(std::floor(px.y()));
        if (x < 0 || y < 0 || x >= cam.width || y >= cam.height) {
            continue;
        }
        const RenderOutput& r = lk.masks->renders[j];
        const std::size_t idx = r.index(x, y);
        if (!visible(r, px, c.z(), cfg)) {
            continue;
        }
        int hit = 0;
        int hits = 0;
        for (const PartMask* m : lk.per_view[j]) {
            if (m->mask.at(x, y)) {
                hit = m->label;
                ++hits;
            }
        }
        if (hits == 1) {
            ++counts[hit];
        } else if (hits == 0 && 1.0 - r.transmittance[idx] > cfg.coverage_threshold) {
            ++counts[0];
        }
    }
    int best = parent;
    int best_count = 0;
    bool tie = false;
    for (const auto& [label, n] : counts) {
        if (n > best_count) {
            best = label;
            best_count = n;
            tie = false;
        } else if (n == best_count) {
            tie = true;
        }
    }
    return tie || best_count == 0 ? parent : best;
}

} // namespace

std::string_view to_string(ViewChoice c)
{
    switch (c) {
    case ViewChoice::nearest:
        return "nearest";
    case ViewChoice::longest_axis:
        return "longest_axis";
    case ViewChoice::max_overflow:
        break;
    }
    return "max_overflow";
}

ViewChoice view_choice_from_string(std::string_view name)
{
    if (name == "nearest") {
        return ViewChoice::nearest;
    }
    if (name == "longest_axis") {
        return ViewChoice::longest_axis;
    }
    if (name == "max_overflow") {
        return ViewChoice::max_overflow;
    }
    throw ValidationError("unknown view choice '" + std::string(name) + "'");
}

PixelAssignment part_pixel_assignment(const RenderOutput& render, double tau_vis, double eps)
{
    if (!(tau_vis > 0.0) || !(eps > 0.0)) {
        throw ValidationError("pixel assignment: tau_vis and eps must be positive");
    }
    PixelAssignment out;
    out.width = render.width;
    out.height = render.height;
    out.part.assign(render.pixel_count(), PixelAssignment::kUnassigned);
    const std::size_t n_parts = render.part_labels.size();
    for (std::size_t i = 0; i < render.pixel_count(); ++i) {
        // Only the two largest weights matter.
        double first = -1.0;
        double second = 0.0;
        std::size_t arg = 0;
        for (std::size_t p = 0; p < n_parts; ++p) {
            const double w = render.weight_maps[p][i];
            if (w > first) {
                second = std::max(second, first);
                first = w;
                arg = p;
            } else if (w > second) {
                second = w;
            }
        }
        if (first > 0.0 && first / (second + eps) > tau_vis) {
            out.part[i] = render.part_labels[arg];
        }
    }
    return out;
}

std::vector<Pixel> farthest_point_sampling(std::span<const Pixel> pool, std::size_t count)
{
    std::vector<Pixel> out;
    if (pool.empty() || count == 0) {
        return out;
    }
    double cx = 0.0;
    double cy = 0.0;
    for (const Pixel& p : pool) {
        cx += p.x;
        cy += p.y;
    }
    cx /= static_cast<double>(pool.size());
    cy /= static_cast<double>(pool.size());
    std::size_t first = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double d = (pool[i].x - cx) * (pool[i].x - cx) + (pool[i].y - cy) * (pool[i].y - cy);
        if (d < best) {
            best = d;
            first = i;
        }
    }
    std::vector<long long> nearest(pool.size(), std::numeric_limits<long long>::max());
    std::size_t pick = first;
    const std::size_t n = std::min(count, pool.size());
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(pool[pick]);
        long long far = -1;
        std::size_t next = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const long long dx = pool[i].x - pool[pick].x;
            const long long dy = pool[i].y - pool[pick].y;
            nearest[i] = std::min(nearest[i], dx * dx + dy * dy);
            if (nearest[i] > far) {
                far = nearest[i];
                next = i;
            }
        }
        pick = next;
    }
    return out;
}

std::optional<PromptSet> sample_prompts(const PixelAssignment& assignment, const RenderOutput& render, int label,
                                        int view, std::size_t positives, std::size_t negatives)
{
    if (assignment.width != render.width || assignment.height != render.height) {
        throw ValidationError("sample_prompts: assignment and render sizes differ");
    }
    const std::vector<double>* w = render.weight_map(label);
    std::vector<Pixel> pos;
    std::vector<Pixel> neg;
    for (int y = 0; y < render.height; ++y) {
        for (int x = 0; x < render.width; ++x) {
            const std::size_t i = render.index(x, y);
            if (assignment.part[i] == label) {
                pos.push_back({x, y});
            }
            if (w == nullptr || (*w)[i] == 0.0) {
                neg.push_back({x, y});
            }
        }
    }
    if (pos.empty()) {
        return std::nullopt;
    }
    PromptSet out;
    out.view = view;
    out.label = label;
    out.positives = farthest_point_sampling(pos, positives);
    out.negatives = farthest_point_sampling(neg, negatives);
    return out;
}

void validate_prompts(const PromptSet& prompts, int width, int height)
{
    if (prompts.positives.empty()) {
        throw ValidationError("prompt set for part " + std::to_string(prompts.label) + " has no positive prompt");
    }
    const auto check = [&](const Pixel& p) {
        if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
            throw ValidationError("prompt (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                  ") lies outside the " + std::to_string(width) + "x" + std::to_string(height) +
                                  " image");
        }
    };
    std::for_each(prompts.positives.begin(), prompts.positives.end(), check);
    std::for_each(prompts.negatives.begin(), prompts.negatives.end(), check);
}

OracleSegmenter::OracleSegmenter(const SceneBundle& bundle, std::size_t state)
{
    if (!bundle.ground_truth) {
        throw ValidationError("oracle segmenter needs a ground_truth block");
    }
    if (state >= bundle.states.size()) {
        throw ValidationError("oracle segmenter: state out of range");
    }
    for (std::size_t v = 0; v < bundle.cameras[state].size(); ++v) {
        masks_.push_back(synth::ground_truth_masks(bundle, v, {}, state));
    }
}

PartMask OracleSegmenter::segment(const SegmentRequest& request)
{
    if (request.view < 0 || static_cast<std::size_t>(request.view) >= masks_.size()) {
        throw ValidationError("oracle segmenter: view out of range");
    }
    const auto& truth = masks_[static_cast<std::size_t>(request.view)];
    if (truth.empty() || truth.front().mask.width != request.width || truth.front().mask.height != request.height) {
        throw ValidationError("oracle segmenter: image size does not match the camera");
    }
    validate_prompts(request.prompts, request.width, request.height);
    const PartMask* best = nullptr;
    std::size_t best_hits = 0;
    for (const auto& m : truth) {
        std::size_t hits = 0;
        for (const Pixel& p : request.prompts.positives) {
            hits += m.mask.at(p.x, p.y) ? 1 : 0;
        }
        if (hits > best_hits) {
            best = &m;
            best_hits = hits;
        }
    }
    PartMask out;
    out.view = request.view;
    out.label = request.label;
    out.mask = best != nullptr ? best->mask : BinaryImage(request.width, request.height);
    return out;
}

const PartMask* MaskSet::find(int label, int view) const
{
    for (const auto& m : masks) {
        if (m.label == label && m.view == view) {
            return &m;
        }
    }
    return nullptr;
}

MaskSet acquire_masks(Segmenter& segmenter, const SceneBundle& bundle, const std::vector<int>& labels,
                      std::span<const std::size_t> views, const RefineConfig& cfg)
{
    if (labels.size() != bundle.canonical.primitives.size()) {
        throw ValidationError("label count does not match the canonical field");
    }
    if (bundle.cameras.empty()) {
        throw ValidationError("scene has no cameras");
    }
    const auto& cams = bundle.cameras[0];
    for (std::size_t v : views) {
        if (v >= cams.size()) {
            throw ValidationError("view " + std::to_string(v) + " is out of range");
        }
    }
    StateSnapshot field = bundle.canonical;
    assign_labels(field, labels);
    const std::set<int> moving = moving_labels(labels);

    MaskSet out;
    out.views.assign(views.begin(), views.end());
    out.renders.resize(views.size());
    RenderOptions ro;
    ro.threads = cfg.threads;
    for (std::size_t j = 0; j < views.size(); ++j) {
        out.renders[j] = render_view(field, cams[views[j]], ro);
    }
    for (std::size_t j = 0; j < views.size(); ++j) {
        const int view = static_cast<int>(views[j]);
        const RenderOutput& r = out.renders[j];
        const PixelAssignment assignment = part_pixel_assignment(r, cfg.tau_vis);
        for (int label : moving) {
            auto prompts = sample_prompts(assignment, r, label, view, cfg.positives, cfg.negatives);
            if (!prompts) {
                out.warnings.push_back("view " + std::to_string(view) + ": part " + std::to_string(label) +
                                       " has no assigned pixel, skipped");
                continue;
            }
            validate_prompts(*prompts, r.width, r.height);
            SegmentRequest req;
            req.view = view;
            req.label = label;
            req.width = r.width;
            req.height = r.height;
            if (segmenter.needs_images()) {
                req.rgb = r.color;
            }
            req.prompts = *prompts;
            PartMask m = segmenter.segment(req);
            if (m.mask.width != r.width || m.mask.height != r.height) {
                throw RuntimeFailure("segmenter '" + segmenter.name() + "' returned a mask of the wrong size");
            }
            m.view = view;
            m.label = label;
            out.masks.push_back(std::move(m));
            out.prompts.push_back(std::move(*prompts));
        }
    }
    return out;
}

double crossing_fraction(const BinaryImage& mask, const Vec2& a, const Vec2& b)
{
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 < 1e-24) {
        return pixel_inside(mask, a) ? 1.0 : 0.0;
    }
    int x = static_cast<int>(std::floor(a.x()));
    int y = static_cast<int>(std::floor(a.y()));
    const int x1 = static_cast<int>(std::floor(b.x()));
    const int y1 = static_cast<int>(std::floor(b.y()));
    const int dx = std::abs(x1 - x);
    const int dy = -std::abs(y1 - y);
    const int sx = x < x1 ? 1 : -1;
    const int sy = y < y1 ? 1 : -1;
    int err = dx + dy;
    double t_in = 0.0;
    bool any_inside = false;
    while (true) {
        const double t = std::clamp((Vec2(x + 0.5, y + 0.5) - a).dot(ab) / len2, 0.0, 1.0);
        if (!(mask.inside(x, y) && mask.at(x, y))) {
            return any_inside ? 0.5 * (t_in + t) : 0.0;
        }
        any_inside = true;
        t_in = t;
        if (x == x1 && y == y1) {
            return 1.0;
        }
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

std::vector<BoundaryCandidate> detect_boundary_candidates(const StateSnapshot& field, const MaskSet& masks,
                                                          std::span<const CameraModel> cameras,
                                                          const RefineConfig& cfg)
{
    const ViewLookup lk = make_lookup(masks, cameras);
    std::vector<std::optional<BoundaryCandidate>> found(field.primitives.size());
    parallel_for(field.primitives.size(), cfg.threads, [&](std::size_t i) {
        if (field.primitives[i].label >= 1) {
            found[i] = evaluate(field.primitives[i], i, lk, cfg);
        }
    });
    std::vector<BoundaryCandidate> out;
    for (auto& f : found) {
        if (f) {
            out.push_back(*f);
        }
    }
    return out;
}

std::pair<GaussianPrimitive, GaussianPrimitive> split_gaussian(const GaussianPrimitive& p, double lambda,
                                                               const Vec3& e)
{
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw ValidationError("split_gaussian: lambda must lie in (0, 1)");
    }
    if (std::abs(e.norm() - 1.0) > 1e-6) {
        throw ValidationError("split_gaussian: direction must be a unit vector");
    }
    const Mat3 r = p.orientation.to_matrix();
    const double s_max = p.scale.maxCoeff();
    int k = -1;
    for (int j = 0; j < 3; ++j) {
        if (p.scale[j] >= s_max * (1.0 - 1e-12) && std::abs(r.col(j).dot(e)) >= 1.0 - 1e-6) {
            k = j;
        }
    }
    if (k < 0) {
        throw ValidationError("split_gaussian: direction is not the major axis");
    }
    const double s = p.scale[k];
    GaussianPrimitive part = p;
    GaussianPrimitive background = p;
    part.center = p.center + (0.5 * (1.0 - lambda) * s) * e;
    part.scale[k] = lambda * s;
    background.center = p.center - (0.5 * lambda * s) * e;
    background.scale[k] = (1.0 - lambda) * s;
    return {part, background};
}

RefinedField refine_labels(const SceneBundle& bundle, const std::vector<int>& labels, const MaskSet& masks,
                           const RefineConfig& cfg)
{
    if (labels.size() != bundle.canonical.primitives.size()) {
        throw ValidationError("label count does not match the canonical field");
    }
    if (bundle.cameras.empty()) {
        throw ValidationError("scene has no cameras");
    }
    const auto& cams = bundle.cameras[0];
    const ViewLookup lk = make_lookup(masks, cams);

    RefinedField out;
    out.field = bundle.canonical;
    assign_labels(out.field, labels);
    auto& prims = out.field.primitives;
    const std::size_t n = prims.size();
    out.source_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.source_index[i] = i;
    }
    out.depth.assign(n, 0);
    std::vector<bool> fresh(n, false);

    const auto candidates = detect_boundary_candidates(out.field, masks, cams, cfg);
    out.stats.candidates = candidates.size();

    struct Entry {
        double overflow;
        std::size_t index;
        BoundaryCandidate cand;
    };
    // Largest overflow first; equal overflows in index order.
    const auto later = [](const Entry& a, const Entry& b) {
        return a.overflow != b.overflow ? a.overflow < b.overflow : a.index > b.index;
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(later)> queue(later);
    const auto may_split = [&](const GaussianPrimitive& g, std::size_t depth) {
        return depth < cfg.max_depth && g.scale.maxCoeff() >= cfg.s_min;
    };
    for (const auto& c : candidates) {
        if (!c.splittable) {
            ++out.stats.unsplittable;
        } else if (may_split(prims[c.index], 0)) {
            queue.push({c.overflow_px, c.index, c});
        }
    }

    while (!queue.empty()) {
        const Entry e = queue.top();
        queue.pop();
        const std::size_t i = e.index;
        auto [part, background] = split_gaussian(prims[i], e.cand.lambda, e.cand.axis);
        const std::size_t depth = out.depth[i] + 1;
        prims[i] = part;
        out.depth[i] = depth;
        fresh[i] = true;
        const std::size_t j = prims.size();
        prims.push_back(background);
        out.source_index.push_back(out.source_index[i]);
        out.depth.push_back(depth);
        fresh.push_back(true);
        ++out.stats.splits;
        out.stats.max_depth = std::max(out.stats.max_depth, depth);
        if (may_split(background, depth)) {
            const auto c = evaluate(background, j, lk, cfg);
            if (c && c->splittable) {
                queue.push({c->overflow_px, j, *c});
            }
        }
    }

    std::vector<int> voted(prims.size());
    parallel_for(prims.size(), cfg.threads, [&](std::size_t i) {
        voted[i] = fresh[i] ? vote(prims[i], prims[i].label, lk, cfg) : prims[i].label;
    });
    for (std::size_t i = 0; i < prims.size(); ++i) {
        if (voted[i] != prims[i].label) {
            ++out.stats.relabelled;
            prims[i].label = voted[i];
        }
    }
    return out;
}

double region_accuracy(const GroundTruth& truth, const StateSnapshot& field, std::span<const std::size_t> source_index)
{
    if (source_index.size() != field.primitives.size()) {
        throw ValidationError("region_accuracy: source index does not match the field");
    }
    if (field.primitives.empty()) {
        throw ValidationError("region_accuracy: empty field");
    }
    std::unordered_map<std::size_t, const MixedTruth*> mixed;
    for (const auto& m : truth.mixed) {
        mixed[m.index] = &m;
    }
    double total = 0.0;
    double correct = 0.0;
    for (std::size_t i = 0; i < field.primitives.size(); ++i) {
        const std::size_t src = source_index[i];
        if (src >= truth.labels.size()) {
            throw ValidationError("region_accuracy: source index out of range");
        }
        const GaussianPrimitive& g = field.primitives[i];
        const double volume = g.scale.prod();
        total += volume;
        const auto it = mixed.find(src);
        if (it == mixed.end()) {
            correct += g.label == truth.labels[src] ? volume : 0.0;
            continue;
        }
        const MixedTruth& m = *it->second;
        int k = 0;
        const double s = g.scale.maxCoeff(&k);
        const Vec3 e = g.orientation.to_matrix().col(k);
        // Share of the axis segment μ + τe, |τ| ≤ s/2, on the negative side.
        const double h0 = m.plane_normal.dot(g.center - m.plane_point);
        const double slope = m.plane_normal.dot(e);
        double negative = h0 < 0.0 ? 1.0 : 0.0;
        if (std::abs(slope) > 1e-12) {
            const double tau0 = std::clamp(-h0 / slope, -0.5 * s, 0.5 * s);
            negative = slope > 0.0 ? (tau0 + 0.5 * s) / s : (0.5 * s - tau0) / s;
        }
        if (g.label == m.label_negative) {
            correct += volume * negative;
        } else if (g.label == m.label_positive) {
            correct += volume * (1.0 - negative);
        }
    }
    return correct / total;
}

} // namespace artikin

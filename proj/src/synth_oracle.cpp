// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/synth_oracle.hpp"

#include "artikin/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace artikin::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// Camera elevations draw from their own stream so adding primitives never
// moves the cameras.
constexpr std::uint64_t kCameraStream = 0x9E3779B97F4A7C15ull;

Quat quat_from_frame(const Vec3& c0, const Vec3& c1, const Vec3& c2)
{
    Mat3 m;
    m.col(0) = c0;
    m.col(1) = c1;
    m.col(2) = c2;
    Eigen::Quaterniond q(m);
    q.normalize();
    if (q.w() < 0.0) {
        q.coeffs() *= -1.0;
    }
    return {q.w(), q.x(), q.y(), q.z()};
}

int axis_index(const Vec3& v)
{
    for (int a = 0; a < 3; ++a) {
        if (std::abs(std::abs(v[a]) - 1.0) < kUnitTolerance && v.norm() < 1.0 + kUnitTolerance) {
            return a;
        }
    }
    return -1;
}

void validate_spec(const SceneSpec& spec)
{
    if (spec.states < 2) {
        throw ValidationError("scene spec: at least two states are required");
    }
    if (spec.parts.empty()) {
        throw ValidationError("scene spec: no parts");
    }
    for (const auto& part : spec.parts) {
        const std::string where = "scene spec: part '" + part.name + "'";
        if (!(part.box.extents().array() > 0.0).all() || !part.box.extents().allFinite()) {
            throw ValidationError(where + ": box extents must be positive");
        }
        if (part.gaussians == 0) {
            throw ValidationError(where + ": needs at least one Gaussian");
        }
        if (!part.joint) {
            continue;
        }
        const auto& j = *part.joint;
        if (j.magnitudes.size() != spec.states) {
            throw ValidationError(where + ": schedule has " + std::to_string(j.magnitudes.size()) +
                                  " entries, expected " + std::to_string(spec.states));
        }
        if (std::abs(j.axis.norm() - 1.0) > kUnitTolerance) {
            throw ValidationError(where + ": joint axis is not unit length");
        }
        for (double m : j.magnitudes) {
            if (!std::isfinite(m) || (j.kind == JointKind::revolute && std::abs(m) > std::numbers::pi)) {
                throw ValidationError(where + ": magnitude out of range");
            }
        }
    }
    for (std::size_t a = 0; a < spec.parts.size(); ++a) {
        for (std::size_t b = a + 1; b < spec.parts.size(); ++b) {
            if (spec.parts[a].box.interiors_overlap(spec.parts[b].box)) {
                throw ValidationError("scene spec: parts '" + spec.parts[a].name + "' and '" + spec.parts[b].name +
                                      "' overlap in state 0");
            }
        }
    }
    if (spec.straddlers.per_part > 0) {
        const int f = axis_index(spec.straddlers.front);
        const int u = axis_index(spec.straddlers.outward);
        if (f < 0 || u < 0 || f == u) {
            throw ValidationError("scene spec: straddler front/outward must be distinct coordinate axes");
        }
        if (!(spec.straddlers.length > 0.0) || !(spec.straddlers.inside_fraction > 0.0) ||
            !(spec.straddlers.inside_fraction < 1.0)) {
            throw ValidationError("scene spec: straddler length/inside_fraction out of range");
        }
    }
}

// Split `total` across weights, largest remainders first; every face keeps at
// least one sample.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights)
{
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> out(weights.size(), 1);
    std::vector<std::pair<double, std::size_t>> remainder;
    const std::size_t base = weights.size();
    const std::size_t budget = total > base ? total - base : 0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = budget * weights[i] / sum;
        const auto whole = static_cast<std::size_t>(std::floor(exact));
        out[i] += whole;
        used += whole;
        remainder.emplace_back(-(exact - whole), i);
    }
    std::sort(remainder.begin(), remainder.end());
    for (std::size_t k = 0; used < budget; ++k, ++used) {
        ++out[remainder[k % remainder.size()].second];
    }
    return out;
}

void sample_box_surface(const PartSpec& part, int label, std::mt19937_64& rng, std::vector<GaussianPrimitive>& out)
{
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    std::uniform_real_distribution<double> stretch(0.9, 1.1);
    std::uniform_real_distribution<double> tint(-0.04, 0.04);
    std::uniform_real_distribution<double> alpha(0.85, 0.98);

    const Vec3 ext = part.box.extents();
    std::vector<double> areas;
    for (int f = 0; f < 6; ++f) {
        const int a = f / 2;
        areas.push_back(ext[(a + 1) % 3] * ext[(a + 2) % 3]);
    }
    const auto counts = apportion(part.gaussians, areas);

    for (int f = 0; f < 6; ++f) {
        const int a = f / 2;
        const double sign = (f % 2 == 0) ? -1.0 : 1.0;
        const int ia = (a + 1) % 3;
        const int ib = (a + 2) % 3;
        const Vec3 normal = sign * Vec3::Unit(a);
        // (u, v, n) must be right-handed; e_ia × e_ib = e_a.
        Vec3 u = Vec3::Unit(ia);
        Vec3 v = Vec3::Unit(ib);
        int iu = ia;
        int iv = ib;
        if (sign < 0.0) {
            std::swap(u, v);
            std::swap(iu, iv);
        }
        const double eu = ext[iu];
        const double ev = ext[iv];
        const double n = static_cast<double>(counts[f]);
        const int nu = std::max(1, static_cast<int>(std::lround(std::sqrt(n * eu / ev))));
        const int nv = std::max(1, static_cast<int>(std::ceil(n / nu)));
        const double du = eu / nu;
        const double dv = ev / nv;
        const Quat q = quat_from_frame(u, v, normal);

        Vec3 origin = part.box.min_corner;
        if (sign > 0.0) {
            origin[a] = part.box.max_corner[a];
        }
        // The grid has at least counts[f] cells; keep an evenly spread subset.
        const std::size_t cells = static_cast<std::size_t>(nu) * static_cast<std::size_t>(nv);
        for (std::size_t k = 0; k < counts[f]; ++k) {
            const std::size_t c = k * cells / counts[f];
            const int i = static_cast<int>(c / static_cast<std::size_t>(nv));
            const int j = static_cast<int>(c % static_cast<std::size_t>(nv));
            {
                GaussianPrimitive g;
                g.center = origin + ((i + 0.5 + jitter(rng)) * du) * u + ((j + 0.5 + jitter(rng)) * dv) * v;
                g.orientation = q;
                g.scale = Vec3(1.2 * du * stretch(rng), 1.2 * dv * stretch(rng), 0.15 * std::min(du, dv));
                g.color = (part.color + Vec3(tint(rng), tint(rng), tint(rng))).cwiseMax(0.0).cwiseMin(1.0);
                g.opacity = alpha(rng);
                g.label = label;
                out.push_back(g);
            }
        }
    }
}

void plant_straddlers(const PartSpec& part, int label, const StraddlerPlan& plan, std::vector<GaussianPrimitive>& out,
                      GroundTruth& gt)
{
    const int fa = axis_index(plan.front);
    const int ua = axis_index(plan.outward);
    const Vec3 front = plan.front.normalized();
    const Vec3 up = plan.outward.normalized();
    const Vec3 along = front.cross(up);
    const int ea = axis_index(along);

    const double face = plan.front[fa] > 0.0 ? part.box.max_corner[fa] : part.box.min_corner[fa];
    const double edge = plan.outward[ua] > 0.0 ? part.box.max_corner[ua] : part.box.min_corner[ua];
    const double lo = part.box.min_corner[ea];
    const double hi = part.box.max_corner[ea];
    const double inset = 0.15 * (hi - lo);
    const double width = std::min(0.5 * (hi - lo - 2 * inset) / plan.per_part, 0.012);
    // (outward, along, front) is right-handed.
    const Quat q = quat_from_frame(up, along, front);

    for (std::size_t i = 0; i < plan.per_part; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(plan.per_part);
        Vec3 c = Vec3::Zero();
        c[fa] = face;
        c[ea] = lo + inset + t * (hi - lo - 2 * inset);
        c[ua] = edge;
        const Vec3 edge_point = c + 0.002 * front;
        GaussianPrimitive g;
        g.center = edge_point + ((0.5 - plan.inside_fraction) * plan.length) * up;
        g.orientation = q;
        g.scale = Vec3(plan.length, width, 0.002);
        g.color = part.color;
        g.opacity = 0.95;
        g.label = label;

        MixedTruth m;
        m.index = out.size();
        m.plane_point = edge_point;
        m.plane_normal = up;
        m.label_positive = 0;
        m.label_negative = label;
        gt.mixed.push_back(m);
        out.push_back(g);
    }
}

} // namespace

bool Box::interiors_overlap(const Box& other) const
{
    for (int a = 0; a < 3; ++a) {
        if (max_corner[a] <= other.min_corner[a] || other.max_corner[a] <= min_corner[a]) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> preset_names()
{
    return {"storage2", "storage3", "box", "eyeglasses2r", "drawer1", "static_box"};
}

SceneSpec preset(std::string_view name, std::uint64_t seed)
{
    SceneSpec spec;
    spec.seed = seed;
    spec.states = 4;

    auto body = [](Vec3 lo, Vec3 hi, Vec3 color, std::size_t n) {
        PartSpec p;
        p.name = "body";
        p.box = {lo, hi};
        p.color = color;
        p.gaussians = n;
        return p;
    };
    auto moving = [](std::string nm, Vec3 lo, Vec3 hi, JointSpec joint, Vec3 color, std::size_t n) {
        PartSpec p;
        p.name = std::move(nm);
        p.box = {lo, hi};
        p.joint = std::move(joint);
        p.color = color;
        p.gaussians = n;
        return p;
    };
    const JointSpec door{JointKind::revolute, {0.0, -0.30, 0.0}, {0.0, 0.0, -1.0}, {0.0, 30 * kDeg, 60 * kDeg, 90 * kDeg}};
    const JointSpec drawer{JointKind::prismatic, Vec3::Zero(), Vec3::UnitX(), {0.0, 0.1, 0.2, 0.3}};

    if (name == "storage2" || name == "storage3") {
        spec.parts.push_back(body({-0.30, -0.30, 0.0}, {0.0, 0.30, 0.60}, {0.55, 0.45, 0.35}, 900));
        spec.parts.push_back(
            moving("door", {0.02, -0.28, 0.05}, {0.05, -0.02, 0.55}, door, {0.20, 0.50, 0.80}, 550));
        spec.parts.push_back(
            moving("drawer", {0.02, 0.02, 0.08}, {0.14, 0.28, 0.30}, drawer, {0.80, 0.30, 0.20}, 550));
        if (name == "storage3") {
            const JointSpec side{JointKind::prismatic, Vec3::Zero(), Vec3::UnitY(), {0.0, 0.05, 0.15, 0.25}};
            spec.parts.push_back(
                moving("side_drawer", {-0.26, 0.32, 0.15}, {-0.04, 0.44, 0.45}, side, {0.30, 0.70, 0.30}, 500));
        }
    } else if (name == "box") {
        spec.parts.push_back(body({-0.20, -0.15, 0.0}, {0.20, 0.15, 0.20}, {0.60, 0.50, 0.30}, 700));
        const JointSpec lid{JointKind::revolute, {-0.24, 0.0, 0.18}, {0.0, -1.0, 0.0}, {0.0, 20 * kDeg, 45 * kDeg, 70 * kDeg}};
        spec.parts.push_back(moving("lid", {-0.20, -0.15, 0.21}, {0.20, 0.15, 0.24}, lid, {0.25, 0.45, 0.75}, 500));
    } else if (name == "eyeglasses2r") {
        spec.parts.push_back(body({-0.01, -0.15, 0.0}, {0.01, 0.15, 0.05}, {0.15, 0.15, 0.15}, 400));
        const JointSpec left{JointKind::revolute, {0.0, 0.19, 0.0}, {0.0, 0.0, 1.0}, {0.0, 30 * kDeg, 60 * kDeg, 80 * kDeg}};
        const JointSpec right{JointKind::revolute, {0.0, -0.19, 0.0}, {0.0, 0.0, -1.0}, {0.0, 10 * kDeg, 50 * kDeg, 80 * kDeg}};
        spec.parts.push_back(
            moving("left_temple", {-0.20, 0.15, 0.01}, {-0.03, 0.17, 0.04}, left, {0.70, 0.20, 0.20}, 250));
        spec.parts.push_back(
            moving("right_temple", {-0.20, -0.17, 0.01}, {-0.03, -0.15, 0.04}, right, {0.20, 0.20, 0.70}, 250));
        spec.cameras.radius = 1.0;
    } else if (name == "drawer1") {
        spec.parts.push_back(body({-0.30, -0.20, 0.0}, {0.0, 0.20, 0.40}, {0.55, 0.45, 0.35}, 400));
        spec.parts.push_back(
            moving("drawer", {0.02, -0.15, 0.10}, {0.14, 0.15, 0.30}, drawer, {0.80, 0.30, 0.20}, 300));
        spec.cameras.count = 8;
        spec.cameras.width = 96;
        spec.cameras.height = 96;
    } else if (name == "static_box") {
        spec.states = 2;
        spec.parts.push_back(body({-0.2, -0.2, 0.0}, {0.2, 0.2, 0.3}, {0.5, 0.5, 0.5}, 300));
        spec.cameras.count = 4;
        spec.cameras.width = 64;
        spec.cameras.height = 64;
    } else {
        throw ValidationError("unknown preset '" + std::string(name) + "'");
    }
    return spec;
}

CameraModel look_at(const Vec3& eye, const Vec3& target, int width, int height, double fov_deg)
{
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(Vec3::UnitZ());
    if (right.norm() < 1e-9) {
        right = forward.cross(Vec3::UnitY());
    }
    right.normalize();
    const Vec3 down = forward.cross(right);

    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = 0.5 * width / std::tan(0.5 * fov_deg * kDeg);
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.world_to_camera.rotation.row(0) = right;
    cam.world_to_camera.rotation.row(1) = down;
    cam.world_to_camera.rotation.row(2) = forward;
    cam.world_to_camera.translation = -(cam.world_to_camera.rotation * eye);
    return cam;
}

std::vector<CameraModel> ring_cameras(const CameraRing& ring, const Vec3& target, std::uint64_t seed)
{
    if (ring.count == 0 || !(ring.radius > 0.0) || ring.width <= 0 || ring.height <= 0 ||
        ring.elevation_min_deg > ring.elevation_max_deg) {
        throw ValidationError("camera ring is malformed");
    }
    std::mt19937_64 rng(seed ^ kCameraStream);
    std::uniform_real_distribution<double> elevation(ring.elevation_min_deg, ring.elevation_max_deg);
    std::vector<CameraModel> cams;
    cams.reserve(ring.count);
    for (std::size_t i = 0; i < ring.count; ++i) {
        const double az = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(ring.count);
        const double el = elevation(rng) * kDeg;
        const Vec3 eye =
            target + ring.radius * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
        cams.push_back(look_at(eye, target, ring.width, ring.height, ring.fov_deg));
    }
    return cams;
}

SceneBundle generate_scene(const SceneSpec& spec)
{
    validate_spec(spec);
    std::mt19937_64 rng(spec.seed);

    std::vector<GaussianPrimitive> rest;
    std::vector<std::size_t> part_of; // index into spec.parts for each primitive
    std::vector<int> part_label(spec.parts.size(), 0);
    GroundTruth gt;
    int next_label = 1;
    for (std::size_t p = 0; p < spec.parts.size(); ++p) {
        const auto& part = spec.parts[p];
        if (part.joint) {
            part_label[p] = next_label++;
            PartTruth truth;
            truth.label = part_label[p];
            truth.kind = part.joint->kind;
            truth.pivot = part.joint->pivot;
            truth.axis = part.joint->axis;
            truth.magnitudes = part.joint->magnitudes;
            gt.parts.push_back(truth);
        }
        sample_box_surface(part, part_label[p], rng, rest);
        part_of.resize(rest.size(), p);
    }
    if (spec.straddlers.per_part > 0) {
        for (std::size_t p = 0; p < spec.parts.size(); ++p) {
            if (spec.parts[p].joint) {
                plant_straddlers(spec.parts[p], part_label[p], spec.straddlers, rest, gt);
                part_of.resize(rest.size(), p);
            }
        }
    }
    gt.labels = labels_of(StateSnapshot{0, rest});

    SceneBundle bundle;
    bundle.states.resize(spec.states);
    for (std::size_t k = 0; k < spec.states; ++k) {
        auto& snap = bundle.states[k];
        snap.state_index = static_cast<int>(k);
        snap.primitives = rest;
        for (std::size_t i = 0; i < rest.size(); ++i) {
            const auto& part = spec.parts[part_of[i]];
            if (!part.joint) {
                continue;
            }
            const JointModel joint{part.joint->kind, part.joint->pivot, part.joint->axis, part.joint->magnitudes[k]};
            auto& g = snap.primitives[i];
            g.center = joint.transform().apply(rest[i].center);
            if (joint.kind == JointKind::revolute) {
                g.orientation = (Quat::from_axis_angle(joint.axis, joint.magnitude) * rest[i].orientation).normalized();
            }
        }
    }
    bundle.canonical = bundle.states.front();

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const auto& g : bundle.canonical.primitives) {
        lo = lo.cwiseMin(g.center);
        hi = hi.cwiseMax(g.center);
    }
    const auto cams = ring_cameras(spec.cameras, 0.5 * (lo + hi), spec.seed);
    bundle.cameras.assign(spec.states, cams);
    bundle.ground_truth = std::move(gt);
    validate(bundle);
    return bundle;
}

StateSnapshot truth_field(const SceneBundle& bundle, std::size_t state)
{
    if (!bundle.ground_truth) {
        throw ValidationError("ground_truth block is missing");
    }
    if (state >= bundle.states.size()) {
        throw ValidationError("state index out of range");
    }
    const GroundTruth& gt = *bundle.ground_truth;
    StateSnapshot out = bundle.states[state];
    assign_labels(out, gt.labels);
    std::vector<GaussianPrimitive> extra;
    for (const MixedTruth& m : gt.mixed) {
        // The cut is located in the canonical pose; the same fraction and
        // local axis apply in every state since the primitive moves rigidly.
        const GaussianPrimitive& c = bundle.canonical.primitives.at(m.index);
        int k = 0;
        c.scale.maxCoeff(&k);
        const Vec3 axis_c = c.orientation.to_matrix().col(k);
        const double sign = axis_c.dot(m.plane_normal) < 0.0 ? 1.0 : -1.0;
        const Vec3 e_c = sign * axis_c;
        const double e_n = e_c.dot(m.plane_normal);
        const double half = 0.5 * c.scale[k];
        double inside = half;
        if (std::abs(e_n) > 1e-12) {
            // Points μ + τ e lie on the negative side for τ > τ0.
            const double tau0 = -m.plane_normal.dot(c.center - m.plane_point) / e_n;
            inside = half - std::clamp(tau0, -half, half);
        }
        const double frac = inside / c.scale[k];
        if (frac <= 0.0 || frac >= 1.0) {
            out.primitives[m.index].label = frac >= 1.0 ? m.label_negative : m.label_positive;
            continue;
        }
        GaussianPrimitive& g = out.primitives[m.index];
        const Vec3 e = sign * g.orientation.to_matrix().col(k);
        GaussianPrimitive neg = g;
        GaussianPrimitive pos = g;
        neg.center = g.center + (0.5 * (1.0 - frac) * g.scale[k]) * e;
        neg.scale[k] = frac * g.scale[k];
        neg.label = m.label_negative;
        pos.center = g.center - (0.5 * frac * g.scale[k]) * e;
        pos.scale[k] = (1.0 - frac) * g.scale[k];
        pos.label = m.label_positive;
        g = neg;
        extra.push_back(pos);
    }
    out.primitives.insert(out.primitives.end(), extra.begin(), extra.end());
    return out;
}

std::vector<PartMask> ground_truth_masks(const SceneBundle& bundle, std::size_t view, const MaskOptions& opts,
                                         std::size_t state)
{
    if (!bundle.ground_truth) {
        throw ValidationError("ground_truth block is missing");
    }
    if (state >= bundle.states.size() || view >= bundle.cameras[state].size()) {
        throw ValidationError("view or state index out of range");
    }
    const StateSnapshot field = truth_field(bundle, state);
    const CameraModel& cam = bundle.cameras[state][view];
    RenderOptions ro;
    ro.raster = opts.raster;
    const RenderOutput r = render_view(field, cam, ro);
    std::vector<PartMask> out;
    for (std::size_t p = 0; p < r.part_labels.size(); ++p) {
        PartMask m;
        m.view = static_cast<int>(view);
        m.label = r.part_labels[p];
        m.mask = BinaryImage(cam.width, cam.height);
        for (std::size_t i = 0; i < r.pixel_count(); ++i) {
            const double cover = 1.0 - r.transmittance[i];
            m.mask.pixels[i] = cover > opts.coverage_threshold && r.weight_maps[p][i] > opts.part_share * cover ? 1 : 0;
        }
        out.push_back(std::move(m));
    }
    return out;
}

int truth_label(const GroundTruth& gt, std::size_t source, const Vec3& center)
{
    for (const auto& m : gt.mixed) {
        if (m.index == source) {
            return m.label_at(center);
        }
    }
    return gt.labels.at(source);
}

} // namespace artikin::synth

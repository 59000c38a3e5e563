// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/field_model.hpp"

#include "artikin/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <string>

namespace artikin {

Quat Quat::from_axis_angle(const Vec3& unit_axis, double angle)
{
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), unit_axis.x() * s, unit_axis.y() * s, unit_axis.z() * s};
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const
{
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
}

Mat3 Quat::to_matrix() const
{
    Mat3 r;
    r(0, 0) = 1.0 - 2.0 * (y * y + z * z);
    r(0, 1) = 2.0 * (x * y - w * z);
    r(0, 2) = 2.0 * (x * z + w * y);
    r(1, 0) = 2.0 * (x * y + w * z);
    r(1, 1) = 1.0 - 2.0 * (x * x + z * z);
    r(1, 2) = 2.0 * (y * z - w * x);
    r(2, 0) = 2.0 * (x * z - w * y);
    r(2, 1) = 2.0 * (y * z + w * x);
    r(2, 2) = 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Quat operator*(const Quat& a, const Quat& b)
{
    return {
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    };
}

std::string_view to_string(JointKind kind)
{
    return kind == JointKind::revolute ? "revolute" : "prismatic";
}

JointKind joint_kind_from_string(std::string_view name)
{
    if (name == "revolute") {
        return JointKind::revolute;
    }
    if (name == "prismatic") {
        return JointKind::prismatic;
    }
    throw ValidationError("unknown joint kind '" + std::string(name) + "'");
}

RigidTransform JointModel::transform() const
{
    RigidTransform t;
    if (kind == JointKind::revolute) {
        t.rotation = Eigen::AngleAxisd(magnitude, axis).toRotationMatrix();
        t.translation = pivot - t.rotation * pivot;
    } else {
        t.translation = magnitude * axis;
    }
    return t;
}

JointModel PartTruth::joint_between(std::size_t from, std::size_t to) const
{
    JointModel j;
    j.kind = kind;
    j.pivot = pivot;
    j.axis = axis;
    j.magnitude = magnitudes.at(to) - magnitudes.at(from);
    return j;
}

const PartTruth* GroundTruth::part(int label) const
{
    for (const auto& p : parts) {
        if (p.label == label) {
            return &p;
        }
    }
    return nullptr;
}

Mat3 covariance_of(const GaussianPrimitive& p)
{
    const Mat3 r = p.orientation.to_matrix();
    const Vec3 sigma = 0.5 * p.scale;
    const Mat3 m = r * sigma.asDiagonal();
    Mat3 cov = m * m.transpose();
    // exact symmetry regardless of summation order
    cov(1, 0) = cov(0, 1);
    cov(2, 0) = cov(0, 2);
    cov(2, 1) = cov(1, 2);
    return cov;
}

namespace {

std::string prefix(std::string_view where) { return std::string(where) + ": "; }

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

} // namespace

void validate(const GaussianPrimitive& p, std::string_view where)
{
    if (!p.center.allFinite()) {
        throw ValidationError(prefix(where) + "non-finite center");
    }
    if (!std::isfinite(p.orientation.norm()) ||
        std::abs(p.orientation.norm() - 1.0) > kUnitTolerance) {
        throw ValidationError(prefix(where) + "orientation quaternion is not unit length");
    }
    if (!p.scale.allFinite() || (p.scale.array() <= 0.0).any()) {
        throw ValidationError(prefix(where) + "scale components must be finite and positive");
    }
    if (!p.color.allFinite() || !(p.color.array() >= 0.0).all() || !(p.color.array() <= 1.0).all()) {
        throw ValidationError(prefix(where) + "color components must lie in [0,1]");
    }
    if (!in_unit_interval(p.opacity)) {
        throw ValidationError(prefix(where) + "opacity must lie in [0,1]");
    }
    if (p.label < 0) {
        throw ValidationError(prefix(where) + "label must be non-negative");
    }
}

void validate(const CameraModel& cam, std::string_view where)
{
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0) || !std::isfinite(cam.fx) || !std::isfinite(cam.fy)) {
        throw ValidationError(prefix(where) + "focal lengths must be positive");
    }
    if (!std::isfinite(cam.cx) || !std::isfinite(cam.cy)) {
        throw ValidationError(prefix(where) + "non-finite principal point");
    }
    if (cam.width <= 0 || cam.height <= 0) {
        throw ValidationError(prefix(where) + "image dimensions must be positive");
    }
    const Mat3& r = cam.world_to_camera.rotation;
    if (!r.allFinite() || !cam.world_to_camera.translation.allFinite()) {
        throw ValidationError(prefix(where) + "non-finite extrinsics");
    }
    if ((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > kUnitTolerance ||
        std::abs(r.determinant() - 1.0) > kUnitTolerance) {
        throw ValidationError(prefix(where) + "rotation is not a proper orthonormal matrix");
    }
}

void validate(const JointModel& joint, std::string_view where)
{
    if (!joint.axis.allFinite() || std::abs(joint.axis.norm() - 1.0) > kUnitTolerance) {
        throw ValidationError(prefix(where) + "axis is not unit length");
    }
    if (!joint.pivot.allFinite() || !std::isfinite(joint.magnitude)) {
        throw ValidationError(prefix(where) + "non-finite joint parameters");
    }
    if (joint.kind == JointKind::revolute &&
        !(joint.magnitude > -std::numbers::pi && joint.magnitude <= std::numbers::pi)) {
        throw ValidationError(prefix(where) + "revolute angle outside (-pi, pi]");
    }
}

void validate(const SceneBundle& bundle)
{
    const std::size_t k = bundle.states.size();
    if (k < 2) {
        throw ValidationError("scene needs at least 2 states, found " + std::to_string(k));
    }
    if (bundle.cameras.size() != k) {
        throw ValidationError("cameras: expected one camera list per state (" + std::to_string(k) +
                              "), found " + std::to_string(bundle.cameras.size()));
    }
    const auto& canon = bundle.canonical.primitives;
    for (std::size_t i = 0; i < canon.size(); ++i) {
        validate(canon[i], "canonical primitive " + std::to_string(i));
    }
    for (std::size_t s = 0; s < k; ++s) {
        const auto& prims = bundle.states[s].primitives;
        if (prims.size() != canon.size()) {
            throw ValidationError("state " + std::to_string(s) + ": primitive count mismatch (" +
                                  std::to_string(prims.size()) + " vs canonical " +
                                  std::to_string(canon.size()) + ")");
        }
        for (std::size_t i = 0; i < prims.size(); ++i) {
            const std::string where = "state " + std::to_string(s) + " primitive " + std::to_string(i);
            validate(prims[i], where);
            if (prims[i].color != canon[i].color || prims[i].opacity != canon[i].opacity) {
                throw ValidationError(where + ": appearance differs from canonical");
            }
        }
        if (bundle.cameras[s].empty()) {
            throw ValidationError("state " + std::to_string(s) + ": no cameras");
        }
        for (std::size_t v = 0; v < bundle.cameras[s].size(); ++v) {
            validate(bundle.cameras[s][v], "state " + std::to_string(s) + " camera " + std::to_string(v));
        }
    }
    if (bundle.ground_truth) {
        const auto& gt = *bundle.ground_truth;
        if (gt.labels.size() != canon.size()) {
            throw ValidationError("ground_truth: label count mismatch");
        }
        for (int l : gt.labels) {
            if (l < 0) {
                throw ValidationError("ground_truth: negative label");
            }
        }
        for (const auto& part : gt.parts) {
            if (part.label <= 0) {
                throw ValidationError("ground_truth: movable part labels must be positive");
            }
            if (part.magnitudes.size() != k) {
                throw ValidationError("ground_truth: part " + std::to_string(part.label) +
                                      " needs one magnitude per state");
            }
            JointModel j{part.kind, part.pivot, part.axis, 0.0};
            validate(j, "ground_truth part " + std::to_string(part.label));
        }
        for (const auto& m : gt.mixed) {
            if (m.index >= canon.size()) {
                throw ValidationError("ground_truth: mixed primitive index out of range");
            }
        }
    }
}

std::vector<int> labels_of(const StateSnapshot& snapshot)
{
    std::vector<int> out;
    out.reserve(snapshot.primitives.size());
    for (const auto& p : snapshot.primitives) {
        out.push_back(p.label);
    }
    return out;
}

void assign_labels(StateSnapshot& snapshot, const std::vector<int>& labels)
{
    if (labels.size() != snapshot.primitives.size()) {
        throw ValidationError("label count does not match primitive count");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        snapshot.primitives[i].label = labels[i];
    }
}

} // namespace artikin

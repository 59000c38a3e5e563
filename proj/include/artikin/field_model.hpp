// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace artikin {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kUnitTolerance = 1e-9;

/// Unit quaternion stored as (w, x, y, z). Rotations are active and
/// right-handed; composition is the Hamilton product.
struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quat identity() { return {}; }
    static Quat from_axis_angle(const Vec3& unit_axis, double angle);
    static Quat from_vector(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

    [[nodiscard]] Vec4 as_vector() const { return {w, x, y, z}; }
    [[nodiscard]] double norm() const;
    [[nodiscard]] Quat normalized() const;
    [[nodiscard]] Quat conjugate() const { return {w, -x, -y, -z}; }
    [[nodiscard]] Mat3 to_matrix() const;

    friend bool operator==(const Quat&, const Quat&) = default;
};

/// Hamilton product `a ⊗ b` (apply b first, then a).
Quat operator*(const Quat& a, const Quat& b);

struct GaussianPrimitive {
    Vec3 center = Vec3::Zero();
    Quat orientation;
    /// Full axis lengths; the per-axis standard deviation is scale / 2.
    Vec3 scale = Vec3::Ones();
    Vec3 color = Vec3::Zero();
    double opacity = 1.0;
    /// Part id, 0 = static.
    int label = 0;

    friend bool operator==(const GaussianPrimitive&, const GaussianPrimitive&) = default;
};

struct StateSnapshot {
    int state_index = 0;
    std::vector<GaussianPrimitive> primitives;

    friend bool operator==(const StateSnapshot&, const StateSnapshot&) = default;
};

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

struct CameraModel {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    RigidTransform world_to_camera;
    int width = 1;
    int height = 1;

    friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

enum class JointKind { revolute, prismatic };

std::string_view to_string(JointKind kind);
JointKind joint_kind_from_string(std::string_view name);

struct JointModel {
    JointKind kind = JointKind::prismatic;
    /// Point on the rotation axis; unused for prismatic joints.
    Vec3 pivot = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    /// Radians for revolute joints, scene units for prismatic joints.
    double magnitude = 0.0;

    /// Rigid motion realised by this joint at its magnitude.
    [[nodiscard]] RigidTransform transform() const;

    friend bool operator==(const JointModel&, const JointModel&) = default;
};

/// Ground-truth kinematics of one movable part: a fixed joint frame plus the
/// joint magnitude reached in every state.
struct PartTruth {
    int label = 1;
    JointKind kind = JointKind::prismatic;
    Vec3 pivot = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    std::vector<double> magnitudes;

    /// Joint carrying state `from` to state `to`.
    [[nodiscard]] JointModel joint_between(std::size_t from, std::size_t to) const;

    friend bool operator==(const PartTruth&, const PartTruth&) = default;
};

/// A primitive that physically spans two parts. Its descendants are labelled
/// by the side of `plane` their centers fall on.
struct MixedTruth {
    std::size_t index = 0;
    Vec3 plane_point = Vec3::Zero();
    Vec3 plane_normal = Vec3::UnitZ();
    int label_positive = 0;
    int label_negative = 0;

    [[nodiscard]] int label_at(const Vec3& p) const
    {
        return plane_normal.dot(p - plane_point) >= 0.0 ? label_positive : label_negative;
    }

    friend bool operator==(const MixedTruth&, const MixedTruth&) = default;
};

struct GroundTruth {
    std::vector<int> labels;
    std::vector<PartTruth> parts;
    std::vector<MixedTruth> mixed;

    [[nodiscard]] const PartTruth* part(int label) const;

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct SceneBundle {
    StateSnapshot canonical;
    std::vector<StateSnapshot> states;
    /// cameras[k] holds the views of state k.
    std::vector<std::vector<CameraModel>> cameras;
    std::optional<GroundTruth> ground_truth;

    [[nodiscard]] std::size_t state_count() const { return states.size(); }
    [[nodiscard]] std::size_t primitive_count() const { return canonical.primitives.size(); }

    friend bool operator==(const SceneBundle&, const SceneBundle&) = default;
};

/// Σ = R(q) · diag((s/2)²) · R(q)ᵀ.
Mat3 covariance_of(const GaussianPrimitive& p);

/// Throw ValidationError when an invariant does not hold. `where` prefixes
/// the message.
void validate(const GaussianPrimitive& p, std::string_view where = "primitive");
void validate(const CameraModel& cam, std::string_view where = "camera");
void validate(const JointModel& joint, std::string_view where = "joint");
void validate(const SceneBundle& bundle);

/// Labels of the canonical snapshot, in primitive order.
std::vector<int> labels_of(const StateSnapshot& snapshot);

/// Overwrite labels in place; sizes must match.
void assign_labels(StateSnapshot& snapshot, const std::vector<int>& labels);

} // namespace artikin

// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace artikin {

struct RigidAlignment {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double rmsd = 0.0;
};

/// Singular values of the 3×n raw displacement matrix, descending.
struct ResidualSpectrum {
    Vec3 singular_values = Vec3::Zero();
    /// (σ2 + σ3) / σ1; 0 when σ1 vanishes.
    double ratio = 0.0;
};

enum class PivotMethod {
    /// Minimum-norm solution of (I − R)x = t, slid along the axis to the
    /// point nearest the moving part's centroid.
    pseudoinverse,
    /// Axis line through the centroid of the static primitives nearest the
    /// moving part.
    static_centroids,
};

struct KinematicsConfig {
    double tau_rank = 0.05;
    /// Kabsch angles below this force a prismatic label (radians).
    double theta_min = 1.0 * 3.14159265358979323846 / 180.0;
    PivotMethod pivot = PivotMethod::pseudoinverse;
    /// Static primitives used by the static_centroids estimator.
    std::size_t static_neighbours = 32;
};

struct Classification {
    JointKind kind = JointKind::prismatic;
    ResidualSpectrum spectrum;
    RigidAlignment alignment;
    /// Kabsch rotation angle (radians).
    double angle = 0.0;
    /// Rank test and angle test disagree.
    bool disagreement = false;
};

/// Least-squares rigid map P → Q. Throws ValidationError on size mismatch,
/// fewer than three points or collinear P.
RigidAlignment kabsch_align(std::span<const Vec3> p, std::span<const Vec3> q);

/// Spectrum of D with columns q_i − p_i.
ResidualSpectrum residual_spectrum(std::span<const Vec3> p, std::span<const Vec3> q);

/// Rotation angle of a proper rotation, arccos argument clamped.
double rotation_angle(const Mat3& r);

Classification classify_joint(std::span<const Vec3> p, std::span<const Vec3> q, const KinematicsConfig& cfg = {});

/// Revolute joint from a rotation. `static_points` feeds the
/// static_centroids estimator and is ignored otherwise.
JointModel fit_revolute(std::span<const Vec3> p, std::span<const Vec3> q, const KinematicsConfig& cfg = {},
                        std::span<const Vec3> static_points = {});

JointModel fit_prismatic(std::span<const Vec3> p, std::span<const Vec3> q);

struct PartAnalysis {
    int label = 0;
    std::size_t support = 0;
    std::optional<JointModel> joint;
    std::optional<Classification> classification;
    /// Empty on success.
    std::string error;
    std::vector<std::string> diagnostics;
};

/// Classify and fit every nonzero label between two states. Per-part
/// failures are recorded, never thrown.
std::map<int, PartAnalysis> analyze_parts(const SceneBundle& bundle, const std::vector<int>& labels,
                                          std::size_t state_a, std::size_t state_b, const KinematicsConfig& cfg = {},
                                          unsigned threads = 1);

/// Joint report document: one entry per part with kind, axis, pivot,
/// magnitude and diagnostics.
nlohmann::json joint_report(const std::map<int, PartAnalysis>& parts, std::size_t state_a, std::size_t state_b);

/// Inverse of joint_report for the joints that were fitted.
std::map<int, JointModel> joints_from_report(const nlohmann::json& report);

std::string_view to_string(PivotMethod m);
PivotMethod pivot_method_from_string(std::string_view name);

} // namespace artikin

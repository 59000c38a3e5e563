// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/kinematics.hpp"

#include "artikin/error.hpp"
#include "artikin/parallel.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace artikin {

namespace {

void check_pairs(std::span<const Vec3> p, std::span<const Vec3> q)
{
    if (p.size() != q.size()) {
        throw ValidationError("point count mismatch: " + std::to_string(p.size()) + " vs " +
                              std::to_string(q.size()));
    }
    if (p.size() < 3) {
        throw ValidationError("insufficient support: " + std::to_string(p.size()) + " points, need 3");
    }
}

Vec3 centroid(std::span<const Vec3> pts)
{
    Vec3 c = Vec3::Zero();
    for (const auto& v : pts) {
        c += v;
    }
    return c / static_cast<double>(pts.size());
}

Vec3 vee_skew(const Mat3& r) { return {r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)}; }

} // namespace

std::string_view to_string(PivotMethod m) { return m == PivotMethod::pseudoinverse ? "pseudoinverse" : "static_centroids"; }

PivotMethod pivot_method_from_string(std::string_view name)
{
    if (name == "pseudoinverse") {
        return PivotMethod::pseudoinverse;
    }
    if (name == "static_centroids") {
        return PivotMethod::static_centroids;
    }
    throw ValidationError("unknown pivot method '" + std::string(name) + "' (pseudoinverse|static_centroids)");
}

RigidAlignment kabsch_align(std::span<const Vec3> p, std::span<const Vec3> q)
{
    check_pairs(p, q);
    const Vec3 pc = centroid(p);
    const Vec3 qc = centroid(q);

    Eigen::Matrix<double, Eigen::Dynamic, 3> centred(p.size(), 3);
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec3 a = p[i] - pc;
        centred.row(static_cast<Eigen::Index>(i)) = a.transpose();
        h += a * (q[i] - qc).transpose();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> spread(centred);
    const auto sv = spread.singularValues();
    if (!(sv[1] > 1e-12 * std::max(sv[0], 1e-300))) {
        throw ValidationError("degenerate point set: centred points have rank < 2");
    }

    const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    Mat3 fix = Mat3::Identity();
    fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    RigidAlignment out;
    out.rotation = v * fix * u.transpose();
    out.translation = qc - out.rotation * pc;
    double sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sq += (q[i] - (out.rotation * p[i] + out.translation)).squaredNorm();
    }
    out.rmsd = std::sqrt(sq / static_cast<double>(p.size()));
    return out;
}

ResidualSpectrum residual_spectrum(std::span<const Vec3> p, std::span<const Vec3> q)
{
    check_pairs(p, q);
    Eigen::Matrix<double, Eigen::Dynamic, 3> d(p.size(), 3);
    for (std::size_t i = 0; i < p.size(); ++i) {
        d.row(static_cast<Eigen::Index>(i)) = (q[i] - p[i]).transpose();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
    ResidualSpectrum out;
    out.singular_values = svd.singularValues();
    const double s1 = out.singular_values[0];
    out.ratio = s1 > 0.0 ? (out.singular_values[1] + out.singular_values[2]) / s1 : 0.0;
    return out;
}

double rotation_angle(const Mat3& r) { return std::acos(std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0)); }

Classification classify_joint(std::span<const Vec3> p, std::span<const Vec3> q, const KinematicsConfig& cfg)
{
    Classification out;
    out.spectrum = residual_spectrum(p, q);
    if (out.spectrum.singular_values[0] < 1e-9) {
        throw ValidationError("no motion between the two states");
    }
    out.alignment = kabsch_align(p, q);
    out.angle = rotation_angle(out.alignment.rotation);

    const bool rank_prismatic = out.spectrum.ratio < cfg.tau_rank;
    const bool angle_prismatic = out.angle < cfg.theta_min;
    out.kind = (rank_prismatic || angle_prismatic) ? JointKind::prismatic : JointKind::revolute;
    out.disagreement = rank_prismatic != angle_prismatic;
    return out;
}

JointModel fit_revolute(std::span<const Vec3> p, std::span<const Vec3> q, const KinematicsConfig& cfg,
                        std::span<const Vec3> static_points)
{
    const RigidAlignment a = kabsch_align(p, q);
    const double theta = rotation_angle(a.rotation);
    if (theta < cfg.theta_min) {
        throw ValidationError("rotation angle below theta_min; not a revolute motion");
    }
    const Mat3 i_minus_r = Mat3::Identity() - a.rotation;
    const Eigen::JacobiSVD<Mat3> svd(i_minus_r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 axis = svd.matrixV().col(2).normalized();
    const Vec3 skew = vee_skew(a.rotation);
    if (skew.dot(axis) < 0.0) {
        axis = -axis;
    }

    const Vec3 part_centroid = centroid(p);
    Vec3 base;
    if (cfg.pivot == PivotMethod::static_centroids && !static_points.empty()) {
        std::vector<std::pair<double, std::size_t>> nearest;
        nearest.reserve(static_points.size());
        for (std::size_t s = 0; s < static_points.size(); ++s) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& m : p) {
                best = std::min(best, (static_points[s] - m).squaredNorm());
            }
            nearest.emplace_back(best, s);
        }
        const std::size_t k = std::min(cfg.static_neighbours, nearest.size());
        std::partial_sort(nearest.begin(), nearest.begin() + static_cast<std::ptrdiff_t>(k), nearest.end());
        base = Vec3::Zero();
        for (std::size_t i = 0; i < k; ++i) {
            base += static_points[nearest[i].second];
        }
        base /= static_cast<double>(k);
    } else {
        // Minimum-norm least-squares solution; (I − R) has rank 2.
        const auto sv = svd.singularValues();
        const double cut = 1e-9 * sv[0];
        const Vec3 ut = svd.matrixU().transpose() * a.translation;
        Vec3 y = Vec3::Zero();
        for (int k = 0; k < 3; ++k) {
            if (sv[k] > cut) {
                y[k] = ut[k] / sv[k];
            }
        }
        base = svd.matrixV() * y;
    }

    JointModel j;
    j.kind = JointKind::revolute;
    j.axis = axis;
    j.pivot = base + axis * axis.dot(part_centroid - base);
    j.magnitude = theta;
    return j;
}

JointModel fit_prismatic(std::span<const Vec3> p, std::span<const Vec3> q)
{
    check_pairs(p, q);
    const Vec3 t = centroid(q) - centroid(p);
    const double d = t.norm();
    if (!(d > 1e-9)) {
        throw ValidationError("zero translation; not a prismatic motion");
    }
    JointModel j;
    j.kind = JointKind::prismatic;
    j.axis = t / d;
    j.magnitude = d;
    return j;
}

std::map<int, PartAnalysis> analyze_parts(const SceneBundle& bundle, const std::vector<int>& labels,
                                          std::size_t state_a, std::size_t state_b, const KinematicsConfig& cfg,
                                          unsigned threads)
{
    if (labels.size() != bundle.primitive_count()) {
        throw ValidationError("label count " + std::to_string(labels.size()) + " does not match primitive count " +
                              std::to_string(bundle.primitive_count()));
    }
    if (state_a >= bundle.state_count() || state_b >= bundle.state_count()) {
        throw ValidationError("state pair out of range");
    }
    const auto& sa = bundle.states[state_a].primitives;
    const auto& sb = bundle.states[state_b].primitives;

    std::vector<Vec3> static_points;
    std::map<int, PartAnalysis> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) {
            static_points.push_back(sa[i].center);
        } else {
            auto& part = out[labels[i]];
            part.label = labels[i];
            ++part.support;
        }
    }

    std::vector<PartAnalysis*> slots;
    for (auto& [label, part] : out) {
        slots.push_back(&part);
    }
    parallel_for(slots.size(), threads, [&](std::size_t s) {
        PartAnalysis& part = *slots[s];
        std::vector<Vec3> p, q;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == part.label) {
                p.push_back(sa[i].center);
                q.push_back(sb[i].center);
            }
        }
        try {
            if (state_a == state_b) {
                throw ValidationError("no motion between the two states");
            }
            const Classification c = classify_joint(p, q, cfg);
            part.classification = c;
            if (c.disagreement) {
                part.diagnostics.push_back(c.kind == JointKind::prismatic
                                               ? "rank test says revolute but rotation angle is below theta_min"
                                               : "rank test says prismatic but rotation angle exceeds theta_min");
            }
            if (c.kind == JointKind::revolute) {
                if (std::numbers::pi - c.angle < 1e-6) {
                    part.diagnostics.push_back("rotation angle is close to pi; axis sign is ambiguous");
                }
                part.joint = fit_revolute(p, q, cfg, static_points);
            } else {
                part.joint = fit_prismatic(p, q);
            }
        } catch (const std::exception& e) {
            part.error = e.what();
        }
    });
    return out;
}

nlohmann::json joint_report(const std::map<int, PartAnalysis>& parts, std::size_t state_a, std::size_t state_b)
{
    nlohmann::json doc;
    doc["format"] = "artikin-joints-v1";
    doc["state_pair"] = {state_a, state_b};
    doc["parts"] = nlohmann::json::array();
    for (const auto& [label, part] : parts) {
        nlohmann::json e;
        e["label"] = label;
        e["support"] = part.support;
        if (part.joint) {
            const auto& j = *part.joint;
            e["kind"] = std::string(to_string(j.kind));
            e["axis"] = {j.axis.x(), j.axis.y(), j.axis.z()};
            if (j.kind == JointKind::revolute) {
                e["pivot"] = {j.pivot.x(), j.pivot.y(), j.pivot.z()};
            }
            e["magnitude"] = j.magnitude;
        }
        if (part.classification) {
            const auto& c = *part.classification;
            const auto& sv = c.spectrum.singular_values;
            e["diagnostics"] = {{"rank_ratio", c.spectrum.ratio},
                                {"singular_values", {sv[0], sv[1], sv[2]}},
                                {"kabsch_angle_deg", c.angle * 180.0 / std::numbers::pi},
                                {"rmsd", c.alignment.rmsd},
                                {"disagreement", c.disagreement},
                                {"notes", part.diagnostics}};
        }
        if (!part.error.empty()) {
            e["error"] = part.error;
        }
        doc["parts"].push_back(std::move(e));
    }
    return doc;
}

std::map<int, JointModel> joints_from_report(const nlohmann::json& report)
{
    std::map<int, JointModel> out;
    try {
        for (const auto& e : report.at("parts")) {
            if (!e.contains("kind")) {
                continue;
            }
            JointModel j;
            j.kind = joint_kind_from_string(e.at("kind").get<std::string>());
            const auto a = e.at("axis").get<std::vector<double>>();
            j.axis = Vec3(a.at(0), a.at(1), a.at(2));
            if (e.contains("pivot")) {
                const auto p = e.at("pivot").get<std::vector<double>>();
                j.pivot = Vec3(p.at(0), p.at(1), p.at(2));
            }
            j.magnitude = e.at("magnitude").get<double>();
            out[e.at("label").get<int>()] = j;
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("malformed joint report: ") + ex.what());
    }
    return out;
}

} // namespace artikin

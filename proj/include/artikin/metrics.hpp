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

/// Degrees in [0, 90]; sign-agnostic. Throws ValidationError on kind mismatch.
double axis_angle_error(const JointModel& pred, const JointModel& gt);

/// Distance between the two axis lines; nullopt when either joint is
/// prismatic.
std::optional<double> axis_position_error(const JointModel& pred, const JointModel& gt);

/// Degrees for revolute, scene units for prismatic. The predicted magnitude
/// is negated when its axis points against the ground truth's.
double part_motion_error(const JointModel& pred, const JointModel& gt);

/// Static kd-tree over 3D points; leaves are scanned with the SIMD
/// nearest-distance kernel.
class PointIndex {
public:
    explicit PointIndex(std::span<const Vec3> points);

    /// Squared distance to the nearest indexed point.
    [[nodiscard]] double nearest_sq(const Vec3& q) const;
    [[nodiscard]] std::size_t size() const { return xs_.size(); }

private:
    struct Node {
        Vec3 lo;
        Vec3 hi;
        std::size_t begin = 0;
        std::size_t end = 0;
        int left = -1;
        int right = -1;
    };
    int build(std::vector<Vec3>& pts, std::size_t begin, std::size_t end);
    [[nodiscard]] double box_sq(const Node& n, const Vec3& q) const;

    std::vector<Node> nodes_;
    std::vector<double> xs_, ys_, zs_;
};

/// 10³ · ½ (mean_a min_b |a−b|² + mean_b min_a |a−b|²). Throws
/// ValidationError when either set is empty.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads = 1);

/// Minimum-cost assignment of rows to columns; result[r] is the column of
/// row r or -1 when there are more rows than columns.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct PartMetrics {
    int gt_label = 0;
    /// -1 when no predicted part was matched.
    int pred_label = -1;
    JointKind gt_kind = JointKind::prismatic;
    std::optional<JointKind> pred_kind;
    bool kind_correct = false;
    std::optional<double> axis_ang;
    std::optional<double> axis_pos;
    std::optional<double> part_motion;
    std::optional<double> cd_m;
    std::string note;
};

struct MetricsReport {
    std::size_t state_a = 0;
    std::size_t state_b = 0;
    std::vector<PartMetrics> parts;
    /// Absent when either side has no static primitives.
    std::optional<double> cd_s;
    std::optional<double> cd_w;
    /// Fraction of primitives whose matched predicted label equals the truth.
    double label_accuracy = 0.0;
    std::vector<int> unmatched_predicted;
    /// Predicted label → ground-truth label.
    std::map<int, int> matching;
};

struct EvalOptions {
    std::size_t state_a = 0;
    /// Defaults to the last state.
    std::optional<std::size_t> state_b;
    unsigned threads = 1;
};

/// Match predicted parts to ground-truth parts (Hungarian on center-set
/// Chamfer at state_a), then score joints and Chamfer. Predicted geometry at
/// state_b is the state_a field articulated by the predicted joints.
/// Throws ValidationError when the bundle has no ground truth.
MetricsReport evaluate(const SceneBundle& bundle, const std::vector<int>& labels,
                       const std::map<int, JointModel>& joints, const EvalOptions& opts = {});

/// Predicted → truth label map used by evaluate(); label 0 maps to 0.
std::map<int, int> match_labels(const std::vector<Vec3>& points, const std::vector<int>& pred,
                                const std::vector<int>& truth, unsigned threads = 1);

nlohmann::json to_json(const MetricsReport& report);
/// One header row plus one row per ground-truth part.
std::string to_csv(const MetricsReport& report);

} // namespace artikin

// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/metrics.hpp"

#include "artikin/error.hpp"
#include "artikin/parallel.hpp"
#include "artikin/simd/kernels.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

namespace artikin {

namespace {

constexpr std::size_t kLeafSize = 16;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void require_same_kind(const JointModel& pred, const JointModel& gt)
{
    if (pred.kind != gt.kind) {
        throw ValidationError("joint kind mismatch: predicted " + std::string(to_string(pred.kind)) +
                              ", ground truth " + std::string(to_string(gt.kind)));
    }
}

double mean_nearest_sq(std::span<const Vec3> from, const PointIndex& to)
{
    double sum = 0.0;
    for (const auto& p : from) {
        sum += to.nearest_sq(p);
    }
    return sum / static_cast<double>(from.size());
}

std::string fmt(std::optional<double> v)
{
    if (!v) {
        return "";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return buf;
}

nlohmann::json opt_json(std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

} // namespace

double axis_angle_error(const JointModel& pred, const JointModel& gt)
{
    require_same_kind(pred, gt);
    const double c = std::abs(pred.axis.normalized().dot(gt.axis.normalized()));
    return std::acos(std::min(c, 1.0)) * kRadToDeg;
}

std::optional<double> axis_position_error(const JointModel& pred, const JointModel& gt)
{
    if (pred.kind != JointKind::revolute || gt.kind != JointKind::revolute) {
        return std::nullopt;
    }
    const Vec3 a1 = pred.axis.normalized();
    const Vec3 a2 = gt.axis.normalized();
    const Vec3 w = gt.pivot - pred.pivot;
    const Vec3 n = a1.cross(a2);
    const double nn = n.norm();
    if (nn > 1e-12) {
        return std::abs(w.dot(n)) / nn;
    }
    return (w - a1 * a1.dot(w)).norm();
}

double part_motion_error(const JointModel& pred, const JointModel& gt)
{
    require_same_kind(pred, gt);
    const double sign = pred.axis.dot(gt.axis) < 0.0 ? -1.0 : 1.0;
    const double diff = std::abs(sign * pred.magnitude - gt.magnitude);
    return pred.kind == JointKind::revolute ? diff * kRadToDeg : diff;
}

PointIndex::PointIndex(std::span<const Vec3> points)
{
    std::vector<Vec3> pts(points.begin(), points.end());
    if (!pts.empty()) {
        nodes_.reserve(2 * pts.size() / kLeafSize + 2);
        build(pts, 0, pts.size());
    }
    xs_.reserve(pts.size());
    ys_.reserve(pts.size());
    zs_.reserve(pts.size());
    for (const auto& p : pts) {
        xs_.push_back(p.x());
        ys_.push_back(p.y());
        zs_.push_back(p.z());
    }
}

int PointIndex::build(std::vector<Vec3>& pts, std::size_t begin, std::size_t end)
{
    Node node;
    node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    node.hi = -node.lo;
    for (std::size_t i = begin; i < end; ++i) {
        node.lo = node.lo.cwiseMin(pts[i]);
        node.hi = node.hi.cwiseMax(pts[i]);
    }
    node.begin = begin;
    node.end = end;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) {
        return id;
    }
    int axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(pts.begin() + static_cast<std::ptrdiff_t>(begin), pts.begin() + static_cast<std::ptrdiff_t>(mid),
                     pts.begin() + static_cast<std::ptrdiff_t>(end),
                     [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
    const int left = build(pts, begin, mid);
    const int right = build(pts, mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

double PointIndex::box_sq(const Node& n, const Vec3& q) const
{
    const Vec3 d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
}

double PointIndex::nearest_sq(const Vec3& q) const
{
    double best = std::numeric_limits<double>::infinity();
    if (nodes_.empty()) {
        return best;
    }
    const auto& k = simd::kernels();
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
        stack.pop_back();
        if (box_sq(n, q) >= best) {
            continue;
        }
        if (n.left < 0) {
            best = std::min(best, k.min_sq_distance(xs_.data() + n.begin, ys_.data() + n.begin, zs_.data() + n.begin,
                                                    n.end - n.begin, q.x(), q.y(), q.z()));
            continue;
        }
        const double dl = box_sq(nodes_[static_cast<std::size_t>(n.left)], q);
        const double dr = box_sq(nodes_[static_cast<std::size_t>(n.right)], q);
        // Push the farther child first so the nearer one is searched first.
        if (dl <= dr) {
            stack.push_back(n.right);
            stack.push_back(n.left);
        } else {
            stack.push_back(n.left);
            stack.push_back(n.right);
        }
    }
    return best;
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads)
{
    if (a.empty() || b.empty()) {
        throw ValidationError("chamfer distance of an empty point set");
    }
    double terms[2] = {0.0, 0.0};
    parallel_for(2, threads, [&](std::size_t dir) {
        if (dir == 0) {
            terms[0] = mean_nearest_sq(a, PointIndex(b));
        } else {
            terms[1] = mean_nearest_sq(b, PointIndex(a));
        }
    });
    return 1e3 * 0.5 * (terms[0] + terms[1]);
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost)
{
    const std::size_t rows = cost.size();
    if (rows == 0) {
        return {};
    }
    const std::size_t cols = cost.front().size();
    for (const auto& r : cost) {
        if (r.size() != cols) {
            throw ValidationError("hungarian: ragged cost matrix");
        }
    }
    if (rows > cols) {
        std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                t[c][r] = cost[r][c];
            }
        }
        const auto col_to_row = hungarian(t);
        std::vector<int> out(rows, -1);
        for (std::size_t c = 0; c < cols; ++c) {
            out[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
        }
        return out;
    }

    // Shortest augmenting paths with potentials, 1-based; column 0 is a sentinel.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(cols + 1, inf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(rows, -1);
    for (std::size_t j = 1; j <= cols; ++j) {
        if (match[j] != 0) {
            out[match[j] - 1] = static_cast<int>(j - 1);
        }
    }
    return out;
}

std::map<int, int> match_labels(const std::vector<Vec3>& points, const std::vector<int>& pred,
                                const std::vector<int>& truth, unsigned threads)
{
    if (points.size() != pred.size() || pred.size() != truth.size()) {
        throw ValidationError("match_labels: size mismatch");
    }
    std::set<int> ps, ts;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] != 0) {
            ps.insert(pred[i]);
        }
        if (truth[i] != 0) {
            ts.insert(truth[i]);
        }
    }
    const std::vector<int> pl(ps.begin(), ps.end());
    const std::vector<int> tl(ts.begin(), ts.end());
    std::map<int, int> out{{0, 0}};
    if (pl.empty()) {
        return out;
    }
    if (tl.empty()) {
        for (int p : pl) {
            out[p] = -1;
        }
        return out;
    }
    auto gather = [&](const std::vector<int>& labels, int l) {
        std::vector<Vec3> pts;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == l) {
                pts.push_back(points[i]);
            }
        }
        return pts;
    };
    std::vector<std::vector<Vec3>> pc, tc;
    for (int p : pl) {
        pc.push_back(gather(pred, p));
    }
    for (int t : tl) {
        tc.push_back(gather(truth, t));
    }
    std::vector<std::vector<double>> cost(pl.size(), std::vector<double>(tl.size()));
    parallel_for(pl.size() * tl.size(), threads, [&](std::size_t k) {
        const std::size_t r = k / tl.size();
        const std::size_t c = k % tl.size();
        cost[r][c] = chamfer(pc[r], tc[c]);
    });
    const auto assign = hungarian(cost);
    for (std::size_t r = 0; r < pl.size(); ++r) {
        out[pl[r]] = assign[r] >= 0 ? tl[static_cast<std::size_t>(assign[r])] : -1;
    }
    return out;
}

MetricsReport evaluate(const SceneBundle& bundle, const std::vector<int>& labels,
                       const std::map<int, JointModel>& joints, const EvalOptions& opts)
{
    if (!bundle.ground_truth) {
        throw ValidationError("scene has no ground_truth block; evaluation needs ground-truth labels and joints");
    }
    const GroundTruth& gt = *bundle.ground_truth;
    const std::size_t n = bundle.primitive_count();
    if (labels.size() != n) {
        throw ValidationError("label count " + std::to_string(labels.size()) + " does not match primitive count " +
                              std::to_string(n));
    }
    MetricsReport report;
    report.state_a = opts.state_a;
    report.state_b = opts.state_b.value_or(bundle.state_count() - 1);
    if (report.state_a >= bundle.state_count() || report.state_b >= bundle.state_count()) {
        throw ValidationError("evaluation state pair out of range");
    }
    const auto& sa = bundle.states[report.state_a].primitives;
    const auto& sb = bundle.states[report.state_b].primitives;

    std::vector<Vec3> pa(n);
    for (std::size_t i = 0; i < n; ++i) {
        pa[i] = sa[i].center;
    }
    report.matching = match_labels(pa, labels, gt.labels, opts.threads);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        correct += report.matching.at(labels[i]) == gt.labels[i] ? 1 : 0;
    }
    report.label_accuracy = n ? static_cast<double>(correct) / static_cast<double>(n) : 1.0;

    std::map<int, int> pred_of_truth;
    for (const auto& [p, t] : report.matching) {
        if (p == 0) {
            continue;
        }
        if (t < 0) {
            report.unmatched_predicted.push_back(p);
        } else {
            pred_of_truth[t] = p;
        }
    }

    // Predicted geometry at state_b: state_a articulated by predicted joints.
    std::map<int, RigidTransform> motion;
    for (const auto& [p, j] : joints) {
        motion[p] = j.transform();
    }
    std::map<int, std::vector<Vec3>> pred_cloud, true_cloud;
    std::vector<Vec3> pred_all(n), true_all(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = labels[i] != 0 ? motion.find(labels[i]) : motion.end();
        pred_all[i] = it != motion.end() ? it->second.apply(sa[i].center) : sa[i].center;
        true_all[i] = sb[i].center;
        pred_cloud[labels[i]].push_back(pred_all[i]);
        true_cloud[gt.labels[i]].push_back(true_all[i]);
    }

    for (const auto& truth : gt.parts) {
        PartMetrics m;
        m.gt_label = truth.label;
        m.gt_kind = truth.kind;
        const JointModel gj = truth.joint_between(report.state_a, report.state_b);
        const auto pit = pred_of_truth.find(truth.label);
        if (pit == pred_of_truth.end()) {
            m.note = "no predicted part matched";
            report.parts.push_back(m);
            continue;
        }
        m.pred_label = pit->second;
        if (true_cloud.count(truth.label) && pred_cloud.count(m.pred_label)) {
            m.cd_m = chamfer(pred_cloud[m.pred_label], true_cloud[truth.label], opts.threads);
        }
        const auto jit = joints.find(m.pred_label);
        if (jit == joints.end()) {
            m.note = "no joint predicted";
        } else {
            m.pred_kind = jit->second.kind;
            m.kind_correct = jit->second.kind == gj.kind;
            if (m.kind_correct) {
                m.axis_ang = axis_angle_error(jit->second, gj);
                m.axis_pos = axis_position_error(jit->second, gj);
                m.part_motion = part_motion_error(jit->second, gj);
            } else {
                m.note = "joint kind mismatch";
            }
        }
        report.parts.push_back(m);
    }

    if (pred_cloud.count(0) && true_cloud.count(0)) {
        report.cd_s = chamfer(pred_cloud[0], true_cloud[0], opts.threads);
    }
    if (n > 0) {
        report.cd_w = chamfer(pred_all, true_all, opts.threads);
    }
    return report;
}

nlohmann::json to_json(const MetricsReport& r)
{
    nlohmann::json doc;
    doc["format"] = "artikin-report-v1";
    doc["chamfer_definition"] =
        "1e3 * 0.5 * (mean squared nearest-neighbour distance A->B + B->A) over Gaussian centers";
    doc["state_pair"] = {r.state_a, r.state_b};
    doc["label_accuracy"] = r.label_accuracy;
    doc["cd_s"] = opt_json(r.cd_s);
    doc["cd_w"] = opt_json(r.cd_w);
    doc["matching"] = nlohmann::json::array();
    for (const auto& [p, t] : r.matching) {
        doc["matching"].push_back({{"predicted", p}, {"truth", t}});
    }
    doc["unmatched_predicted"] = r.unmatched_predicted;
    bool all_kinds = !r.parts.empty();
    doc["parts"] = nlohmann::json::array();
    for (const auto& m : r.parts) {
        all_kinds = all_kinds && m.kind_correct;
        nlohmann::json e;
        e["gt_label"] = m.gt_label;
        e["pred_label"] = m.pred_label;
        e["gt_kind"] = std::string(to_string(m.gt_kind));
        e["pred_kind"] = m.pred_kind ? nlohmann::json(std::string(to_string(*m.pred_kind))) : nlohmann::json(nullptr);
        e["kind_correct"] = m.kind_correct;
        e["axis_ang_deg"] = opt_json(m.axis_ang);
        e["axis_pos"] = opt_json(m.axis_pos);
        e["part_motion"] = opt_json(m.part_motion);
        e["part_motion_unit"] = m.gt_kind == JointKind::revolute ? "deg" : "units";
        e["cd_m"] = opt_json(m.cd_m);
        if (!m.note.empty()) {
            e["note"] = m.note;
        }
        doc["parts"].push_back(std::move(e));
    }
    doc["all_kinds_correct"] = all_kinds;
    return doc;
}

std::string to_csv(const MetricsReport& r)
{
    std::string out = "gt_label,pred_label,gt_kind,pred_kind,kind_correct,axis_ang_deg,axis_pos,part_motion,cd_m,"
                      "cd_s,cd_w,label_accuracy\n";
    for (const auto& m : r.parts) {
        out += std::to_string(m.gt_label) + "," + std::to_string(m.pred_label) + "," +
               std::string(to_string(m.gt_kind)) + "," +
               (m.pred_kind ? std::string(to_string(*m.pred_kind)) : std::string()) + "," +
               (m.kind_correct ? "1" : "0") + "," + fmt(m.axis_ang) + "," + fmt(m.axis_pos) + "," +
               fmt(m.part_motion) + "," + fmt(m.cd_m) + "," + fmt(r.cd_s) + "," + fmt(r.cd_w) + "," +
               fmt(r.label_accuracy) + "\n";
    }
    return out;
}

} // namespace artikin

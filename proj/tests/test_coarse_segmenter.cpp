// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/coarse_segmenter.hpp"
#include "artikin/error.hpp"
#include "artikin/synth_oracle.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace artikin {
namespace {

/// Bundle of point-like primitives with the given per-state centers.
SceneBundle point_bundle(const std::vector<std::vector<Vec3>>& centers)
{
    SceneBundle b;
    for (std::size_t k = 0; k < centers.size(); ++k) {
        StateSnapshot s;
        s.state_index = static_cast<int>(k);
        for (const Vec3& c : centers[k]) {
            GaussianPrimitive p;
            p.center = c;
            s.primitives.push_back(p);
        }
        b.states.push_back(s);
        b.cameras.push_back({testing::simple_camera(Vec3(3, 0, 1), Vec3::Zero(), 32, 32, 30.0),
                             testing::simple_camera(Vec3(0, 3, 1), Vec3::Zero(), 32, 32, 30.0),
                             testing::simple_camera(Vec3(-3, 0, 1), Vec3::Zero(), 32, 32, 30.0)});
    }
    b.canonical = b.states.front();
    return b;
}

/// Adjusted Rand index computed from the contingency table.
double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b)
{
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    const auto c2 = [](double n) { return n * (n - 1) / 2; };
    double index = 0, sa = 0, sb = 0;
    for (const auto& [_, n] : table) {
        index += c2(n);
    }
    for (const auto& [_, n] : rows) {
        sa += c2(n);
    }
    for (const auto& [_, n] : cols) {
        sb += c2(n);
    }
    const double expected = sa * sb / c2(static_cast<double>(a.size()));
    const double top = 0.5 * (sa + sb);
    return top == expected ? 1.0 : (index - expected) / (top - expected);
}

/// Best share of agreeing labels over all relabelings of the nonzero
/// predicted labels; 0 maps to 0.
double best_permuted_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted)
{
    std::set<int> ids(truth.begin(), truth.end());
    ids.insert(predicted.begin(), predicted.end());
    ids.erase(0);
    std::vector<int> perm(ids.begin(), ids.end());
    std::vector<int> keys = perm;
    double best = 0.0;
    do {
        std::map<int, int> map{{0, 0}};
        for (std::size_t i = 0; i < keys.size(); ++i) {
            map[keys[i]] = perm[i];
        }
        std::size_t hit = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            hit += map[predicted[i]] == truth[i] ? 1 : 0;
        }
        best = std::max(best, static_cast<double>(hit) / static_cast<double>(truth.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

class CountingProvider final : public PartCountProvider {
public:
    explicit CountingProvider(std::vector<int> reply, std::size_t failures = 0)
        : reply_(std::move(reply)), failures_(failures)
    {
    }
    [[nodiscard]] std::string name() const override { return "counting"; }
    [[nodiscard]] bool needs_images() const override { return false; }
    std::vector<int> query(const ImagePair& pair) override
    {
        ++calls;
        seen.push_back(pair);
        if (failures_ > 0) {
            --failures_;
            throw RuntimeFailure("backend down");
        }
        return reply_;
    }

    std::size_t calls = 0;
    std::vector<ImagePair> seen;

private:
    std::vector<int> reply_;
    std::size_t failures_;
};

TEST(Displacement, ExampleValuesAndNormalization)
{
    const SceneBundle b = point_bundle({{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(5, 5, 5)},
                                        {Vec3(1, 0, 0), Vec3(1, 1, 1.5), Vec3(5, 5, 5)}});
    const auto stats = displacement_stats(b);
    EXPECT_DOUBLE_EQ(stats.max_displacement[0], 1.0);
    EXPECT_DOUBLE_EQ(stats.max_displacement[1], 0.5);
    EXPECT_DOUBLE_EQ(stats.max_displacement[2], 0.0);
    EXPECT_DOUBLE_EQ(stats.normalized[0], 1.0);
    EXPECT_DOUBLE_EQ(stats.normalized[1], 0.5);
    EXPECT_DOUBLE_EQ(stats.normalized[2], 0.0);
}

TEST(Displacement, MatchesBruteForceOverAllStatePairs)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<Vec3>> centers(5, std::vector<Vec3>(300));
    for (auto& state : centers) {
        for (auto& c : state) {
            c = Vec3(u(rng), u(rng), u(rng));
        }
    }
    const SceneBundle b = point_bundle(centers);
    const auto stats = displacement_stats(b, 3);
    double top = 0.0;
    std::vector<double> want(300, 0.0);
    for (std::size_t i = 0; i < 300; ++i) {
        for (std::size_t a = 0; a < 5; ++a) {
            for (std::size_t c = 0; c < 5; ++c) {
                want[i] = std::max(want[i], (centers[a][i] - centers[c][i]).norm());
            }
        }
        top = std::max(top, want[i]);
    }
    for (std::size_t i = 0; i < 300; ++i) {
        EXPECT_DOUBLE_EQ(stats.max_displacement[i], want[i]);
        EXPECT_NEAR(stats.normalized[i], want[i] / top, 1e-15);
        EXPECT_LE(stats.normalized[i], 1.0);
    }
}

TEST(Split, ThresholdExamplesAndPartition)
{
    DisplacementStats stats;
    stats.max_displacement = {1.0, 0.05, 0.049, 0.0};
    stats.normalized = {1.0, 0.05, 0.049, 0.0};
    const auto split = split_static_dynamic(stats, 0.05);
    EXPECT_EQ(split.dynamic_set, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(split.static_set, (std::vector<std::size_t>{2, 3}));
    EXPECT_THROW(split_static_dynamic(stats, 1.5), ValidationError);
    EXPECT_THROW(split_static_dynamic(stats, -0.1), ValidationError);

    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        DisplacementStats s;
        for (int i = 0; i < 200; ++i) {
            s.max_displacement.push_back(u(rng));
        }
        s.normalized = s.max_displacement;
        const auto parts = split_static_dynamic(s, u(rng));
        std::vector<std::size_t> all = parts.static_set;
        all.insert(all.end(), parts.dynamic_set.begin(), parts.dynamic_set.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> want(200);
        std::iota(want.begin(), want.end(), 0);
        EXPECT_EQ(all, want);
    }
}

TEST(Split, NothingIsDynamicWithoutMotionEvenAtZeroThreshold)
{
    DisplacementStats stats;
    stats.max_displacement = {0.0, 0.0};
    stats.normalized = {0.0, 0.0};
    EXPECT_TRUE(split_static_dynamic(stats, 0.0).dynamic_set.empty());
}

TEST(PartCount, ModeBreaksTiesTowardsSmaller)
{
    EXPECT_EQ(mode_of(std::vector<int>{2, 2, 3, 2, 2}), 2);
    EXPECT_EQ(mode_of(std::vector<int>{1, 2}), 1);
    EXPECT_EQ(mode_of(std::vector<int>{4, 3, 4, 3}), 3);
    EXPECT_THROW(mode_of(std::vector<int>{}), ValidationError);
}

TEST(PartCount, OracleCountsMovingPartsOfThreePartScene)
{
    const SceneBundle b = synth::generate_scene(synth::preset("storage3", 1));
    OracleProvider oracle(*b.ground_truth);
    const auto result = estimate_part_count(oracle, b, PartCountOptions{});
    EXPECT_EQ(result.parts, 3);
    EXPECT_EQ(result.counts.size(), 5u);
}

TEST(PartCount, PairsUseDistinctStatesAndDistinctViews)
{
    const SceneBundle b = synth::generate_scene(synth::preset("drawer1", 2));
    CountingProvider provider({1});
    PartCountOptions opts;
    opts.queries = 8;
    opts.seed = 4;
    const auto result = estimate_part_count(provider, b, opts);
    EXPECT_EQ(provider.calls, 8u);
    std::set<std::size_t> views;
    for (const auto& pair : result.pairs) {
        EXPECT_NE(pair.state_a, pair.state_b);
        EXPECT_LT(pair.state_a, b.state_count());
        EXPECT_LT(pair.state_b, b.state_count());
        views.insert(pair.view);
    }
    EXPECT_EQ(views.size(), 8u);
}

TEST(PartCount, RetriesThenGivesUp)
{
    const SceneBundle b = point_bundle({{Vec3::Zero()}, {Vec3::UnitX()}});
    PartCountOptions opts;
    opts.queries = 1;
    opts.retries = 2;
    CountingProvider flaky({2}, 2);
    EXPECT_EQ(estimate_part_count(flaky, b, opts).parts, 2);
    EXPECT_EQ(flaky.calls, 3u);
    CountingProvider dead({2}, 3);
    EXPECT_THROW(estimate_part_count(dead, b, opts), RuntimeFailure);
    CountingProvider empty({});
    EXPECT_THROW(estimate_part_count(empty, b, opts), RuntimeFailure);
    EXPECT_THROW(FixedProvider(0), ValidationError);
}

TEST(Descriptors, ThreeFourFiveExample)
{
    const SceneBundle b = point_bundle({{Vec3::Zero(), Vec3::Ones()}, {Vec3(3, 4, 0), Vec3::Ones()}});
    const std::vector<std::size_t> idx{0, 1};
    const auto d = build_descriptors(b, idx);
    ASSERT_EQ(d.size(), 2u);
    ASSERT_EQ(d[0].size(), 4);
    Eigen::Vector4d want(0.6, 0.8, 0.0, 5.0);
    // Direction is delta / (|delta| + 1e-9).
    want.head<3>() *= 5.0 / (5.0 + 1e-9);
    want /= want.norm();
    EXPECT_LT((d[0] - want).norm(), 1e-12);
    EXPECT_EQ(d[1].norm(), 0.0);
}

TEST(Descriptors, RigidMotionAtTwoAmplitudesStaysAligned)
{
    // Two points on a rotating part at radii r and 2r: directions agree and
    // the step lengths differ by a factor of two.
    std::vector<std::vector<Vec3>> centers(4);
    for (int k = 0; k < 4; ++k) {
        const Mat3 r = testing::rodrigues(Vec3::UnitZ(), 0.05 * k);
        centers[k] = {r * Vec3(0.1, 0, 0), r * Vec3(0.2, 0, 0)};
    }
    const auto d = build_descriptors(point_bundle(centers), std::vector<std::size_t>{0, 1});
    EXPECT_EQ(d[0].size(), 12);
    EXPECT_GT(d[0].dot(d[1]), 0.99);
}

TEST(KMeans, SeparatesWellSeparatedBlobs)
{
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 0.02);
    std::vector<Eigen::VectorXd> x;
    std::vector<int> truth;
    const std::vector<Eigen::Vector4d> centers{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 0, 1}};
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 80 + 20 * c; ++i) {
            Eigen::VectorXd v = centers[c];
            for (int j = 0; j < 4; ++j) {
                v[j] += n(rng);
            }
            x.push_back(v);
            truth.push_back(c);
        }
    }
    const auto labels = cluster_dynamic(x, 3, 5);
    EXPECT_DOUBLE_EQ(adjusted_rand(truth, labels), 1.0);
    EXPECT_EQ(labels.front(), 1);
    EXPECT_EQ(*std::max_element(labels.begin(), labels.end()), 3);

    // The partition does not depend on input order.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Eigen::VectorXd> shuffled;
    std::vector<int> expected;
    for (std::size_t i : order) {
        shuffled.push_back(x[i]);
        expected.push_back(labels[i]);
    }
    EXPECT_DOUBLE_EQ(adjusted_rand(expected, cluster_dynamic(shuffled, 3, 5)), 1.0);
}

TEST(KMeans, SingleClusterAndTooManyClusters)
{
    std::vector<Eigen::VectorXd> x(5, Eigen::VectorXd::Ones(4));
    EXPECT_EQ(cluster_dynamic(x, 1, 0), std::vector<int>(5, 1));
    EXPECT_THROW(cluster_dynamic(x, 6, 0), ValidationError);
    EXPECT_THROW(cluster_dynamic(x, 0, 0), ValidationError);
}

TEST(KMeans, TinyClusterIsMergedIntoNearestSurvivor)
{
    std::mt19937_64 rng(14);
    std::normal_distribution<double> n(0.0, 0.01);
    std::vector<Eigen::VectorXd> x;
    for (int i = 0; i < 150; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
        v[i < 100 ? 0 : 1] = 1.0;
        v[2] = n(rng);
        x.push_back(v);
    }
    Eigen::VectorXd stray = Eigen::VectorXd::Zero(4);
    stray[0] = 0.8;
    stray[3] = 0.6;
    x.push_back(stray);
    const auto labels = cluster_dynamic(x, 3, 7);
    EXPECT_EQ(std::set<int>(labels.begin(), labels.end()), (std::set<int>{1, 2}));
    EXPECT_EQ(labels.back(), labels.front());
}

TEST(Coarse, StaticSceneIsAllStaticWithoutQueryingTheProvider)
{
    const SceneBundle b = synth::generate_scene(synth::preset("static_box", 3));
    CountingProvider provider({1});
    const auto result = coarse_labels(b, provider, CoarseConfig{});
    EXPECT_EQ(result.labels, std::vector<int>(b.primitive_count(), 0));
    EXPECT_EQ(provider.calls, 0u);
}

TEST(Coarse, TwoPartSceneIsRecoveredUpToRelabeling)
{
    const SceneBundle b = synth::generate_scene(synth::preset("storage2", 3));
    OracleProvider oracle(*b.ground_truth);
    const auto result = coarse_labels(b, oracle, CoarseConfig{});
    EXPECT_EQ(result.estimated_parts, 2);
    EXPECT_GE(best_permuted_accuracy(b.ground_truth->labels, result.labels), 0.99);
}

TEST(Coarse, TwoStateBundleUsesFourDimensionalDescriptors)
{
    SceneBundle b = synth::generate_scene(synth::preset("storage2", 4));
    b.states.resize(2);
    b.cameras.resize(2);
    for (auto& part : b.ground_truth->parts) {
        part.magnitudes.resize(2);
    }
    EXPECT_EQ(build_descriptors(b, std::vector<std::size_t>{0}).front().size(), 4);
    OracleProvider oracle(*b.ground_truth);
    const auto result = coarse_labels(b, oracle, CoarseConfig{});
    EXPECT_EQ(result.estimated_parts, 2);
    EXPECT_GE(best_permuted_accuracy(b.ground_truth->labels, result.labels), 0.99);
}

} // namespace
} // namespace artikin

// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace artikin {

struct DisplacementStats {
    /// d_i: largest center distance over all state pairs.
    std::vector<double> max_displacement;
    /// d_i / max_r d_r, or 0 everywhere when nothing moves.
    std::vector<double> normalized;
};

DisplacementStats displacement_stats(const SceneBundle& bundle, unsigned threads = 1);

struct MotionSplit {
    std::vector<std::size_t> static_set;
    std::vector<std::size_t> dynamic_set;
};

/// Dynamic iff d̂_i ≥ tau_mot, except that nothing is dynamic when no
/// primitive moves at all.
MotionSplit split_static_dynamic(const DisplacementStats& stats, double tau_mot);

/// Two renders of the same view in different states.
struct ImagePair {
    std::size_t state_a = 0;
    std::size_t state_b = 0;
    std::size_t view = 0;
    int width = 0;
    int height = 0;
    /// Interleaved RGB in [0,1]; empty when the provider does not need pixels.
    std::vector<double> rgb_a;
    std::vector<double> rgb_b;
};

class PartCountProvider {
public:
    virtual ~PartCountProvider() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    /// False lets callers skip rendering.
    [[nodiscard]] virtual bool needs_images() const { return true; }
    /// One or more counts for one image pair. Throws RuntimeFailure on
    /// backend errors.
    virtual std::vector<int> query(const ImagePair& pair) = 0;
};

/// Counts the ground-truth parts whose joint magnitude differs between the
/// two states.
class OracleProvider final : public PartCountProvider {
public:
    explicit OracleProvider(GroundTruth truth) : truth_(std::move(truth)) {}
    [[nodiscard]] std::string name() const override { return "oracle"; }
    [[nodiscard]] bool needs_images() const override { return false; }
    std::vector<int> query(const ImagePair& pair) override;

private:
    GroundTruth truth_;
};

class FixedProvider final : public PartCountProvider {
public:
    explicit FixedProvider(int count);
    [[nodiscard]] std::string name() const override { return "fixed"; }
    [[nodiscard]] bool needs_images() const override { return false; }
    std::vector<int> query(const ImagePair&) override { return {count_}; }

private:
    int count_;
};

/// Most frequent value; ties go to the smaller value. Throws ValidationError
/// on an empty list.
int mode_of(std::span<const int> counts);

struct PartCountOptions {
    std::size_t queries = 5;
    std::size_t retries = 2;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct PartCountResult {
    int parts = 0;
    std::vector<int> counts;
    std::vector<ImagePair> pairs;
};

/// Query the provider once per sampled (state pair, view) and take the mode.
PartCountResult estimate_part_count(PartCountProvider& provider, const SceneBundle& bundle,
                                    const PartCountOptions& opts);

/// Normalized 4(K−1) trajectory descriptors of the listed primitives, in
/// list order.
std::vector<Eigen::VectorXd> build_descriptors(const SceneBundle& bundle, std::span<const std::size_t> indices);

struct KMeansOptions {
    std::size_t restarts = 8;
    std::size_t max_iterations = 300;
    double tolerance = 1e-8;
    /// Clusters smaller than this share of the points are dissolved.
    double min_fraction = 0.02;
};

/// Labels 1..n_surviving in the input order, numbered by first occurrence.
std::vector<int> cluster_dynamic(std::span<const Eigen::VectorXd> descriptors, int n_parts, std::uint64_t seed,
                                 const KMeansOptions& opts = {});

struct CoarseConfig {
    double tau_mot = 0.05;
    PartCountOptions count;
    KMeansOptions kmeans;
};

struct CoarseResult {
    std::vector<int> labels;
    DisplacementStats stats;
    MotionSplit split;
    int estimated_parts = 0;
    std::vector<int> provider_counts;
};

/// Full coarse stage; labels are 0 for static primitives.
CoarseResult coarse_labels(const SceneBundle& bundle, PartCountProvider& provider, const CoarseConfig& cfg);

} // namespace artikin

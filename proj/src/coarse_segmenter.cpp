// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/coarse_segmenter.hpp"

#include "artikin/error.hpp"
#include "artikin/parallel.hpp"
#include "artikin/splatter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace artikin {

namespace {

constexpr double kDirectionEps = 1e-9;

struct KMeansRun {
    std::vector<Eigen::VectorXd> centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
};

int nearest_centroid(const Eigen::VectorXd& x, const std::vector<Eigen::VectorXd>& centroids,
                     const std::vector<char>* alive = nullptr)
{
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (alive && !(*alive)[c]) {
            continue;
        }
        const double d = (x - centroids[c]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

std::vector<Eigen::VectorXd> seed_plus_plus(const std::vector<Eigen::VectorXd>& x, int k, std::mt19937_64& rng)
{
    std::vector<Eigen::VectorXd> centroids;
    std::uniform_int_distribution<std::size_t> first(0, x.size() - 1);
    centroids.push_back(x[first(rng)]);
    std::vector<double> d2(x.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d2[i] = std::min(d2[i], (x[i] - centroids.back()).squaredNorm());
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            pick = x.size() - 1;
            for (std::size_t i = 0; i < x.size(); ++i) {
                acc += d2[i];
                if (acc > r && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        centroids.push_back(x[pick]);
    }
    return centroids;
}

KMeansRun lloyd(const std::vector<Eigen::VectorXd>& x, std::vector<Eigen::VectorXd> centroids,
                const KMeansOptions& opts)
{
    KMeansRun run;
    run.assignment.assign(x.size(), 0);
    const Eigen::Index dim = x.front().size();
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            run.assignment[i] = nearest_centroid(x[i], centroids);
        }
        std::vector<Eigen::VectorXd> sums(centroids.size(), Eigen::VectorXd::Zero(dim));
        std::vector<std::size_t> counts(centroids.size(), 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            sums[static_cast<std::size_t>(run.assignment[i])] += x[i];
            ++counts[static_cast<std::size_t>(run.assignment[i])];
        }
        double moved = 0.0;
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            if (counts[c] == 0) {
                continue; // empty cluster keeps its centroid
            }
            const Eigen::VectorXd next = sums[c] / static_cast<double>(counts[c]);
            moved = std::max(moved, (next - centroids[c]).norm());
            centroids[c] = next;
        }
        if (moved < opts.tolerance) {
            break;
        }
    }
    run.inertia = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        run.assignment[i] = nearest_centroid(x[i], centroids);
        run.inertia += (x[i] - centroids[static_cast<std::size_t>(run.assignment[i])]).squaredNorm();
    }
    run.centroids = std::move(centroids);
    return run;
}

} // namespace

DisplacementStats displacement_stats(const SceneBundle& bundle, unsigned threads)
{
    const std::size_t n = bundle.primitive_count();
    const std::size_t k = bundle.state_count();
    DisplacementStats out;
    out.max_displacement.assign(n, 0.0);
    out.normalized.assign(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        double best = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a + 1; b < k; ++b) {
                best = std::max(best, (bundle.states[a].primitives[i].center - bundle.states[b].primitives[i].center).norm());
            }
        }
        out.max_displacement[i] = best;
    });
    const double top = n ? *std::max_element(out.max_displacement.begin(), out.max_displacement.end()) : 0.0;
    if (top > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            out.normalized[i] = out.max_displacement[i] / top;
        }
    }
    return out;
}

MotionSplit split_static_dynamic(const DisplacementStats& stats, double tau_mot)
{
    if (!(tau_mot >= 0.0 && tau_mot <= 1.0)) {
        throw ValidationError("tau_mot must lie in [0, 1]");
    }
    const bool any_motion =
        std::any_of(stats.max_displacement.begin(), stats.max_displacement.end(), [](double d) { return d > 0.0; });
    MotionSplit out;
    for (std::size_t i = 0; i < stats.normalized.size(); ++i) {
        if (any_motion && stats.normalized[i] >= tau_mot) {
            out.dynamic_set.push_back(i);
        } else {
            out.static_set.push_back(i);
        }
    }
    return out;
}

std::vector<int> OracleProvider::query(const ImagePair& pair)
{
    int moved = 0;
    for (const auto& p : truth_.parts) {
        if (pair.state_a >= p.magnitudes.size() || pair.state_b >= p.magnitudes.size()) {
            throw ValidationError("oracle provider: state index out of range");
        }
        moved += p.magnitudes[pair.state_a] != p.magnitudes[pair.state_b] ? 1 : 0;
    }
    return {moved};
}

FixedProvider::FixedProvider(int count) : count_(count)
{
    if (count < 1) {
        throw ValidationError("fixed part count must be at least 1");
    }
}

int mode_of(std::span<const int> counts)
{
    if (counts.empty()) {
        throw ValidationError("no part counts to take the mode of");
    }
    std::map<int, std::size_t> freq;
    for (int c : counts) {
        ++freq[c];
    }
    int best = freq.begin()->first;
    std::size_t best_n = 0;
    for (const auto& [value, n] : freq) { // ascending, so ties keep the smaller value
        if (n > best_n) {
            best = value;
            best_n = n;
        }
    }
    return best;
}

PartCountResult estimate_part_count(PartCountProvider& provider, const SceneBundle& bundle,
                                    const PartCountOptions& opts)
{
    if (opts.queries < 1) {
        throw ValidationError("part-count queries (M) must be at least 1");
    }
    const std::size_t k = bundle.state_count();
    if (k < 2) {
        throw ValidationError("part-count estimation needs at least two states");
    }
    const std::size_t views = bundle.cameras.front().size();

    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> view_order(views);
    std::iota(view_order.begin(), view_order.end(), 0);
    std::shuffle(view_order.begin(), view_order.end(), rng);

    PartCountResult out;
    std::uniform_int_distribution<std::size_t> pick_state(0, k - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, k - 2);
    for (std::size_t i = 0; i < opts.queries; ++i) {
        ImagePair pair;
        pair.state_a = pick_state(rng);
        pair.state_b = pick_other(rng);
        if (pair.state_b >= pair.state_a) {
            ++pair.state_b;
        }
        pair.view = view_order[i % views];
        out.pairs.push_back(pair);
    }

    if (provider.needs_images()) {
        RenderOptions ro;
        ro.threads = opts.threads;
        for (auto& pair : out.pairs) {
            const auto ra = render_view(bundle.states[pair.state_a], bundle.cameras[pair.state_a][pair.view], ro);
            const auto rb = render_view(bundle.states[pair.state_b], bundle.cameras[pair.state_b][pair.view], ro);
            pair.width = ra.width;
            pair.height = ra.height;
            pair.rgb_a = ra.color;
            pair.rgb_b = rb.color;
        }
    }

    for (const auto& pair : out.pairs) {
        for (std::size_t attempt = 0;; ++attempt) {
            try {
                const auto counts = provider.query(pair);
                if (counts.empty()) {
                    throw RuntimeFailure("provider '" + provider.name() + "' returned no count");
                }
                out.counts.insert(out.counts.end(), counts.begin(), counts.end());
                break;
            } catch (const RuntimeFailure&) {
                if (attempt >= opts.retries) {
                    throw;
                }
            }
        }
    }
    out.parts = mode_of(out.counts);
    return out;
}

std::vector<Eigen::VectorXd> build_descriptors(const SceneBundle& bundle, std::span<const std::size_t> indices)
{
    const std::size_t k = bundle.state_count();
    if (k < 2) {
        throw ValidationError("descriptors need at least two states");
    }
    std::vector<Eigen::VectorXd> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        Eigen::VectorXd f(4 * static_cast<Eigen::Index>(k - 1));
        for (std::size_t s = 0; s + 1 < k; ++s) {
            const Vec3 delta = bundle.states[s + 1].primitives[i].center - bundle.states[s].primitives[i].center;
            const double len = delta.norm();
            const auto o = static_cast<Eigen::Index>(4 * s);
            f.segment<3>(o) = delta / (len + kDirectionEps);
            f[o + 3] = len;
        }
        const double norm = f.norm();
        if (norm > 0.0) {
            f /= norm;
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<int> cluster_dynamic(std::span<const Eigen::VectorXd> descriptors, int n_parts, std::uint64_t seed,
                                 const KMeansOptions& opts)
{
    const std::size_t n = descriptors.size();
    if (n_parts < 1) {
        throw ValidationError("n_parts must be at least 1");
    }
    if (static_cast<std::size_t>(n_parts) > n) {
        throw ValidationError("n_parts (" + std::to_string(n_parts) + ") exceeds the number of descriptors (" +
                              std::to_string(n) + ")");
    }
    // Lexicographic order makes the partition independent of input order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = descriptors[a];
        const auto& y = descriptors[b];
        return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
    });
    std::vector<Eigen::VectorXd> x;
    x.reserve(n);
    for (std::size_t i : order) {
        x.push_back(descriptors[i]);
    }

    std::mt19937_64 rng(seed);
    KMeansRun best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(1, opts.restarts); ++r) {
        KMeansRun run = lloyd(x, seed_plus_plus(x, n_parts, rng), opts);
        if (run.inertia < best.inertia) {
            best = std::move(run);
        }
    }

    std::vector<std::size_t> sizes(best.centroids.size(), 0);
    for (int a : best.assignment) {
        ++sizes[static_cast<std::size_t>(a)];
    }
    std::vector<char> alive(sizes.size(), 0);
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        alive[c] = static_cast<double>(sizes[c]) >= opts.min_fraction * static_cast<double>(n) ? 1 : 0;
    }
    if (std::none_of(alive.begin(), alive.end(), [](char a) { return a != 0; })) {
        alive[static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin())] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!alive[static_cast<std::size_t>(best.assignment[i])]) {
            best.assignment[i] = nearest_centroid(x[i], best.centroids, &alive);
        }
    }

    std::vector<int> raw(n);
    for (std::size_t j = 0; j < n; ++j) {
        raw[order[j]] = best.assignment[j];
    }
    std::map<int, int> dense;
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [it, inserted] = dense.try_emplace(raw[i], static_cast<int>(dense.size()) + 1);
        out[i] = it->second;
    }
    return out;
}

CoarseResult coarse_labels(const SceneBundle& bundle, PartCountProvider& provider, const CoarseConfig& cfg)
{
    CoarseResult out;
    out.labels.assign(bundle.primitive_count(), 0);
    out.stats = displacement_stats(bundle, cfg.count.threads);
    out.split = split_static_dynamic(out.stats, cfg.tau_mot);
    if (out.split.dynamic_set.empty()) {
        return out;
    }
    const auto estimate = estimate_part_count(provider, bundle, cfg.count);
    out.estimated_parts = estimate.parts;
    out.provider_counts = estimate.counts;
    const int k = std::min<int>(std::max(1, estimate.parts), static_cast<int>(out.split.dynamic_set.size()));
    const auto descriptors = build_descriptors(bundle, out.split.dynamic_set);
    const auto labels = cluster_dynamic(descriptors, k, cfg.count.seed, cfg.kmeans);
    for (std::size_t j = 0; j < labels.size(); ++j) {
        out.labels[out.split.dynamic_set[j]] = labels[j];
    }
    return out;
}

} // namespace artikin

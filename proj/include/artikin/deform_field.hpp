// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/field_model.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace artikin {

inline constexpr double kScaleFloor = 1e-6;
/// Per-primitive input width without the latent: μ (3), q (4), s (3).
inline constexpr int kPrimitiveFeatures = 10;
inline constexpr int kOffsetOutputs = 10;

struct LatentCode {
    Eigen::VectorXd values;

    friend bool operator==(const LatentCode& a, const LatentCode& b) { return a.values == b.values; }
};

/// Fully connected tanh network: (10 + D) → hidden × layers → 10.
struct DeformNet {
    int latent_dim = 8;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    /// Xavier-uniform hidden layers, output weights scaled by
    /// `output_scale`, output bias (0,0,0, 1,0,0,0, 0,0,0).
    static DeformNet create(int latent_dim, int hidden, int hidden_layers, std::uint64_t seed,
                            double output_scale = 1e-2);

    [[nodiscard]] std::size_t parameter_count() const;
    /// Layer by layer: weights row-major, then bias.
    [[nodiscard]] Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);
    [[nodiscard]] int input_dim() const { return kPrimitiveFeatures + latent_dim; }

    friend bool operator==(const DeformNet& a, const DeformNet& b);
};

struct Offsets {
    Vec3 d_mu = Vec3::Zero();
    Vec4 d_q = Vec4(1.0, 0.0, 0.0, 0.0);
    Vec3 d_s = Vec3::Zero();
};

/// μ' = μ + Δμ, q' = normalize(Δq) ⊗ q, s' = max(s + Δs, s_min).
/// Throws ValidationError when |Δq| ≤ 1e-12.
GaussianPrimitive apply_offsets(const GaussianPrimitive& p, const Vec3& d_mu, const Vec4& d_q, const Vec3& d_s,
                                double s_min = kScaleFloor);

Offsets forward(const DeformNet& net, const GaussianPrimitive& p, const LatentCode& latent);

/// Input matrix with one column per primitive.
Eigen::MatrixXd network_inputs(std::span<const GaussianPrimitive> prims, const LatentCode& latent);

struct Activations {
    Eigen::MatrixXd input;
    /// Post-tanh outputs of every hidden layer.
    std::vector<Eigen::MatrixXd> hidden;
    Eigen::MatrixXd output;
};

Activations run_network(const DeformNet& net, const Eigen::MatrixXd& input);

struct NetGradient {
    /// Same layout as DeformNet::parameters().
    Eigen::VectorXd parameters;
    /// Gradient with respect to the input matrix.
    Eigen::MatrixXd input;
};

/// Reverse pass for an output cotangent `d_output` (10 × N).
NetGradient backprop(const DeformNet& net, const Activations& acts, const Eigen::MatrixXd& d_output);

struct LossWeights {
    double lambda_q = 0.1;
    double lambda_s = 0.1;
    double s_min = kScaleFloor;
};

struct LossGradient {
    Eigen::VectorXd parameters;
    std::vector<Eigen::VectorXd> latents;
};

/// Mean over states and primitives of
/// |μ' − μ|² + λ_q (1 − ⟨q', q⟩²) + λ_s |s' − s|².
double deform_loss(const DeformNet& net, std::span<const LatentCode> latents, const SceneBundle& bundle,
                   const LossWeights& weights = {}, LossGradient* grad = nullptr);

enum class Optimizer { gradient_descent, adam };

std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view name);

struct FitConfig {
    std::size_t epochs = 500;
    double learning_rate = 1e-2;
    int latent_dim = 8;
    int hidden = 64;
    int hidden_layers = 3;
    std::uint64_t seed = 0;
    double latent_sigma = 0.1;
    Optimizer optimizer = Optimizer::adam;
    LossWeights loss;
};

struct FitResult {
    DeformNet net;
    std::vector<LatentCode> latents;
    double final_loss = 0.0;
    std::vector<double> loss_history;
};

/// Throws ValidationError for K < 2 and RuntimeFailure on a non-finite loss.
FitResult fit(const SceneBundle& bundle, const FitConfig& cfg);

/// Deform `canonical` with the latent (1 − t)α_a + t α_b. With a filter,
/// primitives outside it receive the α_a deformation.
StateSnapshot interpolate(const DeformNet& net, const LatentCode& a, const LatentCode& b, double t,
                          const StateSnapshot& canonical, const std::optional<std::set<int>>& part_filter = {});

/// Deform every primitive with one latent.
StateSnapshot deform(const DeformNet& net, const LatentCode& latent, const StateSnapshot& canonical);

nlohmann::json checkpoint_to_json(const FitResult& fit, const FitConfig& cfg);
FitResult checkpoint_from_json(const nlohmann::json& doc, FitConfig* cfg = nullptr);
void save_checkpoint(const FitResult& fit, const FitConfig& cfg, const std::filesystem::path& path);
FitResult load_checkpoint(const std::filesystem::path& path, FitConfig* cfg = nullptr);

} // namespace artikin

// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/deform_field.hpp"

#include "artikin/error.hpp"
#include "artikin/scene_io.hpp"

#include <cmath>
#include <random>

namespace artikin {

namespace {

constexpr const char* kCheckpointFormat = "artikin-deform-v1";

// M such that a ⊗ b = M(b) · a.
Eigen::Matrix4d right_product_matrix(const Quat& b)
{
    Eigen::Matrix4d m;
    m << b.w, -b.x, -b.y, -b.z, //
        b.x, b.w, b.z, -b.y,    //
        b.y, -b.z, b.w, b.x,    //
        b.z, b.y, -b.x, b.w;
    return m;
}

void check_latent(const DeformNet& net, const LatentCode& latent)
{
    if (latent.values.size() != net.latent_dim) {
        throw ValidationError("latent has " + std::to_string(latent.values.size()) + " entries, network expects " +
                              std::to_string(net.latent_dim));
    }
    if (!latent.values.allFinite()) {
        throw ValidationError("latent code has non-finite entries");
    }
}

GaussianPrimitive apply_column(const GaussianPrimitive& p, const Eigen::Ref<const Eigen::VectorXd>& y, double s_min)
{
    return apply_offsets(p, y.segment<3>(0), y.segment<4>(3), y.segment<3>(7), s_min);
}

} // namespace

bool operator==(const DeformNet& a, const DeformNet& b)
{
    if (a.latent_dim != b.latent_dim || a.weights.size() != b.weights.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols() ||
            a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) {
            return false;
        }
    }
    return true;
}

DeformNet DeformNet::create(int latent_dim, int hidden, int hidden_layers, std::uint64_t seed, double output_scale)
{
    if (latent_dim < 1 || hidden < 1 || hidden_layers < 1) {
        throw ValidationError("network dimensions must be positive");
    }
    DeformNet net;
    net.latent_dim = latent_dim;
    std::mt19937_64 rng(seed);
    int fan_in = kPrimitiveFeatures + latent_dim;
    for (int l = 0; l <= hidden_layers; ++l) {
        const bool last = l == hidden_layers;
        const int fan_out = last ? kOffsetOutputs : hidden;
        const double bound = std::sqrt(6.0 / (fan_in + fan_out)) * (last ? output_scale : 1.0);
        std::uniform_real_distribution<double> u(-bound, bound);
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = u(rng);
            }
        }
        Eigen::VectorXd b = Eigen::VectorXd::Zero(fan_out);
        if (last) {
            b[3] = 1.0;
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
        fan_in = fan_out;
    }
    return net;
}

std::size_t DeformNet::parameter_count() const
{
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

Eigen::VectorXd DeformNet::parameters() const
{
    Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
            theta.segment(o, weights[l].cols()) = weights[l].row(r).transpose();
            o += weights[l].cols();
        }
        theta.segment(o, biases[l].size()) = biases[l];
        o += biases[l].size();
    }
    return theta;
}

void DeformNet::set_parameters(const Eigen::VectorXd& theta)
{
    if (static_cast<std::size_t>(theta.size()) != parameter_count()) {
        throw ValidationError("parameter vector has the wrong length");
    }
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
            weights[l].row(r) = theta.segment(o, weights[l].cols()).transpose();
            o += weights[l].cols();
        }
        biases[l] = theta.segment(o, biases[l].size());
        o += biases[l].size();
    }
}

GaussianPrimitive apply_offsets(const GaussianPrimitive& p, const Vec3& d_mu, const Vec4& d_q, const Vec3& d_s,
                                double s_min)
{
    const double n = d_q.norm();
    if (!(n > 1e-12)) {
        throw ValidationError("rotation offset has (near) zero norm");
    }
    GaussianPrimitive out = p;
    out.center = p.center + d_mu;
    out.orientation = (Quat::from_vector(d_q / n) * p.orientation).normalized();
    out.scale = (p.scale + d_s).cwiseMax(s_min);
    return out;
}

Eigen::MatrixXd network_inputs(std::span<const GaussianPrimitive> prims, const LatentCode& latent)
{
    const auto d = latent.values.size();
    Eigen::MatrixXd x(kPrimitiveFeatures + d, static_cast<Eigen::Index>(prims.size()));
    for (std::size_t i = 0; i < prims.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        const auto& p = prims[i];
        x.block<3, 1>(0, c) = p.center;
        x.block<4, 1>(3, c) = p.orientation.as_vector();
        x.block<3, 1>(7, c) = p.scale;
        x.block(kPrimitiveFeatures, c, d, 1) = latent.values;
    }
    return x;
}

Activations run_network(const DeformNet& net, const Eigen::MatrixXd& input)
{
    if (input.rows() != net.input_dim()) {
        throw ValidationError("network input has the wrong width");
    }
    Activations acts;
    acts.input = input;
    const Eigen::MatrixXd* prev = &acts.input;
    const std::size_t last = net.weights.size() - 1;
    acts.hidden.reserve(last);
    for (std::size_t l = 0; l < last; ++l) {
        Eigen::MatrixXd z = net.weights[l] * *prev;
        z.colwise() += net.biases[l];
        // tanh via the vectorized exp: 1 − 2 / (e^{2z} + 1).
        acts.hidden.push_back((1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix());
        prev = &acts.hidden.back();
    }
    acts.output = net.weights[last] * *prev;
    acts.output.colwise() += net.biases[last];
    return acts;
}

NetGradient backprop(const DeformNet& net, const Activations& acts, const Eigen::MatrixXd& d_output)
{
    const std::size_t layers = net.weights.size();
    std::vector<Eigen::MatrixXd> dw(layers);
    std::vector<Eigen::VectorXd> db(layers);
    Eigen::MatrixXd delta = d_output;
    for (std::size_t l = layers; l-- > 0;) {
        const Eigen::MatrixXd& in = l == 0 ? acts.input : acts.hidden[l - 1];
        dw[l] = delta * in.transpose();
        db[l] = delta.rowwise().sum();
        Eigen::MatrixXd d_in = net.weights[l].transpose() * delta;
        if (l > 0) {
            d_in.array() *= 1.0 - acts.hidden[l - 1].array().square();
        }
        delta = std::move(d_in);
    }
    NetGradient g;
    g.input = std::move(delta);
    g.parameters.resize(static_cast<Eigen::Index>(net.parameter_count()));
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        for (Eigen::Index r = 0; r < dw[l].rows(); ++r) {
            g.parameters.segment(o, dw[l].cols()) = dw[l].row(r).transpose();
            o += dw[l].cols();
        }
        g.parameters.segment(o, db[l].size()) = db[l];
        o += db[l].size();
    }
    return g;
}

Offsets forward(const DeformNet& net, const GaussianPrimitive& p, const LatentCode& latent)
{
    check_latent(net, latent);
    const auto acts = run_network(net, network_inputs(std::span(&p, 1), latent));
    Offsets o;
    o.d_mu = acts.output.block<3, 1>(0, 0);
    o.d_q = acts.output.block<4, 1>(3, 0);
    o.d_s = acts.output.block<3, 1>(7, 0);
    return o;
}

double deform_loss(const DeformNet& net, std::span<const LatentCode> latents, const SceneBundle& bundle,
                   const LossWeights& w, LossGradient* grad)
{
    const std::size_t k = bundle.state_count();
    const std::size_t n = bundle.primitive_count();
    if (latents.size() != k) {
        throw ValidationError("need one latent per state");
    }
    const double norm = 1.0 / static_cast<double>(k * n);
    const auto& canon = bundle.canonical.primitives;
    std::vector<Eigen::Matrix4d> right(n);
    for (std::size_t i = 0; i < n; ++i) {
        right[i] = right_product_matrix(canon[i].orientation);
    }
    if (grad) {
        grad->parameters = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
        grad->latents.assign(k, Eigen::VectorXd::Zero(net.latent_dim));
    }

    double total = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
        check_latent(net, latents[s]);
        const auto& target = bundle.states[s].primitives;
        const Activations acts = run_network(net, network_inputs(canon, latents[s]));
        Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(kOffsetOutputs, static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            const Vec3 mu = canon[i].center + acts.output.block<3, 1>(0, c);
            const Vec4 raw = acts.output.block<4, 1>(3, c);
            const double rn = raw.norm();
            if (!(rn > 1e-12)) {
                throw RuntimeFailure("rotation offset collapsed to zero during fitting");
            }
            const Vec4 unit = raw / rn;
            const Vec4 q = right[i] * unit;
            const Vec3 s_raw = canon[i].scale + acts.output.block<3, 1>(7, c);
            const Vec3 scale = s_raw.cwiseMax(w.s_min);

            const Vec3 e_mu = mu - target[i].center;
            const Vec4 qt = target[i].orientation.as_vector();
            const double dot = q.dot(qt);
            const Vec3 e_s = scale - target[i].scale;
            total += e_mu.squaredNorm() + w.lambda_q * (1.0 - dot * dot) + w.lambda_s * e_s.squaredNorm();

            if (grad) {
                dy.block<3, 1>(0, c) = 2.0 * norm * e_mu;
                const Vec4 d_q = -2.0 * w.lambda_q * norm * dot * qt;
                const Vec4 d_unit = right[i].transpose() * d_q;
                dy.block<4, 1>(3, c) = (d_unit - unit * unit.dot(d_unit)) / rn;
                for (int a = 0; a < 3; ++a) {
                    dy(7 + a, c) = s_raw[a] > w.s_min ? 2.0 * w.lambda_s * norm * e_s[a] : 0.0;
                }
            }
        }
        if (grad) {
            const NetGradient g = backprop(net, acts, dy);
            grad->parameters += g.parameters;
            grad->latents[s] = g.input.bottomRows(net.latent_dim).rowwise().sum();
        }
    }
    return total * norm;
}

std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "gradient_descent"; }

Optimizer optimizer_from_string(std::string_view name)
{
    if (name == "gradient_descent" || name == "gd") {
        return Optimizer::gradient_descent;
    }
    if (name == "adam") {
        return Optimizer::adam;
    }
    throw ValidationError("unknown optimizer '" + std::string(name) + "' (gradient_descent|adam)");
}

FitResult fit(const SceneBundle& bundle, const FitConfig& cfg)
{
    if (bundle.state_count() < 2) {
        throw ValidationError("fitting needs at least two states");
    }
    if (!(cfg.learning_rate > 0.0)) {
        throw ValidationError("learning rate must be positive");
    }
    FitResult out;
    out.net = DeformNet::create(cfg.latent_dim, cfg.hidden, cfg.hidden_layers, cfg.seed);
    std::mt19937_64 rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFull);
    std::normal_distribution<double> gauss(0.0, cfg.latent_sigma);
    out.latents.resize(bundle.state_count());
    for (auto& z : out.latents) {
        z.values.resize(cfg.latent_dim);
        for (Eigen::Index d = 0; d < z.values.size(); ++d) {
            z.values[d] = gauss(rng);
        }
    }

    // Parameters and latents are optimized as one flat vector.
    const auto np = static_cast<Eigen::Index>(out.net.parameter_count());
    const Eigen::Index nz = cfg.latent_dim;
    const Eigen::Index total = np + nz * static_cast<Eigen::Index>(out.latents.size());
    Eigen::VectorXd theta(total);
    theta.head(np) = out.net.parameters();
    for (std::size_t s = 0; s < out.latents.size(); ++s) {
        theta.segment(np + nz * static_cast<Eigen::Index>(s), nz) = out.latents[s].values;
    }
    Eigen::VectorXd m = Eigen::VectorXd::Zero(total), v = Eigen::VectorXd::Zero(total), g(total);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    LossGradient lg;
    for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
        out.net.set_parameters(theta.head(np));
        for (std::size_t s = 0; s < out.latents.size(); ++s) {
            out.latents[s].values = theta.segment(np + nz * static_cast<Eigen::Index>(s), nz);
        }
        const double loss = deform_loss(out.net, out.latents, bundle, cfg.loss, epoch < cfg.epochs ? &lg : nullptr);
        if (!std::isfinite(loss)) {
            throw RuntimeFailure("deformation fit diverged at epoch " + std::to_string(epoch) +
                                 " (non-finite loss); lower the learning rate");
        }
        out.loss_history.push_back(loss);
        out.final_loss = loss;
        if (epoch == cfg.epochs) {
            break;
        }
        g.head(np) = lg.parameters;
        for (std::size_t s = 0; s < lg.latents.size(); ++s) {
            g.segment(np + nz * static_cast<Eigen::Index>(s), nz) = lg.latents[s];
        }
        const double lr = cfg.learning_rate;
        if (cfg.optimizer == Optimizer::gradient_descent) {
            theta -= lr * g;
        } else {
            const double t = static_cast<double>(epoch + 1);
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
            const double c1 = 1.0 - std::pow(beta1, t);
            const double c2 = 1.0 - std::pow(beta2, t);
            theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        }
    }
    return out;
}

StateSnapshot deform(const DeformNet& net, const LatentCode& latent, const StateSnapshot& canonical)
{
    check_latent(net, latent);
    const auto acts = run_network(net, network_inputs(canonical.primitives, latent));
    StateSnapshot out = canonical;
    for (std::size_t i = 0; i < out.primitives.size(); ++i) {
        out.primitives[i] = apply_column(canonical.primitives[i], acts.output.col(static_cast<Eigen::Index>(i)),
                                         kScaleFloor);
    }
    return out;
}

StateSnapshot interpolate(const DeformNet& net, const LatentCode& a, const LatentCode& b, double t,
                          const StateSnapshot& canonical, const std::optional<std::set<int>>& part_filter)
{
    if (!(t >= 0.0 && t <= 1.0)) {
        throw ValidationError("interpolation parameter t must lie in [0, 1]");
    }
    check_latent(net, a);
    check_latent(net, b);
    if (part_filter) {
        for (int label : *part_filter) {
            const bool present = std::any_of(canonical.primitives.begin(), canonical.primitives.end(),
                                             [label](const GaussianPrimitive& p) { return p.label == label; });
            if (!present) {
                throw ValidationError("part filter names unknown label " + std::to_string(label));
            }
        }
    }
    LatentCode mid;
    mid.values = (1.0 - t) * a.values + t * b.values;
    StateSnapshot moved = deform(net, mid, canonical);
    if (!part_filter) {
        return moved;
    }
    StateSnapshot base = deform(net, a, canonical);
    for (std::size_t i = 0; i < base.primitives.size(); ++i) {
        if (part_filter->count(canonical.primitives[i].label)) {
            base.primitives[i] = moved.primitives[i];
        }
    }
    return base;
}

nlohmann::json checkpoint_to_json(const FitResult& fit, const FitConfig& cfg)
{
    nlohmann::json doc;
    doc["format"] = kCheckpointFormat;
    doc["latent_dim"] = fit.net.latent_dim;
    doc["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < fit.net.weights.size(); ++l) {
        const auto& w = fit.net.weights[l];
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                flat.push_back(w(r, c));
            }
        }
        const auto& b = fit.net.biases[l];
        doc["layers"].push_back({{"rows", w.rows()},
                                 {"cols", w.cols()},
                                 {"weights", flat},
                                 {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    doc["latents"] = nlohmann::json::array();
    for (const auto& z : fit.latents) {
        doc["latents"].push_back(std::vector<double>(z.values.data(), z.values.data() + z.values.size()));
    }
    doc["final_loss"] = fit.final_loss;
    doc["config"] = {{"epochs", cfg.epochs},
                     {"learning_rate", cfg.learning_rate},
                     {"latent_dim", cfg.latent_dim},
                     {"hidden", cfg.hidden},
                     {"hidden_layers", cfg.hidden_layers},
                     {"seed", cfg.seed},
                     {"latent_sigma", cfg.latent_sigma},
                     {"optimizer", std::string(to_string(cfg.optimizer))},
                     {"lambda_q", cfg.loss.lambda_q},
                     {"lambda_s", cfg.loss.lambda_s},
                     {"s_min", cfg.loss.s_min}};
    return doc;
}

FitResult checkpoint_from_json(const nlohmann::json& doc, FitConfig* cfg)
{
    try {
        if (doc.at("format").get<std::string>() != kCheckpointFormat) {
            throw ValidationError("checkpoint format tag is not " + std::string(kCheckpointFormat));
        }
        FitResult out;
        out.net.latent_dim = doc.at("latent_dim").get<int>();
        for (const auto& layer : doc.at("layers")) {
            const auto rows = layer.at("rows").get<Eigen::Index>();
            const auto cols = layer.at("cols").get<Eigen::Index>();
            const auto flat = layer.at("weights").get<std::vector<double>>();
            const auto bias = layer.at("bias").get<std::vector<double>>();
            if (rows <= 0 || cols <= 0 || flat.size() != static_cast<std::size_t>(rows * cols) ||
                bias.size() != static_cast<std::size_t>(rows)) {
                throw ValidationError("checkpoint layer shape does not match its arrays");
            }
            Eigen::MatrixXd w(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
                }
            }
            out.net.weights.push_back(std::move(w));
            out.net.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bias.data(), rows));
        }
        if (out.net.weights.empty() || out.net.weights.front().cols() != out.net.input_dim() ||
            out.net.weights.back().rows() != kOffsetOutputs) {
            throw ValidationError("checkpoint network shape is inconsistent");
        }
        for (std::size_t l = 1; l < out.net.weights.size(); ++l) {
            if (out.net.weights[l].cols() != out.net.weights[l - 1].rows()) {
                throw ValidationError("checkpoint layers do not chain");
            }
        }
        for (const auto& z : doc.at("latents")) {
            const auto v = z.get<std::vector<double>>();
            LatentCode code;
            code.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
            check_latent(out.net, code);
            out.latents.push_back(std::move(code));
        }
        out.final_loss = doc.value("final_loss", 0.0);
        if (cfg) {
            const auto& c = doc.at("config");
            cfg->epochs = c.at("epochs").get<std::size_t>();
            cfg->learning_rate = c.at("learning_rate").get<double>();
            cfg->latent_dim = c.at("latent_dim").get<int>();
            cfg->hidden = c.at("hidden").get<int>();
            cfg->hidden_layers = c.at("hidden_layers").get<int>();
            cfg->seed = c.at("seed").get<std::uint64_t>();
            cfg->latent_sigma = c.at("latent_sigma").get<double>();
            cfg->optimizer = optimizer_from_string(c.at("optimizer").get<std::string>());
            cfg->loss.lambda_q = c.at("lambda_q").get<double>();
            cfg->loss.lambda_s = c.at("lambda_s").get<double>();
            cfg->loss.s_min = c.at("s_min").get<double>();
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const FitResult& fit, const FitConfig& cfg, const std::filesystem::path& path)
{
    write_json_file(checkpoint_to_json(fit, cfg), path);
}

FitResult load_checkpoint(const std::filesystem::path& path, FitConfig* cfg)
{
    return checkpoint_from_json(read_json_file(path), cfg);
}

} // namespace artikin

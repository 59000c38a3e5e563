// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/cli.hpp"

#include "artikin/error.hpp"
#include "artikin/scene_io.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace artikin {

namespace {

using nlohmann::json;

struct Range {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;

    [[nodiscard]] bool contains(double v) const
    {
        return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
    }

    [[nodiscard]] std::string describe() const
    {
        std::ostringstream os;
        os << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
        return os.str();
    }
};

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void bad_value(const std::string& key, const std::string& why)
{
    throw ValidationError("config key '" + key + "': " + why);
}

template <class Field>
ConfigKey real_key(std::string key, std::string help, Field field, Range range)
{
    ConfigKey k;
    k.key = key;
    k.help = std::move(help);
    k.get = [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); };
    k.set = [key, field, range](RunConfig& c, const json& v) {
        if (!v.is_number()) {
            bad_value(key, "expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x) || !range.contains(x)) {
            bad_value(key, "value " + v.dump() + " outside " + range.describe());
        }
        field(c) = x;
    };
    return k;
}

template <class Field>
ConfigKey int_key(std::string key, std::string help, Field field, Range range)
{
    ConfigKey k;
    k.key = key;
    k.help = std::move(help);
    k.get = [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); };
    k.set = [key, field, range](RunConfig& c, const json& v) {
        if (!v.is_number_integer()) {
            bad_value(key, "expected an integer");
        }
        const double x = v.is_number_unsigned() ? static_cast<double>(v.get<std::uint64_t>())
                                                : static_cast<double>(v.get<std::int64_t>());
        if (!range.contains(x)) {
            bad_value(key, "value " + v.dump() + " outside " + range.describe());
        }
        using T = std::remove_reference_t<decltype(field(c))>;
        field(c) = v.get<T>();
    };
    return k;
}

template <class Field>
ConfigKey bool_key(std::string key, std::string help, Field field)
{
    ConfigKey k;
    k.key = key;
    k.help = std::move(help);
    k.get = [field](const RunConfig& c) { return json(field(const_cast<RunConfig&>(c))); };
    k.set = [key, field](RunConfig& c, const json& v) {
        if (!v.is_boolean()) {
            bad_value(key, "expected true or false");
        }
        field(c) = v.get<bool>();
    };
    return k;
}

/// String-valued key backed by an enum or a fixed set of names.
template <class Get, class Set>
ConfigKey name_key(std::string key, std::string help, Get get, Set set)
{
    ConfigKey k;
    k.key = key;
    k.help = std::move(help);
    k.get = [get](const RunConfig& c) { return json(std::string(get(c))); };
    k.set = [key, set](RunConfig& c, const json& v) {
        if (!v.is_string()) {
            bad_value(key, "expected a string");
        }
        try {
            set(c, v.get<std::string>());
        } catch (const ValidationError& e) {
            bad_value(key, e.what());
        }
    };
    return k;
}

std::function<void(RunConfig&, const std::string&)> one_of(std::string RunConfig::*member,
                                                            std::vector<std::string> names)
{
    return [member, names](RunConfig& c, const std::string& v) {
        for (const auto& n : names) {
            if (n == v) {
                c.*member = v;
                return;
            }
        }
        std::string list;
        for (const auto& n : names) {
            list += (list.empty() ? "" : "|") + n;
        }
        throw ValidationError("unknown value '" + v + "', expected " + list);
    };
}

std::vector<ConfigKey> build_keys()
{
    const Range any_seed{0, 1.8446744073709552e19};
    const Range positive{0, kInf, true};
    const Range non_negative{0, kInf};
    const Range unit_open{0, 1, true, true};
    const Range count{1, 1e9};

    std::vector<ConfigKey> k;
    k.push_back(int_key("seed", "single source of all randomness", [](RunConfig& c) -> auto& { return c.seed; },
                        any_seed));
    k.push_back(int_key("threads", "worker cap for every parallel stage",
                        [](RunConfig& c) -> auto& { return c.threads; }, Range{1, 1024}));

    k.push_back(name_key(
        "provider", "part-count provider: oracle|fixed|http", [](const RunConfig& c) { return c.provider; },
        one_of(&RunConfig::provider, {"oracle", "fixed", "http"})));
    k.push_back(int_key("fixed_parts", "count returned by the fixed provider",
                        [](RunConfig& c) -> auto& { return c.fixed_parts; }, Range{1, 64}));
    k.push_back(name_key(
        "segmenter", "promptable segmenter: oracle|http", [](const RunConfig& c) { return c.segmenter; },
        one_of(&RunConfig::segmenter, {"oracle", "http"})));

    k.push_back(real_key("coarse.tau_mot", "normalised displacement above which a primitive is dynamic",
                         [](RunConfig& c) -> auto& { return c.coarse.tau_mot; }, Range{0, 1, true, true}));
    k.push_back(int_key("coarse.queries", "image pairs sent to the part-count provider",
                        [](RunConfig& c) -> auto& { return c.coarse.count.queries; }, count));
    k.push_back(int_key("coarse.retries", "extra attempts per failed provider query",
                        [](RunConfig& c) -> auto& { return c.coarse.count.retries; }, Range{0, 100}));
    k.push_back(int_key("coarse.kmeans_restarts", "k-means++ restarts",
                        [](RunConfig& c) -> auto& { return c.coarse.kmeans.restarts; }, count));
    k.push_back(int_key("coarse.kmeans_iterations", "Lloyd iteration cap per restart",
                        [](RunConfig& c) -> auto& { return c.coarse.kmeans.max_iterations; }, count));
    k.push_back(real_key("coarse.kmeans_tolerance", "centroid shift that stops Lloyd iterations",
                         [](RunConfig& c) -> auto& { return c.coarse.kmeans.tolerance; }, positive));
    k.push_back(real_key("coarse.min_fraction", "clusters below this share of dynamic points are dissolved",
                         [](RunConfig& c) -> auto& { return c.coarse.kmeans.min_fraction; },
                         Range{0, 1, false, true}));

    k.push_back(bool_key("refiner.enabled", "run boundary refinement after coarse labelling",
                         [](RunConfig& c) -> auto& { return c.refine; }));
    k.push_back(real_key("refiner.tau_vis", "winner-margin ratio for prompt pixels",
                         [](RunConfig& c) -> auto& { return c.refiner.tau_vis; }, Range{1, kInf}));
    k.push_back(int_key("refiner.positives", "positive prompts per mask",
                        [](RunConfig& c) -> auto& { return c.refiner.positives; }, Range{1, 1000}));
    k.push_back(int_key("refiner.negatives", "negative prompts per mask",
                        [](RunConfig& c) -> auto& { return c.refiner.negatives; }, Range{0, 1000}));
    k.push_back(real_key("refiner.ellipse_sigma", "endpoint distance along the major axis, in sigmas",
                         [](RunConfig& c) -> auto& { return c.refiner.ellipse_sigma; }, Range{0, 3, true}));
    k.push_back(name_key(
        "refiner.view_choice", "view used per primitive: nearest|longest_axis|max_overflow",
        [](const RunConfig& c) { return to_string(c.refiner.view_choice); },
        [](RunConfig& c, const std::string& v) { c.refiner.view_choice = view_choice_from_string(v); }));
    k.push_back(real_key("refiner.min_segment_px", "smallest in-mask or overflowing share that allows a split",
                         [](RunConfig& c) -> auto& { return c.refiner.min_segment_px; }, non_negative));
    k.push_back(int_key("refiner.max_depth", "split recursion bound",
                        [](RunConfig& c) -> auto& { return c.refiner.max_depth; }, Range{0, 32}));
    k.push_back(real_key("refiner.s_min", "smallest major-axis scale that may still split",
                         [](RunConfig& c) -> auto& { return c.refiner.s_min; }, positive));
    k.push_back(real_key("refiner.lambda_clamp", "split ratio is clamped to [c, 1 - c]",
                         [](RunConfig& c) -> auto& { return c.refiner.lambda_clamp; }, Range{0, 0.5, true, true}));
    k.push_back(real_key("refiner.visibility_tolerance", "depth slack for counting a primitive as visible",
                         [](RunConfig& c) -> auto& { return c.refiner.visibility_tolerance; }, non_negative));
    k.push_back(real_key("refiner.coverage_threshold", "object coverage needed for a static vote",
                         [](RunConfig& c) -> auto& { return c.refiner.coverage_threshold; }, unit_open));

    k.push_back(int_key("kinematics.state_a", "first state of the analysed pair",
                        [](RunConfig& c) -> auto& { return c.state_a; }, Range{0, 1e6}));
    k.push_back(int_key("kinematics.state_b", "second state of the pair, -1 for the last",
                        [](RunConfig& c) -> auto& { return c.state_b; }, Range{-1, 1e6}));
    k.push_back(real_key("kinematics.tau_rank", "rank ratio below which a joint is prismatic",
                         [](RunConfig& c) -> auto& { return c.tau_rank; }, unit_open));
    k.push_back(real_key("kinematics.theta_min_deg", "rotation below which a joint is prismatic, degrees",
                         [](RunConfig& c) -> auto& { return c.theta_min_deg; }, Range{0, 90}));
    k.push_back(name_key(
        "kinematics.pivot", "pivot estimator: pseudoinverse|static_centroids",
        [](const RunConfig& c) { return to_string(c.pivot); },
        [](RunConfig& c, const std::string& v) { c.pivot = pivot_method_from_string(v); }));
    k.push_back(int_key("kinematics.static_neighbours", "static primitives used by static_centroids",
                        [](RunConfig& c) -> auto& { return c.static_neighbours; }, count));

    k.push_back(int_key("deform.epochs", "optimisation epochs",
                        [](RunConfig& c) -> auto& { return c.deform.epochs; }, count));
    k.push_back(real_key("deform.lr", "learning rate", [](RunConfig& c) -> auto& { return c.deform.learning_rate; },
                         positive));
    k.push_back(int_key("deform.latent_dim", "latent code width",
                        [](RunConfig& c) -> auto& { return c.deform.latent_dim; }, Range{1, 4096}));
    k.push_back(int_key("deform.hidden", "hidden layer width",
                        [](RunConfig& c) -> auto& { return c.deform.hidden; }, Range{1, 4096}));
    k.push_back(int_key("deform.hidden_layers", "hidden layer count",
                        [](RunConfig& c) -> auto& { return c.deform.hidden_layers; }, Range{1, 64}));
    k.push_back(real_key("deform.latent_sigma", "standard deviation of the initial latents",
                         [](RunConfig& c) -> auto& { return c.deform.latent_sigma; }, positive));
    k.push_back(name_key(
        "deform.optimizer", "adam|gradient_descent", [](const RunConfig& c) { return to_string(c.deform.optimizer); },
        [](RunConfig& c, const std::string& v) { c.deform.optimizer = optimizer_from_string(v); }));
    k.push_back(real_key("deform.lambda_q", "rotation loss weight",
                         [](RunConfig& c) -> auto& { return c.deform.loss.lambda_q; }, non_negative));
    k.push_back(real_key("deform.lambda_s", "scale loss weight",
                         [](RunConfig& c) -> auto& { return c.deform.loss.lambda_s; }, non_negative));

    k.push_back(real_key("render.low_pass", "screen-space dilation added to the 2D covariance, px^2",
                         [](RunConfig& c) -> auto& { return c.raster.low_pass; }, non_negative));
    k.push_back(real_key("render.max_density", "per-primitive density clamp",
                         [](RunConfig& c) -> auto& { return c.raster.max_density; }, Range{0, 1, true, true}));
    k.push_back(real_key("render.cutoff_sigma", "footprint cutoff in standard deviations",
                         [](RunConfig& c) -> auto& { return c.raster.cutoff_sigma; }, Range{0, 10, true}));
    return k;
}

json::json_pointer pointer_of(const std::string& dotted)
{
    std::string p;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        p += "/" + dotted.substr(start, dot - start);
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    return json::json_pointer(p);
}

std::string dotted_of(const std::string& pointer)
{
    std::string out = pointer.substr(1);
    for (char& ch : out) {
        if (ch == '/') {
            ch = '.';
        }
    }
    return out;
}

const ConfigKey& find_key(const std::string& key)
{
    for (const ConfigKey& k : config_keys()) {
        if (k.key == key) {
            return k;
        }
    }
    throw ValidationError("unknown config key '" + key + "' (see artikin --help)");
}

} // namespace

KinematicsConfig RunConfig::kinematics() const
{
    KinematicsConfig k;
    k.tau_rank = tau_rank;
    k.theta_min = theta_min_deg * std::numbers::pi / 180.0;
    k.pivot = pivot;
    k.static_neighbours = static_neighbours;
    return k;
}

CoarseConfig RunConfig::coarse_config() const
{
    CoarseConfig c = coarse;
    c.count.seed = seed;
    c.count.threads = threads;
    return c;
}

RefineConfig RunConfig::refine_config() const
{
    RefineConfig r = refiner;
    r.threads = threads;
    return r;
}

FitConfig RunConfig::fit_config() const
{
    FitConfig f = deform;
    f.seed = seed;
    return f;
}

std::pair<std::size_t, std::size_t> RunConfig::state_pair(std::size_t state_count) const
{
    if (state_count < 2) {
        throw ValidationError("scene has " + std::to_string(state_count) + " state(s); at least 2 are needed");
    }
    const std::size_t b = state_b < 0 ? state_count - 1 : static_cast<std::size_t>(state_b);
    if (state_a >= state_count || b >= state_count || state_a == b) {
        throw ValidationError("kinematics state pair (" + std::to_string(state_a) + ", " + std::to_string(b) +
                              ") is invalid for a scene with " + std::to_string(state_count) + " states");
    }
    return {state_a, b};
}

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

nlohmann::json to_json(const RunConfig& cfg)
{
    json doc = json::object();
    for (const ConfigKey& k : config_keys()) {
        doc[pointer_of(k.key)] = k.get(cfg);
    }
    return doc;
}

RunConfig run_config_from_json(const nlohmann::json& doc, const RunConfig& base)
{
    if (!doc.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    RunConfig cfg = base;
    const json flat = doc.flatten();
    for (const auto& [pointer, value] : flat.items()) {
        // flatten() turns empty objects into null leaves.
        if (value.is_null() && doc.at(json::json_pointer(pointer)).is_object()) {
            continue;
        }
        find_key(dotted_of(pointer)).set(cfg, value);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    return run_config_from_json(read_json_file(path));
}

void apply_override(RunConfig& cfg, const std::string& assignment)
{
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    find_key(key).set(cfg, value);
}

std::string config_help()
{
    const RunConfig defaults;
    std::size_t width = 0;
    for (const ConfigKey& k : config_keys()) {
        width = std::max(width, k.key.size());
    }
    std::ostringstream os;
    os << "Config keys (--config file.json or --set key=value), with defaults:\n";
    for (const ConfigKey& k : config_keys()) {
        const std::string def = k.get(defaults).dump();
        os << "  " << k.key << std::string(width - k.key.size() + 2, ' ') << def
           << std::string(def.size() < 14 ? 14 - def.size() : 1, ' ') << k.help << "\n";
    }
    return os.str();
}

} // namespace artikin

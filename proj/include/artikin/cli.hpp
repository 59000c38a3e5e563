// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/boundary_refiner.hpp"
#include "artikin/coarse_segmenter.hpp"
#include "artikin/deform_field.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/splatter.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace artikin {

/// Every tunable of a run. The defaults below are the only copy; `--help`,
/// config.json and manifest.json all print them from here.
struct RunConfig {
    std::uint64_t seed = 0;
    unsigned threads = 1;

    /// oracle | fixed | http
    std::string provider = "oracle";
    int fixed_parts = 1;
    /// oracle | http
    std::string segmenter = "oracle";

    CoarseConfig coarse;
    bool refine = true;
    RefineConfig refiner;

    std::size_t state_a = 0;
    /// -1 selects the last state.
    long long state_b = -1;
    double tau_rank = 0.05;
    double theta_min_deg = 1.0;
    PivotMethod pivot = PivotMethod::pseudoinverse;
    std::size_t static_neighbours = 32;

    FitConfig deform;
    RasterConfig raster;

    [[nodiscard]] KinematicsConfig kinematics() const;
    /// Pins every module seed and thread cap to the run-level values.
    [[nodiscard]] CoarseConfig coarse_config() const;
    [[nodiscard]] RefineConfig refine_config() const;
    [[nodiscard]] FitConfig fit_config() const;
    /// Resolves state_b = -1 against the scene's state count.
    [[nodiscard]] std::pair<std::size_t, std::size_t> state_pair(std::size_t state_count) const;
};

struct ConfigKey {
    /// Dotted path, e.g. "refiner.max_depth".
    std::string key;
    std::string help;
    std::function<nlohmann::json(const RunConfig&)> get;
    /// Throws ValidationError on a wrong type or an out-of-range value.
    std::function<void(RunConfig&, const nlohmann::json&)> set;
};

const std::vector<ConfigKey>& config_keys();

/// Nested document with every key.
nlohmann::json to_json(const RunConfig& cfg);
/// Keys may be omitted; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& doc, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Apply one "key=value" override; the value is parsed as JSON, falling back
/// to a bare string.
void apply_override(RunConfig& cfg, const std::string& assignment);
/// Table of every key with its default, for `--help`.
std::string config_help();

/// Parse argv and run one subcommand. Returns 0 on success, 1 on invalid
/// input and 2 on runtime failure; messages go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace artikin

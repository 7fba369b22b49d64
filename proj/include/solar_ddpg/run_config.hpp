#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "solar_ddpg/battery_env.hpp"
#include "solar_ddpg/data_ingest.hpp"
#include "solar_ddpg/ddpg_agent.hpp"

namespace solar_ddpg {

enum class DataSource { Synthetic, Ausgrid };

struct DataConfig {
    DataSource source = DataSource::Synthetic;
    std::string path;  // Ausgrid CSV, when source is Ausgrid
    CustomerId customer = 1;
    int year = 2013;
    std::size_t n_train = 8;
    std::uint64_t split_seed = 42;
    std::size_t synthetic_weeks = 15;
    std::uint64_t synthetic_seed = 7;
    SyntheticProfile profile;
};

struct TrainingConfig {
    std::int64_t eval_interval = 3360;  // environment steps between validation rollouts
    std::size_t validation_week = 0;    // index into the training weeks
    bool paper_mode = false;            // one episode spans the whole split
};

struct OracleConfig {
    int soc_levels = 33;
    int action_levels = 3;
};

struct SearchSpace {
    std::vector<std::vector<int>> actor_hiddens{{200, 200}, {300, 300}, {400, 400}};
    std::vector<std::vector<int>> critic_hiddens{{200, 200}, {300, 300}, {400, 400}, {500, 500}};
    double lr_min = 1e-7;
    double lr_max = 1e-1;
    bool log_uniform = false;
    std::size_t trials = 72;
    std::size_t threads = 1;
};

struct SweepConfig {
    std::vector<double> sizes{0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0};
};

struct RunConfig {
    DataConfig data;
    EnvConfig env;
    HyperParams agent;
    TrainingConfig training;
    OracleConfig oracle;
    SearchSpace search;
    SweepConfig sweep;
    std::uint64_t root_seed = 1;
    std::string output_dir;  // empty: chosen by the caller
};

/// Strict conversion: unknown keys, wrong types and out-of-range values throw
/// ConfigError carrying the dotted key path. Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

/// Applies `a.b.c=value` overrides to a config document. The value is parsed
/// as JSON when possible and taken as a string otherwise. Keys must exist in
/// the schema.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a config file (or the `config` member of a run manifest), applies
/// overrides, and validates the result.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig make_run_config(const std::vector<std::string>& overrides);

std::string data_source_name(DataSource s);
std::string noise_kind_name(NoiseKind k);

}  // namespace solar_ddpg

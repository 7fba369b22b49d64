#include "solar_ddpg/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "solar_ddpg/errors.hpp"

namespace solar_ddpg {

using nlohmann::json;

std::string data_source_name(DataSource s) { return s == DataSource::Synthetic ? "synthetic" : "ausgrid"; }

std::string noise_kind_name(NoiseKind k) { return k == NoiseKind::OrnsteinUhlenbeck ? "ou" : "gaussian"; }

namespace {

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Pulls typed members out of one JSON object and rejects leftovers.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string path(const std::string& key) const { return join(path_, key); }

    const json* find(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out, double lo, double hi, bool lo_open = false) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number()) throw ConfigError(path(key), "expected a number");
        const double x = v->get<double>();
        if (!std::isfinite(x) || x < lo || x > hi || (lo_open && x == lo))
            throw ConfigError(path(key), "value " + v->dump() + " outside " + (lo_open ? "(" : "[") + range(lo, hi) + "]");
        out = x;
    }

    template <typename Int>
    void integer(const std::string& key, Int& out, long long lo, long long hi) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
        if (v->is_number_unsigned() && v->get<unsigned long long>() > static_cast<unsigned long long>(hi))
            throw ConfigError(path(key), "value " + v->dump() + " too large");
        const long long x = v->get<long long>();
        if (x < lo || x > hi) throw ConfigError(path(key), "value " + v->dump() + " outside [" + range(lo, hi) + "]");
        out = static_cast<Int>(x);
    }

    void seed(const std::string& key, std::uint64_t& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<long long>() < 0))
            throw ConfigError(path(key), "expected a non-negative integer seed");
        out = v->get<std::uint64_t>();
    }

    void boolean(const std::string& key, bool& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
        out = v->get<bool>();
    }

    void string(const std::string& key, std::string& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_string()) throw ConfigError(path(key), "expected a string");
        out = v->get<std::string>();
    }

    void layers(const std::string& key, std::vector<int>& out) { out = parse_layers(find(key), path(key), out); }

    void layer_grid(const std::string& key, std::vector<std::vector<int>>& out) {
        const json* v = find(key);
        if (!v) return;
        if (!v->is_array()) throw ConfigError(path(key), "expected a list of layer lists");
        if (v->empty()) throw ConfigError(path(key), "search axis is empty");
        std::vector<std::vector<int>> grid;
        for (std::size_t i = 0; i < v->size(); ++i)
            grid.push_back(parse_layers(&(*v)[i], path(key) + "[" + std::to_string(i) + "]", {}));
        out = std::move(grid);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }

private:
    template <typename T>
    static std::string range(T lo, T hi) {
        return json(lo).dump() + ", " + json(hi).dump();
    }

    static std::vector<int> parse_layers(const json* v, const std::string& p, std::vector<int> fallback) {
        if (!v) return fallback;
        if (!v->is_array() || v->empty()) throw ConfigError(p, "expected a non-empty list of layer widths");
        std::vector<int> out;
        for (const auto& e : *v) {
            if (!e.is_number_integer() || e.get<long long>() < 1 || e.get<long long>() > 100000)
                throw ConfigError(p, "layer widths must be positive integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void read_profile(Section& s, SyntheticProfile& p) {
    s.number("peak_solar", p.peak_solar, 0.0, 1e6);
    s.number("base_demand", p.base_demand, 0.0, 1e6);
    s.number("evening_peak", p.evening_peak, 0.0, 1e6);
    s.number("controlled_load", p.controlled_load, 0.0, 1e6);
    s.number("noise", p.noise, 0.0, 1.0);
    if (p.noise >= 1.0) throw ConfigError(s.path("noise"), "must be below 1");
}

void read_data(Section& s, DataConfig& d) {
    std::string source = data_source_name(d.source);
    s.string("source", source);
    if (source == "synthetic") d.source = DataSource::Synthetic;
    else if (source == "ausgrid") d.source = DataSource::Ausgrid;
    else throw ConfigError(s.path("source"), "expected \"synthetic\" or \"ausgrid\"");
    s.string("path", d.path);
    s.integer("customer", d.customer, 0, 1'000'000'000);
    s.integer("year", d.year, 1900, 2200);
    s.integer("n_train", d.n_train, 1, 100000);
    s.seed("split_seed", d.split_seed);
    s.integer("synthetic_weeks", d.synthetic_weeks, 2, 100000);
    s.seed("synthetic_seed", d.synthetic_seed);
    if (const json* p = s.find("profile")) {
        Section ps(*p, s.path("profile"));
        read_profile(ps, d.profile);
        ps.finish();
    }
    if (d.source == DataSource::Ausgrid && d.path.empty()) throw ConfigError(s.path("path"), "required for ausgrid data");
    if (d.source == DataSource::Synthetic && d.n_train >= d.synthetic_weeks)
        throw ConfigError(s.path("n_train"), "must be below data.synthetic_weeks");
}

void read_env(Section& s, EnvConfig& e) {
    s.number("capacity", e.capacity, 0.0, 1e6, true);
    s.number("tariff_gc", e.tariff_gc, 0.0, 1e6);
    s.number("tariff_cl", e.tariff_cl, 0.0, 1e6);
    s.integer("window_start", e.window_start, 0, kSlotsPerDay - 1);
    s.integer("window_end", e.window_end, 0, kSlotsPerDay - 1);
    s.boolean("solar_serves_cl", e.solar_serves_cl);
    if (e.window_start == e.window_end) throw ConfigError(s.path("window_end"), "window must be non-empty");
}

void read_agent(Section& s, HyperParams& hp) {
    s.number("actor_lr", hp.actor_lr, 0.0, 10.0, true);
    s.number("critic_lr", hp.critic_lr, 0.0, 10.0, true);
    s.number("gamma", hp.gamma, 0.0, 1.0);
    s.number("tau", hp.tau, 0.0, 1.0, true);
    s.integer("batch_size", hp.batch_size, 1, 1'000'000);
    s.integer("buffer_capacity", hp.buffer_capacity, 1, 1'000'000'000);
    s.layers("actor_hiddens", hp.actor_hiddens);
    s.layers("critic_hiddens", hp.critic_hiddens);
    std::string noise = noise_kind_name(hp.noise_kind);
    s.string("noise", noise);
    if (noise == "ou") hp.noise_kind = NoiseKind::OrnsteinUhlenbeck;
    else if (noise == "gaussian") hp.noise_kind = NoiseKind::Gaussian;
    else throw ConfigError(s.path("noise"), "expected \"ou\" or \"gaussian\"");
    s.number("noise_theta", hp.noise_theta, 0.0, 1.0);
    s.number("noise_sigma", hp.noise_sigma, 0.0, 10.0);
    s.number("noise_sigma_final", hp.noise_sigma_final, 0.0, 10.0);
    s.integer("training_iterations", hp.training_iterations, 0, 1'000'000'000'000LL);
}

void read_training(Section& s, TrainingConfig& t) {
    s.integer("eval_interval", t.eval_interval, 1, 1'000'000'000'000LL);
    s.integer("validation_week", t.validation_week, 0, 100000);
    s.boolean("paper_mode", t.paper_mode);
}

void read_oracle(Section& s, OracleConfig& o) {
    s.integer("soc_levels", o.soc_levels, 2, 100000);
    s.integer("action_levels", o.action_levels, 2, 1000);
}

void read_search(Section& s, SearchSpace& sp) {
    s.layer_grid("actor_hiddens", sp.actor_hiddens);
    s.layer_grid("critic_hiddens", sp.critic_hiddens);
    s.number("lr_min", sp.lr_min, 0.0, 10.0, true);
    s.number("lr_max", sp.lr_max, 0.0, 10.0, true);
    s.boolean("log_uniform", sp.log_uniform);
    s.integer("trials", sp.trials, 1, 1'000'000);
    s.integer("threads", sp.threads, 1, 1024);
    if (sp.lr_max < sp.lr_min) throw ConfigError(s.path("lr_max"), "must not be below search.lr_min");
}

void read_sweep(Section& s, SweepConfig& sw) {
    const json* v = s.find("sizes");
    if (!v) return;
    const std::string p = s.path("sizes");
    if (!v->is_array() || v->empty()) throw ConfigError(p, "expected a non-empty list of capacities");
    std::vector<double> sizes;
    for (const auto& e : *v) {
        if (!e.is_number() || !(e.get<double>() > 0.0)) throw ConfigError(p, "capacities must be positive numbers");
        if (!sizes.empty() && !(e.get<double>() > sizes.back())) throw ConfigError(p, "capacities must be strictly increasing");
        sizes.push_back(e.get<double>());
    }
    sw.sizes = std::move(sizes);
}

template <typename Fn>
void section(Section& root, const char* key, Fn&& fn) {
    if (const json* v = root.find(key)) {
        Section s(*v, key);
        fn(s);
        s.finish();
    }
}

json layers_json(const std::vector<int>& v) { return json(v); }

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    Section root(j, "");
    section(root, "data", [&](Section& s) { read_data(s, c.data); });
    section(root, "env", [&](Section& s) { read_env(s, c.env); });
    section(root, "agent", [&](Section& s) { read_agent(s, c.agent); });
    section(root, "training", [&](Section& s) { read_training(s, c.training); });
    section(root, "oracle", [&](Section& s) { read_oracle(s, c.oracle); });
    section(root, "search", [&](Section& s) { read_search(s, c.search); });
    section(root, "sweep", [&](Section& s) { read_sweep(s, c.sweep); });
    if (const json* v = root.find("seeds")) {
        Section s(*v, "seeds");
        s.seed("root", c.root_seed);
        s.finish();
    }
    root.string("output_dir", c.output_dir);
    root.finish();
    if (c.data.source == DataSource::Synthetic && c.training.validation_week >= c.data.n_train)
        throw ConfigError("training.validation_week", "must index a training week (below data.n_train)");
    return c;
}

json run_config_to_json(const RunConfig& c) {
    const auto& p = c.data.profile;
    json grid_a = json::array(), grid_c = json::array();
    for (const auto& l : c.search.actor_hiddens) grid_a.push_back(layers_json(l));
    for (const auto& l : c.search.critic_hiddens) grid_c.push_back(layers_json(l));
    return json{
        {"data",
         {{"source", data_source_name(c.data.source)},
          {"path", c.data.path},
          {"customer", c.data.customer},
          {"year", c.data.year},
          {"n_train", c.data.n_train},
          {"split_seed", c.data.split_seed},
          {"synthetic_weeks", c.data.synthetic_weeks},
          {"synthetic_seed", c.data.synthetic_seed},
          {"profile",
           {{"peak_solar", p.peak_solar},
            {"base_demand", p.base_demand},
            {"evening_peak", p.evening_peak},
            {"controlled_load", p.controlled_load},
            {"noise", p.noise}}}}},
        {"env",
         {{"capacity", c.env.capacity},
          {"tariff_gc", c.env.tariff_gc},
          {"tariff_cl", c.env.tariff_cl},
          {"window_start", c.env.window_start},
          {"window_end", c.env.window_end},
          {"solar_serves_cl", c.env.solar_serves_cl}}},
        {"agent",
         {{"actor_lr", c.agent.actor_lr},
          {"critic_lr", c.agent.critic_lr},
          {"gamma", c.agent.gamma},
          {"tau", c.agent.tau},
          {"batch_size", c.agent.batch_size},
          {"buffer_capacity", c.agent.buffer_capacity},
          {"actor_hiddens", layers_json(c.agent.actor_hiddens)},
          {"critic_hiddens", layers_json(c.agent.critic_hiddens)},
          {"noise", noise_kind_name(c.agent.noise_kind)},
          {"noise_theta", c.agent.noise_theta},
          {"noise_sigma", c.agent.noise_sigma},
          {"noise_sigma_final", c.agent.noise_sigma_final},
          {"training_iterations", c.agent.training_iterations}}},
        {"training",
         {{"eval_interval", c.training.eval_interval},
          {"validation_week", c.training.validation_week},
          {"paper_mode", c.training.paper_mode}}},
        {"oracle", {{"soc_levels", c.oracle.soc_levels}, {"action_levels", c.oracle.action_levels}}},
        {"search",
         {{"actor_hiddens", grid_a},
          {"critic_hiddens", grid_c},
          {"lr_min", c.search.lr_min},
          {"lr_max", c.search.lr_max},
          {"log_uniform", c.search.log_uniform},
          {"trials", c.search.trials},
          {"threads", c.search.threads}}},
        {"sweep", {{"sizes", c.sweep.sizes}}},
        {"seeds", {{"root", c.root_seed}}},
        {"output_dir", c.output_dir},
    };
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(assignment, "override must have the form key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    static const json schema = run_config_to_json(RunConfig{});
    const json* node = &schema;
    json* target = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty() || !node->is_object() || !node->contains(part)) throw ConfigError(key, "unknown key");
        node = &(*node)[part];
        if (!target->is_object()) *target = json::object();
        target = &(*target)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = text;
    *target = std::move(value);
}

RunConfig make_run_config(const std::vector<std::string>& overrides) {
    json doc = json::object();
    for (const auto& o : overrides) apply_override(doc, o);
    return run_config_from_json(doc);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("config file not found: " + path.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/true);
    if (doc.is_discarded()) throw ConfigError(path.string(), "not valid JSON");
    if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) doc = doc["config"];
    for (const auto& o : overrides) apply_override(doc, o);
    return run_config_from_json(doc);
}

}  // namespace solar_ddpg

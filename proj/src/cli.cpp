#include "solar_ddpg/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/experiment.hpp"
#include "solar_ddpg/oracle.hpp"
#include "solar_ddpg/plots.hpp"
#include "solar_ddpg/text_util.hpp"

namespace solar_ddpg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string verb;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string checkpoint;
    std::string run_dir;
    std::size_t trials = 0;
};

std::string quote(const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') q += '\\';
        q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf) == "-0.00" ? "0.00" : buf;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

fs::path resolve_out_dir(const Options& o, const RunConfig& cfg) {
    if (!o.out_dir.empty()) return o.out_dir;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    const char* root = std::getenv(kOutputRootEnv);
    return fs::path(root && *root ? root : "runs") / o.verb;
}

void write_text(const fs::path& path, const auto& writer) {
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    writer(out);
    if (!out) throw IoError("write failed: " + path.string());
}

void write_manifest(const fs::path& dir, const Options& o, const RunConfig& cfg) {
    RunConfig snapshot = cfg;
    snapshot.output_dir = dir.string();
    const TrialSeeds derived = TrialSeeds::from_root(cfg.root_seed);
    json m{{"manifest_version", 1},
           {"artifact_version", kArtifactVersion},
           {"verb", o.verb},
           {"overrides", o.overrides},
           {"config", run_config_to_json(snapshot)},
           {"seeds",
            {{"root", cfg.root_seed},
             {"split", cfg.data.split_seed},
             {"synthetic", cfg.data.synthetic_seed},
             {"init", derived.agent.init},
             {"noise", derived.agent.noise},
             {"sampling", derived.agent.sampling},
             {"week_sampling", derived.week_sampling}}}};
    if (!o.checkpoint.empty()) m["checkpoint"] = o.checkpoint;
    if (!o.run_dir.empty()) m["run_dir"] = o.run_dir;
    write_text(dir / "manifest.json", [&](std::ostream& out) { out << m.dump(2) << '\n'; });
}

json result_json(const TrialResult& r, double capacity, const BaselineCosts& ref, std::int64_t iterations) {
    return {{"capacity", capacity},
            {"mean_episode_reward", r.mean_episode_reward},
            {"episode_rewards", r.episode_rewards},
            {"status", trial_status_name(r.status)},
            {"message", r.message},
            {"iterations", iterations},
            {"seed", r.seeds.root},
            {"oracle_cost", ref.oracle},
            {"greedy_cost", ref.greedy},
            {"no_battery_cost", ref.no_battery}};
}

void write_eval_weeks(const fs::path& path, const EvaluationResult& ev) {
    write_text(path, [&](std::ostream& out) {
        out << "episode_start,reward\n";
        for (std::size_t i = 0; i < ev.episode_rewards.size(); ++i)
            out << format_date(ev.episode_starts[i]) << ',' << text::format_double(ev.episode_rewards[i]) << '\n';
    });
}

// ---------------------------------------------------------------- verbs

int cmd_ingest(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    const DataSplit split = load_split(cfg.data);
    const auto train = concat_weeks(split.train);
    const auto test = concat_weeks(split.test);
    write_text(dir / "train.csv", [&](std::ostream& o) { write_normalized_csv(o, train); });
    write_text(dir / "test.csv", [&](std::ostream& o) { write_normalized_csv(o, test); });
    json weeks{{"split_seed", split.seed}, {"train", json::array()}, {"test", json::array()}};
    auto summarize = [&](const WeekTrace& w, const char* set) {
        double gc = 0, cl = 0, cs = 0;
        for (const auto& r : w.records()) gc += r.gc, cl += r.cl, cs += r.cs;
        weeks[set].push_back(format_date(w.start_date()));
        out << "week " << format_date(w.start_date()) << " set=" << set << " gc=" << fixed4(gc) << " cl=" << fixed4(cl)
            << " cs=" << fixed4(cs) << '\n';
    };
    for (const auto& w : split.train) summarize(w, "train");
    for (const auto& w : split.test) summarize(w, "test");
    write_text(dir / "split.json", [&](std::ostream& o) { o << weeks.dump(2) << '\n'; });
    out << "ingest weeks=" << split.train.size() + split.test.size() << " train=" << split.train.size()
        << " test=" << split.test.size() << '\n';
    return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    const DataSplit split = load_split(cfg.data);
    auto result = run_training(cfg, split);
    save_checkpoint(result.checkpoint, dir / "checkpoint.sddpg");
    write_text(dir / "training_log.csv", [&](std::ostream& o) { write_training_log(o, result.result.training_curve); });
    const auto ev = evaluate(result.checkpoint, split.test, cfg.training.paper_mode);
    write_text(dir / "eval_steps.csv", [&](std::ostream& o) { write_step_table(o, ev.steps); });
    write_eval_weeks(dir / "eval_weeks.csv", ev);
    const auto ref = baseline_costs(cfg.env, cfg.oracle, split.test, cfg.training.paper_mode);
    write_text(dir / "result.json", [&](std::ostream& o) {
        o << result_json(result.result, cfg.env.capacity, ref, result.checkpoint.iterations).dump(2) << '\n';
    });
    write_text(dir / "timing.json", [&](std::ostream& o) { o << json{{"wall_time", result.result.wall_time}}.dump() << '\n'; });
    for (std::size_t i = 0; i < ev.episode_rewards.size(); ++i)
        out << "week " << format_date(ev.episode_starts[i]) << " reward=" << fixed4(ev.episode_rewards[i]) << '\n';
    out << "trial status=" << trial_status_name(result.result.status)
        << " reward=" << fixed4(result.result.mean_episode_reward) << " greedy=" << fixed4(-ref.greedy)
        << " oracle=" << fixed4(-ref.oracle) << " no_battery=" << fixed4(-ref.no_battery)
        << " iterations=" << result.checkpoint.iterations << '\n';
    return 0;
}

int cmd_eval(const RunConfig& cfg, const Options& o, const fs::path& dir, std::ostream& out) {
    const fs::path ckpt_path = o.checkpoint.empty() ? dir / "checkpoint.sddpg" : fs::path(o.checkpoint);
    const AgentCheckpoint ckpt = load_checkpoint(ckpt_path);
    const DataSplit split = load_split(cfg.data);
    const auto ev = evaluate(ckpt, split.test, cfg.training.paper_mode);
    write_text(dir / "eval_steps.csv", [&](std::ostream& s) { write_step_table(s, ev.steps); });
    write_eval_weeks(dir / "eval_weeks.csv", ev);
    for (std::size_t i = 0; i < ev.episode_rewards.size(); ++i)
        out << "week " << format_date(ev.episode_starts[i]) << " reward=" << fixed4(ev.episode_rewards[i]) << '\n';
    out << "eval episodes=" << ev.episode_rewards.size() << " mean_reward=" << fixed4(ev.mean_reward) << '\n';
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    const DataSplit split = load_split(cfg.data);
    const auto sweep = battery_size_sweep(cfg, split, cfg.sweep.sizes, dir);
    write_text(dir / "sweep.csv", [&](std::ostream& o) { write_sweep_table(o, sweep); });
    write_text(dir / "timing.csv", [&](std::ostream& o) {
        o << "capacity,wall_time\n";
        for (std::size_t i = 0; i < sweep.entries.size(); ++i)
            o << text::format_double(sweep.entries[i].capacity) << ',' << text::format_double(sweep.trials[i].wall_time) << '\n';
    });
    std::vector<double> caps, rewards;
    for (const auto& e : sweep.entries) {
        caps.push_back(e.capacity);
        rewards.push_back(e.test_reward);
        out << "size capacity=" << text::format_double(e.capacity) << " status=" << trial_status_name(e.status)
            << " reward=" << fixed4(e.test_reward) << " oracle_cost=" << fixed4(e.oracle_cost)
            << " no_battery_cost=" << fixed4(e.no_battery_cost) << '\n';
    }
    if (caps.size() >= 2) out << "sweep sizes=" << caps.size() << " spearman=" << fixed4(spearman(caps, rewards)) << '\n';
    return 0;
}

int cmd_tune(const RunConfig& cfg, const Options& o, const fs::path& dir, std::ostream& out) {
    const DataSplit split = load_split(cfg.data);
    const std::size_t budget = o.trials ? o.trials : cfg.search.trials;
    std::vector<SearchTrial> ranked;
    try {
        ranked = hyperparameter_search(cfg, split, budget, dir);
    } catch (const NumericError&) {
        out << "tune failed: every trial diverged; see " << (dir / "ranked_trials.csv").string() << '\n';
        throw;
    }
    write_text(dir / "timing.csv", [&](std::ostream& s) {
        s << "trial,wall_time\n";
        auto by_index = ranked;
        std::sort(by_index.begin(), by_index.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
        for (const auto& t : by_index) s << t.index << ',' << text::format_double(t.result.wall_time) << '\n';
    });
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const auto& t = ranked[r];
        out << "rank " << r + 1 << " trial=" << t.index << " lr=" << text::format_double(t.result.hyperparams.actor_lr)
            << " actor=" << format_layers(t.result.hyperparams.actor_hiddens)
            << " critic=" << format_layers(t.result.hyperparams.critic_hiddens)
            << " reward=" << fixed4(t.result.mean_episode_reward) << " status=" << trial_status_name(t.result.status)
            << '\n';
    }
    out << "tune trials=" << ranked.size() << " spread=" << fixed4(reward_spread(ranked)) << '\n';
    return 0;
}

int cmd_oracle(const RunConfig& cfg, const fs::path& dir, std::ostream& out) {
    const DataSplit split = load_split(cfg.data);
    const std::vector<WeekTrace>& weeks = split.test;
    json rows = json::array();
    double total_nb = 0, total_g = 0, total_dp = 0;
    std::vector<std::string> lines;
    auto handle = [&](const std::string& start, std::span<const HalfHourRecord> trace) {
        const double nb = no_battery_cost(trace, cfg.env);
        const double g = rollout(cfg.env, trace, make_greedy_policy(cfg.env)).total_cost;
        const double dp = perfect_foresight_dp(trace, cfg.env, cfg.oracle.soc_levels, cfg.oracle.action_levels).total_cost;
        total_nb += nb, total_g += g, total_dp += dp;
        lines.push_back(start + ',' + text::format_double(nb) + ',' + text::format_double(g) + ',' + text::format_double(dp));
        out << "week " << start << " no_battery=" << fixed2(nb) << " greedy=" << fixed2(g) << " cost=" << fixed2(dp) << '\n';
    };
    if (cfg.training.paper_mode) {
        const auto all = concat_weeks(weeks);
        handle(format_date(weeks.front().start_date()), all);
    } else {
        for (const auto& w : weeks) handle(format_date(w.start_date()), w.records());
    }
    write_text(dir / "oracle.csv", [&](std::ostream& o) {
        o << "episode_start,no_battery_cost,greedy_cost,oracle_cost\n";
        for (const auto& l : lines) o << l << '\n';
    });
    const double n = static_cast<double>(lines.size());
    out << "oracle episodes=" << lines.size() << " mean_no_battery=" << fixed2(total_nb / n)
        << " mean_greedy=" << fixed2(total_g / n) << " mean_cost=" << fixed2(total_dp / n) << '\n';
    return 0;
}

int cmd_export_plots(const fs::path& run_dir, const fs::path& dir, std::ostream& out, std::ostream& err) {
    const auto ex = export_plots(run_dir, dir);
    if (!ex.missing.empty()) {
        std::string files;
        for (const auto& m : ex.missing) files += (files.empty() ? "" : ";") + m.string();
        err << "error kind=missing_input files=" << quote(files) << " message="
            << quote("run directory lacks " + std::to_string(ex.missing.size()) + " required file(s)") << '\n';
        return 2;
    }
    for (const auto& p : ex.written) out << "wrote " << p.string() << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Solar battery dispatch with DDPG", "solar-ddpg"};
    app.require_subcommand(1);
    Options o;

    const std::vector<std::pair<std::string, std::string>> verbs{
        {"ingest", "Load, filter and split the data"},
        {"train", "Train one agent and evaluate it on the test weeks"},
        {"eval", "Evaluate a checkpoint on the test weeks"},
        {"sweep", "Train and evaluate one agent per battery size"},
        {"tune", "Hyperparameter search over the configured space"},
        {"oracle", "Reference costs: no battery, rule-based, perfect foresight"},
        {"export-plots", "Write figure datasets from a run directory"}};
    for (const auto& [name, help] : verbs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", o.config_path, "Run configuration (JSON) or a run manifest");
        sub->add_option("-s,--set", o.overrides, "Override, dotted key path: agent.actor_lr=0.001");
        sub->add_option("-o,--out", o.out_dir, "Output directory");
        if (name == "eval") sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
        if (name == "tune") sub->add_option("--trials", o.trials, "Trial budget (default search.trials)");
        if (name == "export-plots") sub->add_option("--run-dir", o.run_dir, "Directory of a train or sweep run");
        sub->callback([&o, name = name] { o.verb = name; });
    }

    if (!args.empty() && !args[0].empty() && args[0][0] != '-' &&
        std::none_of(verbs.begin(), verbs.end(), [&](const auto& v) { return v.first == args[0]; })) {
        err << "error kind=usage_error message=" << quote("unknown verb '" + args[0] + "'") << '\n';
        return 2;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error kind=usage_error message=" << quote(e.what()) << '\n';
        return 2;
    }

    try {
        const RunConfig cfg = o.config_path.empty() ? make_run_config(o.overrides) : load_run_config(o.config_path, o.overrides);
        const fs::path dir = resolve_out_dir(o, cfg);
        fs::path run_dir;
        fs::path write_dir = dir;
        if (o.verb == "export-plots") {
            run_dir = o.run_dir.empty() ? dir : fs::path(o.run_dir);
            write_dir = o.out_dir.empty() ? run_dir / "plots" : dir;
        }
        fs::create_directories(write_dir);
        write_manifest(write_dir, o, cfg);

        if (o.verb == "ingest") return cmd_ingest(cfg, write_dir, out);
        if (o.verb == "train") return cmd_train(cfg, write_dir, out);
        if (o.verb == "eval") return cmd_eval(cfg, o, write_dir, out);
        if (o.verb == "sweep") return cmd_sweep(cfg, write_dir, out);
        if (o.verb == "tune") return cmd_tune(cfg, o, write_dir, out);
        if (o.verb == "oracle") return cmd_oracle(cfg, write_dir, out);
        return cmd_export_plots(run_dir, write_dir, out, err);
    } catch (const ConfigError& e) {
        err << "error kind=" << e.kind();
        if (!e.key_path().empty()) err << " path=" << e.key_path();
        err << " message=" << quote(e.what()) << '\n';
        return 2;
    } catch (const NotFoundError& e) {
        err << "error kind=" << e.kind() << " message=" << quote(e.what()) << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error kind=" << e.kind() << " message=" << quote(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error kind=internal message=" << quote(e.what()) << '\n';
        return 1;
    }
}

}  // namespace solar_ddpg

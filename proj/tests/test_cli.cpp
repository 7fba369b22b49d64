#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "solar_ddpg/cli.hpp"
#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/run_config.hpp"

using namespace solar_ddpg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int status;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int status = run_cli(args, out, err);
    return {status, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("solar_ddpg_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const std::vector<std::string> kSmall{"-s", "agent.actor_hiddens=[16,16]", "-s", "agent.critic_hiddens=[16,16]",
                                      "-s", "agent.batch_size=16",          "-s", "agent.training_iterations=400",
                                      "-s", "training.eval_interval=200"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("run config json") {
    RunConfig defaults;
    auto back = run_config_from_json(run_config_to_json(defaults));
    CHECK(run_config_to_json(back) == run_config_to_json(defaults));
    CHECK(back.agent == defaults.agent);

    auto expect_path = [](const json& j, const std::string& path) {
        try {
            run_config_from_json(j);
            FAIL("expected ConfigError for " << path);
        } catch (const ConfigError& e) {
            CHECK(e.key_path() == path);
        }
    };
    expect_path(json{{"agent", {{"actor_lr", "fast"}}}}, "agent.actor_lr");
    expect_path(json{{"agent", {{"actor_lr", 0.0}}}}, "agent.actor_lr");
    expect_path(json{{"agent", {{"batch_size", 2.5}}}}, "agent.batch_size");
    expect_path(json{{"env", {{"capacity", -1}}}}, "env.capacity");
    expect_path(json{{"env", {{"voltage", 230}}}}, "env.voltage");
    expect_path(json{{"search", {{"critic_hiddens", json::array()}}}}, "search.critic_hiddens");
    expect_path(json{{"sweep", {{"sizes", {1.0, 0.5}}}}}, "sweep.sizes");
    expect_path(json{{"data", {{"source", "ausgrid"}}}}, "data.path");
    expect_path(json{{"colour", "blue"}}, "colour");

    json doc = json::object();
    apply_override(doc, "agent.actor_hiddens=[64,64]");
    apply_override(doc, "data.source=ausgrid");
    apply_override(doc, "data.path=/tmp/x.csv");
    apply_override(doc, "env.solar_serves_cl=false");
    auto c = run_config_from_json(doc);
    CHECK(c.agent.actor_hiddens == std::vector<int>{64, 64});
    CHECK(c.data.source == DataSource::Ausgrid);
    CHECK(!c.env.solar_serves_cl);
    CHECK_THROWS_AS(apply_override(doc, "agent.nope=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "agent.actor_lr"), ConfigError);
}

TEST_CASE("cli errors") {
    auto r = cli({"frobnicate"});
    CHECK(r.status == 2);
    CHECK(r.err.find("kind=usage_error") != std::string::npos);

    auto dir = scratch("errors");
    r = cli({"train", "-o", dir.string(), "-s", "agent.gamma=7"});
    CHECK(r.status == 2);
    CHECK(r.err.find("path=agent.gamma") != std::string::npos);

    r = cli({"eval", "-o", dir.string(), "--checkpoint", (dir / "missing.sddpg").string()});
    CHECK(r.status == 2);
    CHECK(r.err.find("kind=not_found") != std::string::npos);

    r = cli({"train", "-o", dir.string(), "-s", "data.source=ausgrid", "-s", "data.path=" + (dir / "none.csv").string()});
    CHECK(r.status == 2);

    r = cli({"export-plots", "--run-dir", (dir / "empty").string(), "-o", (dir / "plots").string()});
    CHECK(r.status == 2);
    CHECK(r.err.find("sweep.csv") != std::string::npos);

    // A runtime failure reports its class with status 1.
    {
        std::ofstream bad(dir / "garbage.sddpg");
        bad << "not a checkpoint";
    }
    r = cli({"eval", "-o", dir.string(), "--checkpoint", (dir / "garbage.sddpg").string()});
    CHECK(r.status == 1);
    CHECK(r.err.find("kind=format_error") != std::string::npos);
}

TEST_CASE("cli oracle on a zero week") {
    auto dir = scratch("oracle");
    auto r = cli({"oracle", "-o", dir.string(), "-s", "data.profile.peak_solar=0", "-s", "data.profile.base_demand=0",
                  "-s", "data.profile.evening_peak=0", "-s", "data.profile.controlled_load=0", "-s",
                  "data.profile.noise=0"});
    REQUIRE(r.status == 0);
    CHECK(r.out.find("mean_cost=0.00") != std::string::npos);
    CHECK(r.out.find("no_battery=0.00 ") != std::string::npos);
    CHECK(fs::exists(dir / "oracle.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("cli train is reproducible from its manifest") {
    auto dir = scratch("repro");
    auto r = cli(with({"train", "-o", (dir / "a").string()}, kSmall));
    REQUIRE(r.status == 0);
    CHECK(r.out.find("trial status=completed") != std::string::npos);
    for (const char* f : {"checkpoint.sddpg", "training_log.csv", "eval_steps.csv", "eval_weeks.csv", "result.json",
                          "manifest.json"})
        CHECK(fs::exists(dir / "a" / f));

    auto again = cli({"train", "--config", (dir / "a" / "manifest.json").string(), "-o", (dir / "b").string()});
    REQUIRE(again.status == 0);
    CHECK(slurp(dir / "a" / "training_log.csv") == slurp(dir / "b" / "training_log.csv"));
    CHECK(slurp(dir / "a" / "checkpoint.sddpg") == slurp(dir / "b" / "checkpoint.sddpg"));
    CHECK(slurp(dir / "a" / "eval_steps.csv") == slurp(dir / "b" / "eval_steps.csv"));

    auto ev = cli({"eval", "-o", (dir / "c").string(), "--checkpoint", (dir / "a" / "checkpoint.sddpg").string()});
    REQUIRE(ev.status == 0);
    CHECK(slurp(dir / "a" / "eval_weeks.csv") == slurp(dir / "c" / "eval_weeks.csv"));

    auto plots = cli({"export-plots", "--run-dir", (dir / "a").string()});
    REQUIRE(plots.status == 0);
    CHECK(fs::exists(dir / "a" / "plots" / "fig5_daily_profile.csv"));
}

TEST_CASE("cli tune with the default search space writes 72 ranked rows") {
    auto dir = scratch("tune");
    auto r = cli({"tune", "-o", dir.string(), "-s", "agent.training_iterations=0"});
    REQUIRE(r.status == 0);
    std::ifstream in(dir / "ranked_trials.csv");
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    CHECK(line == "rank,trial,lr,actor_hiddens,critic_hiddens,mean_episode_reward,status,seed");
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 72);
}

TEST_CASE("cli ingest leaves the input untouched") {
    auto dir = scratch("ingest");
    const fs::path fixture = fs::path(SOLAR_DDPG_FIXTURES) / "ausgrid_fixture.csv";
    const std::string before = slurp(fixture);
    const auto mtime = fs::last_write_time(fixture);
    auto r = cli({"ingest", "-o", dir.string(), "-s", "data.source=ausgrid", "-s", "data.path=" + fixture.string()});
    REQUIRE(r.status == 0);
    CHECK(r.out.find("ingest weeks=15 train=8 test=7") != std::string::npos);
    CHECK(slurp(fixture) == before);
    CHECK(fs::last_write_time(fixture) == mtime);
    CHECK(fs::exists(dir / "train.csv"));
    auto split = json::parse(slurp(dir / "split.json"));
    CHECK(split["train"].size() == 8);
}

TEST_CASE("cli default output root comes from the environment") {
    auto dir = scratch("envroot");
    ::setenv(kOutputRootEnv, dir.string().c_str(), 1);
    auto r = cli({"oracle", "-s", "data.synthetic_weeks=3", "-s", "data.n_train=2"});
    ::unsetenv(kOutputRootEnv);
    REQUIRE(r.status == 0);
    CHECK(fs::exists(dir / "oracle" / "manifest.json"));
}

#include "solar_ddpg/plots.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/experiment.hpp"
#include "solar_ddpg/text_util.hpp"

namespace solar_ddpg {

namespace fs = std::filesystem;

std::vector<ProfileRow> daily_profile(std::span<const StepRecord> steps) {
    static constexpr std::array<const char*, 4> kSeries{"gc", "charge", "discharge", "solar"};
    std::array<std::array<double, kSlotsPerDay>, 4> sum{}, sq{};
    std::array<std::size_t, kSlotsPerDay> count{};
    // Two passes keep the variance well conditioned.
    auto value = [](const StepRecord& s, std::size_t k) {
        switch (k) {
            case 0: return s.record.gc;
            case 1: return s.charge;
            case 2: return s.settlement.discharge_to_gc + s.settlement.discharge_to_cl;
            default: return s.record.cs;
        }
    };
    for (const auto& s : steps) {
        ++count[static_cast<std::size_t>(s.record.time.slot)];
        for (std::size_t k = 0; k < 4; ++k) sum[k][static_cast<std::size_t>(s.record.time.slot)] += value(s, k);
    }
    std::array<std::array<double, kSlotsPerDay>, 4> mean{};
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t t = 0; t < kSlotsPerDay; ++t) mean[k][t] = count[t] ? sum[k][t] / static_cast<double>(count[t]) : 0.0;
    for (const auto& s : steps) {
        const auto t = static_cast<std::size_t>(s.record.time.slot);
        for (std::size_t k = 0; k < 4; ++k) sq[k][t] += (value(s, k) - mean[k][t]) * (value(s, k) - mean[k][t]);
    }
    std::vector<ProfileRow> rows;
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t t = 0; t < kSlotsPerDay; ++t)
            rows.push_back({kSeries[k], static_cast<int>(t), mean[k][t],
                            count[t] ? std::sqrt(sq[k][t] / static_cast<double>(count[t])) : 0.0, count[t]});
    return rows;
}

namespace {

struct RunEntry {
    std::string capacity_text;
    double capacity = 0.0;
    double test_reward = 0.0;
    double oracle_cost = 0.0;
    double no_battery_cost = 0.0;
    fs::path dir;
};

std::vector<RunEntry> read_sweep(const fs::path& file, const fs::path& root) {
    std::ifstream in(file);
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "capacity,test_reward,oracle_cost,greedy_cost,no_battery_cost,status,seed")
        throw FormatError(file.string() + ": unexpected header");
    std::vector<RunEntry> out;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        auto cols = text::split(text::trim(line));
        if (cols.size() != 7) throw FormatError(file.string() + ": expected 7 columns");
        RunEntry e;
        e.capacity_text = std::string(text::trim(cols[0]));
        auto cap = text::parse_double(cols[0]);
        auto rew = text::parse_double(cols[1]);
        auto orc = text::parse_double(cols[2]);
        auto nob = text::parse_double(cols[4]);
        if (!cap || !rew || !orc || !nob) throw FormatError(file.string() + ": bad number");
        e.capacity = *cap;
        e.test_reward = *rew;
        e.oracle_cost = *orc;
        e.no_battery_cost = *nob;
        e.dir = root / ("size_" + e.capacity_text);
        out.push_back(std::move(e));
    }
    return out;
}

RunEntry read_result(const fs::path& file, const fs::path& root) {
    std::ifstream in(file);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(file.string() + ": not valid JSON");
    try {
        RunEntry e;
        e.capacity = j.at("capacity").get<double>();
        e.capacity_text = text::format_double(e.capacity);
        e.test_reward = j.at("mean_episode_reward").get<double>();
        e.oracle_cost = j.at("oracle_cost").get<double>();
        e.no_battery_cost = j.at("no_battery_cost").get<double>();
        e.dir = root;
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(file.string() + ": " + ex.what());
    }
}

std::string slot_time(int slot) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%02d:%02d", slot / 2, (slot % 2) * 30);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

}  // namespace

PlotExport export_plots(const fs::path& run_dir, const fs::path& out_dir) {
    PlotExport ex;
    std::vector<RunEntry> runs;
    const fs::path sweep_file = run_dir / "sweep.csv";
    const fs::path result_file = run_dir / "result.json";
    if (fs::exists(sweep_file)) {
        runs = read_sweep(sweep_file, run_dir);
    } else if (fs::exists(result_file)) {
        runs.push_back(read_result(result_file, run_dir));
    } else {
        ex.missing.push_back(sweep_file);
        ex.missing.push_back(result_file);
        return ex;
    }
    if (runs.empty()) throw FormatError(sweep_file.string() + ": no rows");

    std::size_t profile_run = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (std::abs(runs[i].capacity - 1.0) < std::abs(runs[profile_run].capacity - 1.0)) profile_run = i;

    for (const auto& r : runs)
        if (!fs::exists(r.dir / "training_log.csv")) ex.missing.push_back(r.dir / "training_log.csv");
    if (!fs::exists(runs[profile_run].dir / "eval_steps.csv")) ex.missing.push_back(runs[profile_run].dir / "eval_steps.csv");
    if (!ex.missing.empty()) return ex;

    fs::create_directories(out_dir);

    const fs::path fig3 = out_dir / "fig3_training_curves.csv";
    {
        auto out = open_out(fig3);
        out << "capacity,iteration,validation_reward,mean_train_reward\n";
        for (const auto& r : runs) {
            std::ifstream in(r.dir / "training_log.csv");
            for (const auto& p : read_training_log(in))
                out << r.capacity_text << ',' << p.iteration << ',' << text::format_double(p.validation_reward) << ','
                    << text::format_double(p.mean_train_reward) << '\n';
        }
    }
    ex.written.push_back(fig3);

    const fs::path fig4 = out_dir / "fig4_test_reward.csv";
    {
        auto out = open_out(fig4);
        out << "capacity,test_reward,oracle_cost,no_battery_cost\n";
        for (const auto& r : runs)
            out << r.capacity_text << ',' << text::format_double(r.test_reward) << ','
                << text::format_double(r.oracle_cost) << ',' << text::format_double(r.no_battery_cost) << '\n';
    }
    ex.written.push_back(fig4);

    const fs::path fig5 = out_dir / "fig5_daily_profile.csv";
    {
        std::ifstream in(runs[profile_run].dir / "eval_steps.csv");
        const auto steps = read_step_table(in);
        auto out = open_out(fig5);
        out << "series,slot,time,mean,std,count\n";
        for (const auto& row : daily_profile(steps))
            out << row.series << ',' << row.slot << ',' << slot_time(row.slot) << ',' << text::format_double(row.mean)
                << ',' << text::format_double(row.std) << ',' << row.count << '\n';
    }
    ex.written.push_back(fig5);
    return ex;
}

}  // namespace solar_ddpg

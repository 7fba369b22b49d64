#include "solar_ddpg/battery_env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/text_util.hpp"

namespace solar_ddpg {

namespace {
// Slack allowed when checking a clipped action against its bounds.
constexpr double kFeasibilityTol = 1e-12;
}  // namespace

void EnvConfig::validate() const {
    if (!(capacity > 0.0) || !std::isfinite(capacity)) throw ConfigError("env.capacity must be positive");
    if (!(tariff_gc >= 0.0) || !(tariff_cl >= 0.0)) throw ConfigError("env tariffs must be non-negative");
    if (window_start < 0 || window_start >= kSlotsPerDay || window_end < 0 || window_end >= kSlotsPerDay)
        throw ConfigError("env window slots must lie in [0, 47]");
    if (window_start == window_end) throw ConfigError("env controlled-load window must be non-empty");
}

bool is_controlled_window(int slot, int window_start, int window_end) {
    if (slot < 0 || slot >= kSlotsPerDay) throw DomainError("slot " + std::to_string(slot) + " outside [0, 47]");
    if (window_start <= window_end) return slot >= window_start && slot < window_end;
    return slot >= window_start || slot < window_end;
}

bool is_controlled_window(int slot) { return is_controlled_window(slot, 46, 16); }

bool is_controlled_window(int slot, const EnvConfig& config) {
    return is_controlled_window(slot, config.window_start, config.window_end);
}

Action clip_action(const Action& raw, const BatteryState& state, const HalfHourRecord& record, bool in_window) {
    const double headroom = std::max(0.0, state.capacity - state.charge);
    Action out;
    out.charge_solar = std::min({raw.charge_solar, record.cs, headroom});
    out.charge_grid = in_window ? std::min(raw.charge_grid, std::max(0.0, headroom - out.charge_solar)) : 0.0;
    out.discharge = std::min(raw.discharge, state.charge + out.charge_solar + out.charge_grid);
    out.charge_solar = std::max(0.0, out.charge_solar);
    out.charge_grid = std::max(0.0, out.charge_grid);
    out.discharge = std::max(0.0, out.discharge);
    return out;
}

double settlement_cost(const Settlement& s, const EnvConfig& config) {
    return config.tariff_gc * s.residual_gc + config.tariff_cl * s.residual_cl + config.tariff_cl * s.grid_to_battery;
}

std::pair<BatteryState, Settlement> settle(const BatteryState& state, const HalfHourRecord& record,
                                           const Action& clipped, const EnvConfig& config, bool in_window) {
    const double headroom = state.capacity - state.charge;
    const bool feasible = clipped.charge_solar >= 0.0 && clipped.charge_grid >= 0.0 && clipped.discharge >= 0.0 &&
                          clipped.charge_solar <= std::min(record.cs, headroom) + kFeasibilityTol &&
                          (in_window || clipped.charge_grid == 0.0) &&
                          clipped.charge_solar + clipped.charge_grid <= headroom + kFeasibilityTol &&
                          clipped.discharge <= state.charge + clipped.charge_solar + clipped.charge_grid + kFeasibilityTol;
    if (!feasible) throw ContractViolation("settle called with an action outside the clip bounds");

    Settlement s;
    s.solar_to_battery = clipped.charge_solar;
    s.grid_to_battery = clipped.charge_grid;

    double leftover_solar = std::max(0.0, record.cs - s.solar_to_battery);
    const double solar_gc = std::min(leftover_solar, record.gc);
    leftover_solar -= solar_gc;
    const double solar_cl = config.solar_serves_cl ? std::min(leftover_solar, record.cl) : 0.0;
    leftover_solar -= solar_cl;
    s.solar_to_load = solar_gc + solar_cl;
    s.spilled_solar = leftover_solar;

    const double gc_left = record.gc - solar_gc;
    const double cl_left = record.cl - solar_cl;
    s.discharge_to_gc = std::min(clipped.discharge, gc_left);
    s.discharge_to_cl = std::min(clipped.discharge - s.discharge_to_gc, cl_left);
    s.residual_gc = gc_left - s.discharge_to_gc;
    s.residual_cl = cl_left - s.discharge_to_cl;
    s.cost = settlement_cost(s, config);

    BatteryState next = state;
    next.charge = state.charge + s.solar_to_battery + s.grid_to_battery - s.discharge_to_gc - s.discharge_to_cl;
    next.charge = std::clamp(next.charge, 0.0, state.capacity);
    return {next, s};
}

BatteryEnv::BatteryEnv(EnvConfig config, std::vector<HalfHourRecord> trace)
    : config_(config), trace_(std::move(trace)) {
    config_.validate();
    battery_.capacity = config_.capacity;
}

const HalfHourRecord& BatteryEnv::current_record() const {
    if (done()) throw ProtocolError("episode finished");
    return trace_[t_];
}

Observation BatteryEnv::observe() const {
    Observation o;
    o.capacity = battery_.capacity;
    o.charge = battery_.charge;
    if (t_ < trace_.size()) {
        o.gc = trace_[t_].gc;
        o.cl = trace_[t_].cl;
        o.cs = trace_[t_].cs;
    }
    o.residual_cl = residual_cl_;
    o.residual_gc = residual_gc_;
    return o;
}

Observation BatteryEnv::reset() {
    if (trace_.empty()) throw ConfigError("episode trace is empty");
    battery_ = {config_.capacity, 0.0};
    t_ = 0;
    residual_gc_ = 0.0;
    residual_cl_ = 0.0;
    return observe();
}

StepResult BatteryEnv::step(const Action& raw) {
    if (trace_.empty()) throw ConfigError("episode trace is empty");
    if (done()) throw ProtocolError("step called after the episode finished");
    for (double v : {raw.charge_solar, raw.charge_grid, raw.discharge})
        if (!std::isfinite(v) || v < 0.0) throw PolicyError("action components must be finite and non-negative");

    const auto& rec = trace_[t_];
    const bool in_window = is_controlled_window(rec.time.slot, config_);
    const Action clipped = clip_action(raw, battery_, rec, in_window);
    auto [next, s] = settle(battery_, rec, clipped, config_, in_window);

    battery_ = next;
    residual_gc_ = s.residual_gc;
    residual_cl_ = s.residual_cl;
    ++t_;

    StepResult out;
    out.settlement = s;
    out.reward = -s.cost;
    out.done = done();
    out.observation = observe();  // past the end, gc/cl/cs read as zero
    out.applied = clipped;
    return out;
}

Action null_action() { return {}; }

RolloutResult rollout(const EnvConfig& config, std::span<const HalfHourRecord> trace, const Policy& policy) {
    BatteryEnv env(config, std::vector<HalfHourRecord>(trace.begin(), trace.end()));
    RolloutResult result;
    result.steps.reserve(trace.size());
    Observation obs = env.reset();
    while (!env.done()) {
        const auto& rec = env.current_record();
        StepResult sr = env.step(policy(obs, rec.time));
        result.total_cost += sr.settlement.cost;
        result.steps.push_back({rec, sr.settlement, sr.reward, env.battery().charge, sr.applied});
        obs = sr.observation;
    }
    return result;
}

namespace {
constexpr const char* kStepHeader =
    "timestamp,gc,cl,cs,charge_solar,charge_grid,discharge,solar_to_battery,grid_to_battery,solar_to_load,"
    "discharge_to_gc,discharge_to_cl,residual_gc,residual_cl,spilled_solar,cost,reward,charge";
}

void write_step_table(std::ostream& out, std::span<const StepRecord> steps) {
    out << kStepHeader << '\n';
    using text::format_double;
    for (const auto& r : steps) {
        const auto& s = r.settlement;
        out << format_timestamp(r.record.time);
        for (double v : {r.record.gc, r.record.cl, r.record.cs, r.action.charge_solar, r.action.charge_grid,
                         r.action.discharge, s.solar_to_battery, s.grid_to_battery, s.solar_to_load,
                         s.discharge_to_gc, s.discharge_to_cl, s.residual_gc, s.residual_cl, s.spilled_solar, s.cost,
                         r.reward, r.charge})
            out << ',' << format_double(v);
        out << '\n';
    }
}

std::vector<StepRecord> read_step_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != kStepHeader) throw FormatError("unexpected step table header");
    std::vector<StepRecord> rows;
    while (std::getline(in, line)) {
        auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        auto cols = text::split(trimmed);
        if (cols.size() != 18) throw FormatError("step table row must have 18 columns");
        StepRecord r;
        r.record.time = parse_timestamp(std::string(cols[0]));
        auto& s = r.settlement;
        double* fields[] = {&r.record.gc,       &r.record.cl,        &r.record.cs,       &r.action.charge_solar,
                            &r.action.charge_grid, &r.action.discharge, &s.solar_to_battery, &s.grid_to_battery,
                            &s.solar_to_load,   &s.discharge_to_gc,  &s.discharge_to_cl, &s.residual_gc,
                            &s.residual_cl,     &s.spilled_solar,    &s.cost,            &r.reward,
                            &r.charge};
        for (std::size_t i = 0; i < 17; ++i) {
            auto v = text::parse_double(cols[i + 1]);
            if (!v) throw FormatError("step table: bad number");
            *fields[i] = *v;
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace solar_ddpg

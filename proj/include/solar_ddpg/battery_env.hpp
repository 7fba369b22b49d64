#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "solar_ddpg/data_ingest.hpp"

namespace solar_ddpg {

struct BatteryState {
    double capacity = 1.0;  // kWh
    double charge = 0.0;    // kWh, 0 <= charge <= capacity
};

// Energy requests in kWh; the environment clips them to what is feasible.
struct Action {
    double charge_solar = 0.0;
    double charge_grid = 0.0;
    double discharge = 0.0;

    bool operator==(const Action&) const = default;
};

struct Observation {
    double capacity = 0.0;
    double charge = 0.0;
    double gc = 0.0;
    double cl = 0.0;
    double cs = 0.0;
    double residual_cl = 0.0;  // unmet controlled load of the previous step
    double residual_gc = 0.0;  // unmet general load of the previous step

    static constexpr int kSize = 7;
    bool operator==(const Observation&) const = default;
};

struct Settlement {
    double solar_to_battery = 0.0;
    double grid_to_battery = 0.0;
    double solar_to_load = 0.0;
    double discharge_to_gc = 0.0;
    double discharge_to_cl = 0.0;
    double residual_gc = 0.0;
    double residual_cl = 0.0;
    double spilled_solar = 0.0;
    double cost = 0.0;  // AUD
};

struct EnvConfig {
    double capacity = 1.0;
    double tariff_gc = 0.27;
    double tariff_cl = 0.10;
    int window_start = 46;  // 23:00
    int window_end = 16;    // 08:00, exclusive
    bool solar_serves_cl = true;

    void validate() const;
};

/// Half-open, possibly wrapping window [start, end) on slot start times.
bool is_controlled_window(int slot, int window_start, int window_end);
bool is_controlled_window(int slot);
bool is_controlled_window(int slot, const EnvConfig& config);

/// Solar first, then grid (only inside the window), then discharge bounded by
/// what the battery will hold after charging.
Action clip_action(const Action& raw, const BatteryState& state, const HalfHourRecord& record, bool in_window);

/// Settles one half-hour in the fixed order: charge from solar, charge from
/// grid, leftover solar to GC then CL (surplus spilled), discharge to GC then
/// CL. Throws ContractViolation if `clipped` exceeds the clip bounds.
std::pair<BatteryState, Settlement> settle(const BatteryState& state, const HalfHourRecord& record,
                                           const Action& clipped, const EnvConfig& config, bool in_window);

// Recomputes the tariff cost from the settlement's energy fields.
double settlement_cost(const Settlement& s, const EnvConfig& config);

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    Settlement settlement;
    Action applied;  // the clipped action
};

class BatteryEnv {
public:
    BatteryEnv(EnvConfig config, std::vector<HalfHourRecord> trace);
    BatteryEnv(EnvConfig config, const WeekTrace& week)
        : BatteryEnv(config, std::vector<HalfHourRecord>(week.records().begin(), week.records().end())) {}

    Observation reset();
    StepResult step(const Action& raw);

    const EnvConfig& config() const { return config_; }
    const BatteryState& battery() const { return battery_; }
    std::size_t position() const { return t_; }
    std::size_t horizon() const { return trace_.size(); }
    bool done() const { return t_ >= trace_.size(); }
    const HalfHourRecord& current_record() const;
    std::span<const HalfHourRecord> trace() const { return trace_; }

private:
    Observation observe() const;

    EnvConfig config_;
    std::vector<HalfHourRecord> trace_;
    BatteryState battery_;
    std::size_t t_ = 0;
    double residual_gc_ = 0.0;
    double residual_cl_ = 0.0;
};

// One settled step as exported for plotting.
struct StepRecord {
    HalfHourRecord record;
    Settlement settlement;
    double reward = 0.0;
    double charge = 0.0;  // after the step
    Action action;        // clipped action actually applied
};

struct RolloutResult {
    double total_cost = 0.0;
    std::vector<StepRecord> steps;
};

// The step's timestamp is passed so rule-based policies can see the tariff window.
using Policy = std::function<Action(const Observation&, const Timestamp&)>;

RolloutResult rollout(const EnvConfig& config, std::span<const HalfHourRecord> trace, const Policy& policy);

Action null_action();

void write_step_table(std::ostream& out, std::span<const StepRecord> steps);
std::vector<StepRecord> read_step_table(std::istream& in);

}  // namespace solar_ddpg

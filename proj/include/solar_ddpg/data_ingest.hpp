#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace solar_ddpg {

inline constexpr int kSlotsPerDay = 48;
inline constexpr int kSlotsPerWeek = 7 * kSlotsPerDay;

// Calendar day plus half-hour slot; slot k covers [k*30min, (k+1)*30min).
struct Timestamp {
    std::chrono::sys_days day{};
    int slot = 0;

    auto operator<=>(const Timestamp&) const = default;

    // Minutes since the Unix epoch of the slot start.
    std::int64_t minutes() const;
    Timestamp next() const;
};

std::string format_date(std::chrono::sys_days day);   // YYYY-MM-DD
std::string format_timestamp(const Timestamp& t);     // YYYY-MM-DD HH:MM
Timestamp parse_timestamp(const std::string& text);   // inverse of format_timestamp

// One half-hour of household energy flows, kWh each.
struct HalfHourRecord {
    Timestamp time;
    double gc = 0.0;  // general consumption
    double cl = 0.0;  // controlled-load consumption
    double cs = 0.0;  // solar generation

    bool operator==(const HalfHourRecord&) const = default;
};

void validate_record(const HalfHourRecord& r);

// Seven contiguous Monday-anchored days, 336 records.
class WeekTrace {
public:
    explicit WeekTrace(std::vector<HalfHourRecord> records);

    std::chrono::sys_days start_date() const { return records_.front().time.day; }
    std::span<const HalfHourRecord> records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    bool operator==(const WeekTrace&) const = default;

private:
    std::vector<HalfHourRecord> records_;
};

struct DataSplit {
    std::vector<WeekTrace> train;
    std::vector<WeekTrace> test;
    std::uint64_t seed = 0;
};

using CustomerId = int;
using HouseholdMap = std::map<CustomerId, std::vector<HalfHourRecord>>;

/// Parse the Ausgrid solar-home layout:
///   Customer,Generator Capacity,Postcode,Consumption Category,date,0:30,...,23:30,0:00[,Row Quality]
/// A single free-text title line before the header is tolerated (the
/// published files carry one). Column `h:mm` holds the half-hour ending at
/// that time, so `0:30` is slot 0 and the trailing `0:00` is slot 47.
/// Categories GC, CL and GG (solar) for the same customer/date merge into
/// 48 records; a missing CL row means zero controlled load.
HouseholdMap parse_ausgrid_csv(std::istream& in);

/// Writes the same layout back (GC, CL, GG rows per date, no quality column).
void write_ausgrid_csv(std::ostream& out, const HouseholdMap& data);

std::vector<HalfHourRecord> select_household(const HouseholdMap& data, CustomerId customer);

/// Monday-to-Sunday weeks that start inside `year` and have all 336 slots.
std::vector<WeekTrace> filter_complete_weeks(std::span<const HalfHourRecord> records, int year);

DataSplit split_train_test(std::span<const WeekTrace> weeks, std::size_t n_train, std::uint64_t seed);

struct SyntheticProfile {
    double peak_solar = 0.6;       // kWh per half-hour at solar noon
    double base_demand = 0.15;     // kWh per half-hour, always on
    double evening_peak = 0.5;     // extra kWh per half-hour at the 19:00 peak
    double controlled_load = 0.3;  // kWh per half-hour in the 23:00-03:00 block
    double noise = 0.1;            // multiplicative noise amplitude in [0, 1)
};

/// Deterministic synthetic household weeks starting Monday 2013-01-07.
std::vector<WeekTrace> generate_synthetic_weeks(std::size_t n, const SyntheticProfile& profile,
                                                std::uint64_t seed);

// Normalized per-household format: header `timestamp,gc,cl,cs`, one row per slot.
void write_normalized_csv(std::ostream& out, std::span<const HalfHourRecord> records);
std::vector<HalfHourRecord> read_normalized_csv(std::istream& in);

// Concatenates weeks in order (for whole-split episodes).
std::vector<HalfHourRecord> concat_weeks(std::span<const WeekTrace> weeks);

}  // namespace solar_ddpg

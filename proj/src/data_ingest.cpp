#include "solar_ddpg/data_ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "solar_ddpg/errors.hpp"
#include "solar_ddpg/text_util.hpp"

namespace solar_ddpg {

using namespace std::chrono;

std::int64_t Timestamp::minutes() const {
    return static_cast<std::int64_t>(day.time_since_epoch().count()) * 24 * 60 + slot * 30;
}

Timestamp Timestamp::next() const {
    if (slot + 1 < kSlotsPerDay) return {day, slot + 1};
    return {day + days{1}, 0};
}

std::string format_date(sys_days day) {
    year_month_day ymd{day};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(const Timestamp& t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), " %02d:%02d", t.slot / 2, (t.slot % 2) * 30);
    return format_date(t.day) + buf;
}

Timestamp parse_timestamp(const std::string& text) {
    int y = 0, m = 0, d = 0, hh = 0, mm = 0;
    if (std::sscanf(text.c_str(), "%d-%d-%d %d:%d", &y, &m, &d, &hh, &mm) != 5)
        throw FormatError("bad timestamp '" + text + "'");
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh < 0 || hh > 23 || (mm != 0 && mm != 30))
        throw FormatError("bad timestamp '" + text + "'");
    return {sys_days{ymd}, hh * 2 + mm / 30};
}

void validate_record(const HalfHourRecord& r) {
    if (r.time.slot < 0 || r.time.slot >= kSlotsPerDay)
        throw ValidationError("slot index out of range in record at " + format_date(r.time.day));
    for (double v : {r.gc, r.cl, r.cs}) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("negative or non-finite energy in record at " + format_timestamp(r.time));
    }
}

WeekTrace::WeekTrace(std::vector<HalfHourRecord> records) : records_(std::move(records)) {
    if (records_.size() != static_cast<std::size_t>(kSlotsPerWeek))
        throw ValidationError("week trace must hold 336 records, got " + std::to_string(records_.size()));
    if (weekday{records_.front().time.day} != Monday || records_.front().time.slot != 0)
        throw ValidationError("week trace must start Monday 00:00");
    for (std::size_t i = 0; i < records_.size(); ++i) {
        validate_record(records_[i]);
        if (i > 0 && records_[i].time != records_[i - 1].time.next())
            throw ValidationError("week trace not contiguous at " + format_timestamp(records_[i].time));
    }
}

namespace {

std::string slot_end_label(int slot) {
    int end = (slot + 1) * 30;
    int h = (end / 60) % 24;
    int m = end % 60;
    return std::to_string(h) + ":" + (m == 0 ? "00" : "30");
}

std::vector<std::string> expected_header() {
    std::vector<std::string> h{"Customer", "Generator Capacity", "Postcode", "Consumption Category", "date"};
    for (int s = 0; s < kSlotsPerDay; ++s) h.push_back(slot_end_label(s));
    return h;
}

bool header_matches(const std::vector<std::string_view>& cols, bool& has_quality) {
    const auto expected = expected_header();
    if (cols.size() != expected.size() && cols.size() != expected.size() + 1) return false;
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (text::trim(cols[i]) != expected[i]) return false;
    has_quality = cols.size() == expected.size() + 1;
    return !has_quality || text::trim(cols.back()) == "Row Quality";
}

sys_days parse_dmy(std::string_view s, std::size_t line_no) {
    auto parts = text::split(text::trim(s), '/');
    if (parts.size() == 3) {
        auto d = text::parse_int(parts[0]);
        auto m = text::parse_int(parts[1]);
        auto y = text::parse_int(parts[2]);
        if (d && m && y) {
            year_month_day ymd{year{static_cast<int>(*y)}, month{static_cast<unsigned>(*m)},
                               day{static_cast<unsigned>(*d)}};
            if (ymd.ok()) return sys_days{ymd};
        }
    }
    throw FormatError("line " + std::to_string(line_no) + ": bad date '" + std::string(s) + "'");
}

enum class Category { GC, CL, GG };

struct DayRows {
    std::array<double, kSlotsPerDay> gc{};
    std::array<double, kSlotsPerDay> cl{};
    std::array<double, kSlotsPerDay> cs{};
    bool has_gc = false;
};

}  // namespace

HouseholdMap parse_ausgrid_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool has_quality = false;

    // Header, optionally preceded by one title line.
    bool found = false;
    for (int attempt = 0; attempt < 2 && !found; ++attempt) {
        if (!std::getline(in, line)) break;
        ++line_no;
        found = header_matches(text::split(text::trim(line)), has_quality);
    }
    if (!found) throw FormatError("missing or malformed Ausgrid header");

    const auto header = expected_header();
    std::map<CustomerId, std::map<sys_days, DayRows>> merged;
    std::set<std::tuple<CustomerId, int, sys_days>> seen;

    while (std::getline(in, line)) {
        ++line_no;
        auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        auto cols = text::split(trimmed);
        if (cols.size() != header.size() + (has_quality ? 1 : 0))
            throw FormatError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size() + (has_quality ? 1 : 0)) + " columns, got " +
                              std::to_string(cols.size()));
        auto customer = text::parse_int(cols[0]);
        if (!customer) throw FormatError("line " + std::to_string(line_no) + ": bad customer id");

        auto cat_text = text::trim(cols[3]);
        Category cat;
        if (cat_text == "GC") cat = Category::GC;
        else if (cat_text == "CL") cat = Category::CL;
        else if (cat_text == "GG") cat = Category::GG;
        else throw FormatError("line " + std::to_string(line_no) + ": unknown category '" + std::string(cat_text) + "'");

        sys_days date = parse_dmy(cols[4], line_no);
        auto key = std::make_tuple(static_cast<CustomerId>(*customer), static_cast<int>(cat), date);
        if (!seen.insert(key).second)
            throw DuplicateError("line " + std::to_string(line_no) + ": duplicate row for customer " +
                                 std::to_string(*customer) + ", category " + std::string(cat_text) + ", date " +
                                 format_date(date));

        DayRows& rows = merged[static_cast<CustomerId>(*customer)][date];
        auto& target = cat == Category::GC ? rows.gc : cat == Category::CL ? rows.cl : rows.cs;
        for (int s = 0; s < kSlotsPerDay; ++s) {
            auto v = text::parse_double(cols[5 + s]);
            if (!v) throw FormatError("line " + std::to_string(line_no) + ", column " + header[5 + s] + ": not a number");
            if (!std::isfinite(*v) || *v < 0.0)
                throw ValidationError("line " + std::to_string(line_no) + ", column " + header[5 + s] +
                                      ": negative or non-finite value " + std::string(text::trim(cols[5 + s])));
            target[s] = *v;
        }
        if (cat == Category::GC) rows.has_gc = true;
    }

    HouseholdMap out;
    for (auto& [customer, days] : merged) {
        auto& recs = out[customer];
        for (auto& [date, rows] : days) {
            // A date without a GC row has no consumption reading; it is
            // left out so week filtering treats it as missing.
            if (!rows.has_gc) continue;
            for (int s = 0; s < kSlotsPerDay; ++s)
                recs.push_back({{date, s}, rows.gc[s], rows.cl[s], rows.cs[s]});
        }
        if (recs.empty()) out.erase(customer);
    }
    return out;
}

void write_ausgrid_csv(std::ostream& out, const HouseholdMap& data) {
    const auto header = expected_header();
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& [customer, recs] : data) {
        std::map<sys_days, DayRows> days;
        for (const auto& r : recs) {
            auto& d = days[r.time.day];
            d.gc[r.time.slot] = r.gc;
            d.cl[r.time.slot] = r.cl;
            d.cs[r.time.slot] = r.cs;
        }
        for (const auto& [date, rows] : days) {
            year_month_day ymd{date};
            std::string date_text = std::to_string(static_cast<unsigned>(ymd.day())) + "/" +
                                    std::to_string(static_cast<unsigned>(ymd.month())) + "/" +
                                    std::to_string(static_cast<int>(ymd.year()));
            const std::pair<const char*, const std::array<double, kSlotsPerDay>*> cats[] = {
                {"GC", &rows.gc}, {"CL", &rows.cl}, {"GG", &rows.cs}};
            for (const auto& [name, values] : cats) {
                out << customer << ",0,0," << name << ',' << date_text;
                for (double v : *values) out << ',' << text::format_double(v);
                out << '\n';
            }
        }
    }
}

std::vector<HalfHourRecord> select_household(const HouseholdMap& data, CustomerId customer) {
    auto it = data.find(customer);
    if (it == data.end()) throw NotFoundError("customer " + std::to_string(customer) + " not in data");
    auto recs = it->second;
    std::stable_sort(recs.begin(), recs.end(),
                     [](const HalfHourRecord& a, const HalfHourRecord& b) { return a.time < b.time; });
    return recs;
}

std::vector<WeekTrace> filter_complete_weeks(std::span<const HalfHourRecord> records, int year_value) {
    const sys_days first_day{year{year_value} / January / 1};
    const sys_days last_day{year{year_value} / December / 31};

    std::map<sys_days, std::vector<HalfHourRecord>> by_week;
    for (const auto& r : records) {
        auto iso = weekday{r.time.day}.iso_encoding();
        sys_days monday = r.time.day - days{iso - 1};
        by_week[monday].push_back(r);
    }

    std::vector<WeekTrace> weeks;
    for (auto& [monday, recs] : by_week) {
        if (monday < first_day || monday + days{6} > last_day) continue;
        if (recs.size() != static_cast<std::size_t>(kSlotsPerWeek)) continue;
        bool contiguous = recs.front().time == Timestamp{monday, 0};
        for (std::size_t i = 1; contiguous && i < recs.size(); ++i)
            contiguous = recs[i].time == recs[i - 1].time.next();
        if (contiguous) weeks.emplace_back(std::move(recs));
    }
    return weeks;
}

DataSplit split_train_test(std::span<const WeekTrace> weeks, std::size_t n_train, std::uint64_t seed) {
    if (n_train >= weeks.size())
        throw ConfigError("n_train (" + std::to_string(n_train) + ") must be below the number of weeks (" +
                          std::to_string(weeks.size()) + ")");
    std::vector<std::size_t> idx(weeks.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());

    DataSplit split;
    split.seed = seed;
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? split.train : split.test).push_back(weeks[idx[i]]);
    return split;
}

namespace {

// Raised-cosine bump centred at `centre` hours with half-width `half` hours.
double bump(double hour, double centre, double half) {
    double d = std::abs(hour - centre);
    if (d >= half) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * d / half));
}

}  // namespace

std::vector<WeekTrace> generate_synthetic_weeks(std::size_t n, const SyntheticProfile& p, std::uint64_t seed) {
    for (double v : {p.peak_solar, p.base_demand, p.evening_peak, p.controlled_load, p.noise})
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("synthetic profile parameters must be non-negative");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto jitter = [&](double v) { return std::max(0.0, v * (1.0 + p.noise * unit(rng))); };

    const sys_days first_monday{year{2013} / January / 7};
    std::vector<WeekTrace> weeks;
    weeks.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        std::vector<HalfHourRecord> recs;
        recs.reserve(kSlotsPerWeek);
        for (int d = 0; d < 7; ++d) {
            sys_days day = first_monday + days{static_cast<int>(7 * w) + d};
            double cloud = std::max(0.0, 1.0 + p.noise * unit(rng));
            for (int s = 0; s < kSlotsPerDay; ++s) {
                double mid = (s + 0.5) / 2.0;  // slot midpoint in hours
                double solar = 0.0;
                if (mid > 6.0 && mid < 18.0) solar = p.peak_solar * std::sin(std::numbers::pi * (mid - 6.0) / 12.0);
                double demand = p.base_demand + p.evening_peak * bump(mid, 19.5, 3.0) +
                                0.5 * p.evening_peak * bump(mid, 7.5, 1.5);
                bool cl_block = s >= 46 || s < 6;  // 23:00 to 03:00
                double cl = cl_block ? p.controlled_load : 0.0;
                HalfHourRecord r;
                r.time = {day, s};
                r.gc = jitter(demand);
                r.cl = jitter(cl);
                r.cs = std::max(0.0, jitter(solar) * cloud);
                recs.push_back(r);
            }
        }
        weeks.emplace_back(std::move(recs));
    }
    return weeks;
}

void write_normalized_csv(std::ostream& out, std::span<const HalfHourRecord> records) {
    out << "timestamp,gc,cl,cs\n";
    for (const auto& r : records)
        out << format_timestamp(r.time) << ',' << text::format_double(r.gc) << ',' << text::format_double(r.cl)
            << ',' << text::format_double(r.cs) << '\n';
}

std::vector<HalfHourRecord> read_normalized_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "timestamp,gc,cl,cs")
        throw FormatError("normalized household file must start with 'timestamp,gc,cl,cs'");
    std::vector<HalfHourRecord> recs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        auto trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        auto cols = text::split(trimmed);
        if (cols.size() != 4) throw FormatError("line " + std::to_string(line_no) + ": expected 4 columns");
        HalfHourRecord r;
        r.time = parse_timestamp(std::string(cols[0]));
        double* fields[] = {&r.gc, &r.cl, &r.cs};
        for (int i = 0; i < 3; ++i) {
            auto v = text::parse_double(cols[1 + i]);
            if (!v) throw FormatError("line " + std::to_string(line_no) + ": not a number");
            *fields[i] = *v;
        }
        validate_record(r);
        recs.push_back(r);
    }
    return recs;
}

std::vector<HalfHourRecord> concat_weeks(std::span<const WeekTrace> weeks) {
    std::vector<HalfHourRecord> out;
    for (const auto& w : weeks) out.insert(out.end(), w.records().begin(), w.records().end());
    return out;
}

}  // namespace solar_ddpg

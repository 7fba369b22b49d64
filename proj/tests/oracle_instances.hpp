#pragma once

#include <random>
#include <vector>

#include "solar_ddpg/battery_env.hpp"

namespace solar_ddpg::test {

struct TinyInstance {
    EnvConfig config;
    std::vector<HalfHourRecord> trace;
    bool aligned = false;
};

/// Random short trace. When `aligned`, capacity is a power of two and every
/// energy value is a multiple of capacity / 4, so with K = 5 SoC levels and
/// A = 3 request levels every settled charge lands exactly on the lattice.
inline TinyInstance random_tiny_instance(std::mt19937_64& rng, int max_steps, bool aligned) {
    using namespace std::chrono;
    std::uniform_int_distribution<int> steps(1, max_steps);
    std::uniform_int_distribution<int> slot(0, 47);
    std::uniform_int_distribution<int> quarter(0, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double caps[] = {0.5, 1.0, 2.0};

    TinyInstance inst;
    inst.aligned = aligned;
    inst.config.capacity = aligned ? caps[quarter(rng) % 3] : 0.2 + 1.8 * u(rng);
    const int n = steps(rng);
    const int start = slot(rng);
    const double q = inst.config.capacity / 4.0;
    for (int t = 0; t < n; ++t) {
        HalfHourRecord r;
        r.time = {sys_days{2013y / January / 7} + days{(start + t) / 48}, (start + t) % 48};
        if (aligned) {
            r.gc = q * quarter(rng);
            r.cl = q * (quarter(rng) / 2);
            r.cs = q * quarter(rng);
        } else {
            r.gc = u(rng);
            r.cl = 0.5 * u(rng);
            r.cs = u(rng) < 0.5 ? 0.0 : u(rng);
        }
        inst.trace.push_back(r);
    }
    return inst;
}

}  // namespace solar_ddpg::test

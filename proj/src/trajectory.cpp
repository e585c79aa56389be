#include "mctd/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace mctd {

int SubplanPartition::subplan_of(int n) const {
    for (int s = 0; s < count(); ++s) {
        if (n >= begin(s) && n < end(s)) {
            return s;
        }
    }
    throw trajectory_error("token index outside partition: " + std::to_string(n));
}

SubplanPartition partition(int horizon, int subplans) {
    if (subplans < 1 || subplans > horizon) {
        throw trajectory_error("invalid partition: S=" + std::to_string(subplans) +
                               " N=" + std::to_string(horizon));
    }
    SubplanPartition part;
    part.horizon = horizon;
    part.boundaries.resize(static_cast<std::size_t>(subplans) + 1);
    const int base = horizon / subplans;
    const int rem = horizon % subplans;
    int cursor = 0;
    part.boundaries[0] = 0;
    for (int s = 0; s < subplans; ++s) {
        cursor += base + (s < rem ? 1 : 0);
        part.boundaries[static_cast<std::size_t>(s) + 1] = cursor;
    }
    return part;
}

BetaSchedule build_beta_schedule(BetaKind kind, int levels, double beta_min,
                                 double beta_max) {
    if (levels < 1) {
        throw trajectory_error("invalid schedule: K must be >= 1");
    }
    BetaSchedule sched;
    sched.kind = kind;
    sched.levels = levels;
    sched.beta_min = beta_min;
    sched.beta_max = beta_max;
    sched.betas.resize(static_cast<std::size_t>(levels));
    sched.alpha_bars.resize(static_cast<std::size_t>(levels) + 1);
    sched.alpha_bars[0] = 1.0;

    if (kind == BetaKind::Linear) {
        if (!(beta_min > 0.0 && beta_max < 1.0 && beta_min <= beta_max)) {
            throw trajectory_error("invalid schedule: beta range");
        }
        for (int k = 0; k < levels; ++k) {
            const double t = levels == 1 ? 0.0 : static_cast<double>(k) / (levels - 1);
            sched.betas[static_cast<std::size_t>(k)] = beta_min + (beta_max - beta_min) * t;
        }
    } else {
        // Squared-cosine alpha-bar curve, betas recovered from its ratios.
        const double s = 0.008;
        auto f = [&](double t) {
            const double x = (t / levels + s) / (1.0 + s) * (3.14159265358979323846 / 2.0);
            const double c = std::cos(x);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int k = 1; k <= levels; ++k) {
            const double ab = f(static_cast<double>(k)) / f0;
            double beta = 1.0 - ab / prev;
            beta = std::clamp(beta, 1e-8, 0.999);
            sched.betas[static_cast<std::size_t>(k) - 1] = beta;
            prev = ab;
        }
    }

    for (int k = 0; k < levels; ++k) {
        sched.alpha_bars[static_cast<std::size_t>(k) + 1] =
            sched.alpha_bars[static_cast<std::size_t>(k)] *
            (1.0 - sched.betas[static_cast<std::size_t>(k)]);
    }
    if (sched.alpha_bars.back() <= 0.0) {
        throw trajectory_error("invalid schedule: alpha_bar underflow");
    }
    return sched;
}

NoiseLevelGrid build_pyramid_grid(int subplans, int levels, int steps_per_expansion,
                                  int stabilization_level) {
    if (subplans < 1 || levels < 1 || steps_per_expansion < 1) {
        throw trajectory_error("invalid grid arguments");
    }
    NoiseLevelGrid grid;
    grid.subplans = subplans;
    grid.levels = levels;
    grid.stabilization = stabilization_level < levels ? stabilization_level : 0;

    std::vector<int> current(static_cast<std::size_t>(subplans), levels);
    auto push_row = [&] {
        grid.entries.insert(grid.entries.end(), current.begin(), current.end());
    };
    push_row();
    for (int s = 0; s < subplans; ++s) {
        while (current[static_cast<std::size_t>(s)] > grid.stabilization) {
            current[static_cast<std::size_t>(s)] =
                std::max(grid.stabilization, current[static_cast<std::size_t>(s)] - steps_per_expansion);
            push_row();
        }
    }
    return grid;
}

std::vector<int> expansion_step_levels(int levels, int steps_per_expansion,
                                       int stabilization_level) {
    const int stab = stabilization_level < levels ? stabilization_level : 0;
    std::vector<int> out;
    int level = levels;
    out.push_back(level);
    while (level > stab) {
        level = std::max(stab, level - steps_per_expansion);
        out.push_back(level);
    }
    if (out.back() != 0) {
        out.push_back(0);
    }
    return out;
}

std::vector<int> jumpy_step_levels(int from_level, int skip_interval) {
    if (skip_interval < 1) {
        throw trajectory_error("jump interval must be >= 1");
    }
    std::vector<int> out;
    int level = from_level;
    out.push_back(level);
    while (level > 0) {
        level = std::max(0, level - skip_interval);
        out.push_back(level);
    }
    return out;
}

}  // namespace mctd

#pragma once

// Two successive position measurements by equivalent apparatuses on
// object (mode 0), probe y (mode 1) and probe z (mode 2). The first
// apparatus couples to y on (t, t + dt), the second to z on (t + dt, t + 2 dt).

#include "qmeas/measurement.hpp"

#include <cmath>
#include <optional>
#include <utility>

namespace qmeas {

inline ModeSystem cascade_system(double hbar = 1.0) {
    return ModeSystem({"object", "probe1", "probe2"}, hbar);
}

struct CascadeScenario {
    MeasurementModel model;
    MomentState object_state;
    MomentState probe_state;
    /// Exploration only: a different preparation for the second probe.
    std::optional<MomentState> second_probe_state;

    [[nodiscard]] MomentState composite() const {
        const MomentState& second = second_probe_state ? *second_probe_state : probe_state;
        MomentState joined = product(product(object_state, probe_state), second);
        // Relabel onto the canonical three-mode system.
        return {cascade_system(model.system().hbar()), joined.mean(), joined.cov(),
                joined.gaussian()};
    }
};

struct CascadeMaps {
    SymplecticPropagation first;  // acts on (object, probe1)
    SymplecticPropagation total;  // first, then the second apparatus on (object, probe2)
};

inline CascadeMaps cascade_maps(const MeasurementModel& model) {
    const ModeSystem target = cascade_system(model.system().hbar());
    const SymplecticPropagation s = model.endpoint();
    SymplecticPropagation first = embed(s, {0, 1}, target);
    SymplecticPropagation second = embed(s, {0, 2}, target);
    SymplecticPropagation total = second * first;
    return {std::move(first), std::move(total)};
}

inline void check_cascade(const CascadeScenario& sc) {
    if (sc.object_state.system().modes() != 1 || sc.probe_state.system().modes() != 1 ||
        (sc.second_probe_state && sc.second_probe_state->system().modes() != 1)) {
        throw DimensionError("cascade: object and probe states must be single-mode");
    }
}

/// Output of the first apparatus, y(t + dt), on the three-mode system.
inline LinearObservable first_output_observable(const CascadeScenario& sc) {
    check_cascade(sc);
    const CascadeMaps maps = cascade_maps(sc.model);
    const ModeSystem& sys = maps.total.system();
    return heisenberg_apply(maps.first, LinearObservable::position(sys, 1));
}

/// Output of the second apparatus, z(t + 2 dt), on the three-mode system.
inline LinearObservable second_output_observable(const CascadeScenario& sc) {
    check_cascade(sc);
    const CascadeMaps maps = cascade_maps(sc.model);
    const ModeSystem& sys = maps.total.system();
    return heisenberg_apply(maps.total, LinearObservable::position(sys, 2));
}

/// <(z(t + 2 dt) - y(t + dt))^2>^(1/2).
inline double repeatability_deviation(const CascadeScenario& sc) {
    const LinearObservable diff = second_output_observable(sc) - first_output_observable(sc);
    return std::sqrt(second_moment(sc.composite(), diff));
}

inline bool is_alpha_repeatable(const CascadeScenario& sc, double alpha) {
    return repeatability_deviation(sc) <= alpha;
}

}  // namespace qmeas

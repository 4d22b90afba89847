#pragma once

// Indirect position-measurement models on object (mode 0) + probe (mode 1):
// noise and disturbance operators, their RMS values on product states, and
// the comparison of epsilon * eta against hbar/2.

#include "qmeas/canonical.hpp"
#include "qmeas/states.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace qmeas {

inline ModeSystem object_probe_system(double hbar = 1.0) {
    return ModeSystem({"object", "probe"}, hbar);
}

class MeasurementModel {
public:
    /// The interaction runs for dt = 1/coupling, so `hamiltonian` must already include K.
    MeasurementModel(std::string name, QuadraticHamiltonian hamiltonian, double coupling,
                     LinearObservable measured, LinearObservable probe_obs)
        : name_(std::move(name)), hamiltonian_(std::move(hamiltonian)), coupling_(coupling),
          dt_(1.0 / coupling), measured_(std::move(measured)), probe_obs_(std::move(probe_obs)) {
        const ModeSystem& sys = hamiltonian_.system();
        if (sys.modes() != 2) throw DimensionError("MeasurementModel: expected object + probe modes");
        if (!(coupling_ > 0.0) || !std::isfinite(coupling_)) {
            throw std::invalid_argument("MeasurementModel: coupling must be positive and finite");
        }
        require_same_system(sys, measured_.system(), "MeasurementModel (measured)");
        require_same_system(sys, probe_obs_.system(), "MeasurementModel (probe observable)");
        if (!measured_.supported_on(0)) {
            throw std::invalid_argument("MeasurementModel: measured observable must act on the object");
        }
    }

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] const ModeSystem& system() const { return hamiltonian_.system(); }
    [[nodiscard]] const QuadraticHamiltonian& hamiltonian() const { return hamiltonian_; }
    [[nodiscard]] double coupling() const { return coupling_; }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] const LinearObservable& measured() const { return measured_; }
    [[nodiscard]] const LinearObservable& probe_obs() const { return probe_obs_; }

    [[nodiscard]] SymplecticPropagation propagation(double tau) const {
        return propagate(hamiltonian_, tau);
    }
    [[nodiscard]] SymplecticPropagation endpoint() const { return propagation(dt_); }

    [[nodiscard]] MeasurementModel with_probe_observable(LinearObservable probe_obs) const {
        return {name_, hamiltonian_, coupling_, measured_, std::move(probe_obs)};
    }

private:
    std::string name_;
    QuadraticHamiltonian hamiltonian_;
    double coupling_;
    double dt_;
    LinearObservable measured_;
    LinearObservable probe_obs_;
};

// Coordinate indices in the object + probe system.
inline constexpr std::size_t kX = 0, kPx = 1, kY = 2, kPy = 3;

/// Builds a position measurement of the object read out on probe position
/// from an arbitrary bilinear term list (coefficients already include K).
inline MeasurementModel custom_model(std::string name, double coupling,
                                     const std::vector<QuadraticTerm>& terms, double hbar = 1.0) {
    const ModeSystem sys = object_probe_system(hbar);
    return {std::move(name), build_quadratic(sys, terms), coupling,
            LinearObservable::position(sys, 0), LinearObservable::position(sys, 1)};
}

/// H = K x p_y.
inline MeasurementModel von_neumann_model(double coupling = 1.0, double hbar = 1.0) {
    return custom_model("von_neumann", coupling, {{coupling, kX, kPy}}, hbar);
}

/// H = (K pi / 3 sqrt 3)(2 x p_y - 2 p_x y + x p_x - y p_y).
inline MeasurementModel ozawa_model(double coupling = 1.0, double hbar = 1.0) {
    const double g = coupling * std::numbers::pi / (3.0 * std::sqrt(3.0));
    return custom_model("ozawa", coupling,
                        {{2.0 * g, kX, kPy}, {-2.0 * g, kPx, kY}, {g, kX, kPx}, {-g, kY, kPy}},
                        hbar);
}

/// Closed-form S(tau) of the von Neumann coupling, linear in K tau.
inline Matrix von_neumann_closed_form(double k_tau) {
    Matrix s = Matrix::Identity(4, 4);
    s(kY, kX) = k_tau;
    s(kPx, kPy) = -k_tau;
    return s;
}

/// Closed-form S(tau) of the Ozawa coupling. With a = K tau pi/3 and
/// c = 2/sqrt 3 the position block is c [[sin(pi/3 + a), -sin a], [sin a, sin(pi/3 - a)]]
/// and the momentum block is its inverse transpose.
inline Matrix ozawa_closed_form(double k_tau) {
    const double c = 2.0 / std::sqrt(3.0);
    const double a = k_tau * std::numbers::pi / 3.0;
    const double third = std::numbers::pi / 3.0;
    Matrix s = Matrix::Zero(4, 4);
    s(kX, kX) = c * std::sin(third + a);
    s(kX, kY) = -c * std::sin(a);
    s(kY, kX) = c * std::sin(a);
    s(kY, kY) = c * std::sin(third - a);
    s(kPx, kPx) = c * std::sin(third - a);
    s(kPx, kPy) = -c * std::sin(a);
    s(kPy, kPx) = c * std::sin(a);
    s(kPy, kPy) = c * std::sin(third + a);
    return s;
}

/// N(A) = M(t + dt) - A(t).
inline LinearObservable noise_operator(const MeasurementModel& m) {
    return heisenberg_apply(m.endpoint(), m.probe_obs()) - m.measured();
}

/// D(B) = B(t + dt) - B(t).
inline LinearObservable disturbance_operator(const MeasurementModel& m, const LinearObservable& b) {
    return heisenberg_apply(m.endpoint(), b) - b;
}

inline double noise(const MeasurementModel& m, const MomentState& composite) {
    return std::sqrt(second_moment(composite, noise_operator(m)));
}
inline double noise(const MeasurementModel& m, const MomentState& object, const MomentState& probe) {
    return noise(m, product(object, probe));
}

inline double disturbance(const MeasurementModel& m, const MomentState& composite,
                          const LinearObservable& b) {
    return std::sqrt(second_moment(composite, disturbance_operator(m, b)));
}
inline double disturbance(const MeasurementModel& m, const MomentState& object,
                          const MomentState& probe, const LinearObservable& b) {
    return disturbance(m, product(object, probe), b);
}

struct NoiseReport {
    double epsilon = 0.0;
    double eta = 0.0;
    double product = 0.0;
    double heisenberg_bound = 0.0;  // hbar/2
    bool satisfied = false;         // epsilon * eta >= hbar/2 (one-sided tolerance)
    double sigma_x_pre = 0.0;
    double tradeoff_product = 0.0;  // sigma(x) * eta
};

/// Position noise and momentum disturbance against hbar/2. `tol` is in units of hbar.
inline NoiseReport heisenberg_verdict(const MeasurementModel& m, const MomentState& composite,
                                      double tol = kDefaultTol) {
    const ModeSystem& sys = m.system();
    const auto px = LinearObservable::momentum(sys, 0);
    NoiseReport r;
    r.epsilon = noise(m, composite);
    r.eta = disturbance(m, composite, px);
    r.product = r.epsilon * r.eta;
    r.heisenberg_bound = 0.5 * sys.hbar();
    r.satisfied = r.product >= r.heisenberg_bound - tol * sys.hbar();
    r.sigma_x_pre = std_dev(composite, m.measured());
    r.tradeoff_product = r.sigma_x_pre * r.eta;
    return r;
}
inline NoiseReport heisenberg_verdict(const MeasurementModel& m, const MomentState& object,
                                      const MomentState& probe, double tol = kDefaultTol) {
    return heisenberg_verdict(m, product(object, probe), tol);
}

/// exp(-i x p_y / hbar) and exp(+i p_x y / hbar) as unit-duration propagations.
struct RealizationFactors {
    SymplecticPropagation x_py;
    SymplecticPropagation px_y;
};

inline RealizationFactors realization_factors(double hbar = 1.0) {
    const ModeSystem sys = object_probe_system(hbar);
    return {propagate(build_quadratic(sys, {{1.0, kX, kPy}}), 1.0),
            propagate(build_quadratic(sys, {{-1.0, kPx, kY}}), 1.0)};
}

/// Frobenius distance between the Ozawa endpoint map and the product of the
/// two linear couplings, p_x y acting first. `swapped` reverses the order.
inline double realization_check(double coupling = 1.0, bool swapped = false, double hbar = 1.0) {
    const SymplecticPropagation target = ozawa_model(coupling, hbar).endpoint();
    const RealizationFactors f = realization_factors(hbar);
    const SymplecticPropagation composed = swapped ? f.px_y * f.x_py : f.x_py * f.px_y;
    return frobenius_distance(target.matrix(), composed.matrix());
}

struct SweepRow {
    double sigma_p = 0.0;  // shared by object and probe
    double sigma_x = 0.0;
    NoiseReport report;
    double post_sigma_x = 0.0;  // sigma(x)(t + dt)
};

/// sigma_p = 2^-k for k in [k_min, k_max].
inline std::vector<double> dyadic_schedule(int k_min, int k_max) {
    std::vector<double> out;
    for (int k = k_min; k <= k_max; ++k) out.push_back(std::ldexp(1.0, -k));
    return out;
}

/// Object and probe both prepared in zero-mean minimum-uncertainty states
/// with momentum width sigma_p, approaching |p = 0> as sigma_p -> 0.
inline std::vector<SweepRow> limit_sweep(const MeasurementModel& m,
                                         const std::vector<double>& sigma_p_schedule) {
    const double hbar = m.system().hbar();
    const auto x = LinearObservable::position(m.system(), 0);
    const SymplecticPropagation s = m.endpoint();
    std::vector<SweepRow> rows;
    rows.reserve(sigma_p_schedule.size());
    for (double sp : sigma_p_schedule) {
        const double sx = hbar / (2.0 * sp);
        const ModeSpec spec{0.0, 0.0, sx, sp, 0.0};
        const MomentState composite =
            product(from_gaussian(spec, "object", hbar), from_gaussian(spec, "probe", hbar));
        SweepRow row;
        row.sigma_p = sp;
        row.sigma_x = sx;
        row.report = heisenberg_verdict(m, composite);
        row.post_sigma_x = std_dev(evolve(composite, s), x);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qmeas

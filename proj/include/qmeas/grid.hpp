#pragma once

// Two-mode wavefunction oracle on a periodic nx x ny grid (hbar = 1).
//
// Amplitudes are stored x-major: amp[ix * ny + iy] = psi(x_ix, y_iy), with
// x_ix = -lx + ix * dx and dx = 2 lx / nx (likewise for y). The measuring
// unitaries are applied as exact shears by spectral phase ramps:
//   exp(-i theta x p_y) : psi(x, y) -> psi(x, y - theta x)
//   exp(+i theta p_x y) : psi(x, y) -> psi(x + theta y, y)

#include "qmeas/measurement.hpp"
#include "qmeas/states.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace qmeas::grid {

using Complex = std::complex<double>;

inline constexpr double kDefaultBoundaryThreshold = 1e-8;
inline constexpr double kBoundaryShell = 0.05;

/// Probability reached the outer shell of the periodic box, so results would alias.
class BoundaryMassError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridSpec {
    std::size_t nx = 1024;
    std::size_t ny = 1024;
    double lx = 12.0;  // half-widths
    double ly = 12.0;
    double boundary_threshold = kDefaultBoundaryThreshold;

    [[nodiscard]] double dx() const { return 2.0 * lx / static_cast<double>(nx); }
    [[nodiscard]] double dy() const { return 2.0 * ly / static_cast<double>(ny); }
    [[nodiscard]] double cell_area() const { return dx() * dy(); }
    [[nodiscard]] double x(std::size_t ix) const { return -lx + static_cast<double>(ix) * dx(); }
    [[nodiscard]] double y(std::size_t iy) const { return -ly + static_cast<double>(iy) * dy(); }

    void validate() const {
        auto pow2 = [](std::size_t n) { return n >= 8 && (n & (n - 1)) == 0; };
        if (!pow2(nx) || !pow2(ny)) throw std::invalid_argument("GridSpec: sizes must be powers of two >= 8");
        if (!(lx > 0.0) || !(ly > 0.0)) throw std::invalid_argument("GridSpec: half-widths must be positive");
        if (!(boundary_threshold > 0.0)) {
            throw std::invalid_argument("GridSpec: boundary threshold must be positive");
        }
    }
};

/// Angular wavenumber of FFT bin j on a periodic interval of length 2 l.
inline double wavenumber(std::size_t j, std::size_t n, double l) {
    const double dk = std::numbers::pi / l;
    const auto sj = static_cast<std::ptrdiff_t>(j);
    const auto sn = static_cast<std::ptrdiff_t>(n);
    return dk * static_cast<double>(j < n / 2 ? sj : sj - sn);
}

class GridState {
public:
    GridState(GridSpec spec, std::vector<Complex> amplitudes)
        : spec_(spec), amp_(std::move(amplitudes)) {
        spec_.validate();
        if (amp_.size() != spec_.nx * spec_.ny) {
            throw DimensionError("GridState: amplitude array does not match nx * ny");
        }
    }

    [[nodiscard]] const GridSpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<Complex>& amplitudes() const { return amp_; }
    [[nodiscard]] std::vector<Complex>& amplitudes() { return amp_; }
    [[nodiscard]] Complex at(std::size_t ix, std::size_t iy) const { return amp_[ix * spec_.ny + iy]; }

    /// sum |psi|^2 dA.
    [[nodiscard]] double norm_squared() const {
        double s = 0.0;
        for (const auto& a : amp_) s += std::norm(a);
        return s * spec_.cell_area();
    }

    void normalize() {
        const double n2 = norm_squared();
        if (!(n2 > 0.0)) throw std::invalid_argument("GridState: cannot normalize a zero state");
        const double f = 1.0 / std::sqrt(n2);
        for (auto& a : amp_) a *= f;
    }

private:
    GridSpec spec_;
    std::vector<Complex> amp_;
};

namespace detail {

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

enum class Axis { x, y };

// In-place batched 1-D transforms along one axis. The FFTW planner is not
// thread-safe, so plans are created under a lock and cached; executing a
// plan on new arrays is safe concurrently.
inline fftw_plan axis_plan(std::size_t nx, std::size_t ny, Axis axis, int sign) {
    static std::mutex mutex;
    static std::map<std::tuple<std::size_t, std::size_t, Axis, int>, Plan> cache;
    const std::lock_guard lock(mutex);
    auto key = std::make_tuple(nx, ny, axis, sign);
    if (auto it = cache.find(key); it != cache.end()) return it->second.get();

    std::vector<Complex> scratch(nx * ny);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const int n = static_cast<int>(axis == Axis::y ? ny : nx);
    const int howmany = static_cast<int>(axis == Axis::y ? nx : ny);
    const int stride = axis == Axis::y ? 1 : static_cast<int>(ny);
    const int dist = axis == Axis::y ? static_cast<int>(ny) : 1;
    fftw_plan p = fftw_plan_many_dft(1, &n, howmany, buf, nullptr, stride, dist, buf, nullptr,
                                     stride, dist, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw std::runtime_error("fftw: plan creation failed");
    return cache.emplace(key, Plan(p)).first->second.get();
}

inline void transform(std::vector<Complex>& data, const GridSpec& g, Axis axis, int sign) {
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(axis_plan(g.nx, g.ny, axis, sign), buf, buf);
}

// Multiplies the spectrum along `axis` by phase(line, k) and transforms back.
template <typename PhaseFn>
void spectral_multiply(std::vector<Complex>& data, const GridSpec& g, Axis axis, PhaseFn&& phase) {
    transform(data, g, axis, FFTW_FORWARD);
    const std::size_t n_along = axis == Axis::y ? g.ny : g.nx;
    const double l = axis == Axis::y ? g.ly : g.lx;
    const double inv_n = 1.0 / static_cast<double>(n_along);
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
            const std::size_t line = axis == Axis::y ? ix : iy;
            const std::size_t j = axis == Axis::y ? iy : ix;
            data[ix * g.ny + iy] *= phase(line, wavenumber(j, n_along, l)) * inv_n;
        }
    }
    transform(data, g, axis, FFTW_BACKWARD);
}

inline double shell_mass(const std::vector<Complex>& data, const GridSpec& g) {
    const double inner_x = (1.0 - kBoundaryShell) * g.lx;
    const double inner_y = (1.0 - kBoundaryShell) * g.ly;
    double total = 0.0;
    double shell = 0.0;
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
        const bool edge_x = std::abs(g.x(ix)) >= inner_x;
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
            const double w = std::norm(data[ix * g.ny + iy]);
            total += w;
            if (edge_x || std::abs(g.y(iy)) >= inner_y) shell += w;
        }
    }
    return total > 0.0 ? shell / total : 0.0;
}

}  // namespace detail

/// Fraction of probability in the outermost 5% shell of the box.
inline double boundary_mass(const GridState& s) { return detail::shell_mass(s.amplitudes(), s.spec()); }

inline void check_boundary(const std::vector<Complex>& data, const GridSpec& g, const char* where) {
    const double m = detail::shell_mass(data, g);
    if (m > g.boundary_threshold) {
        throw BoundaryMassError(std::string(where) + ": boundary mass " + std::to_string(m) +
                                " exceeds threshold " + std::to_string(g.boundary_threshold) +
                                "; enlarge the grid half-widths");
    }
}

namespace detail {

// Rejects a translation that would carry occupied cells of any line past the
// inner region, where periodic wrap-around would land them elsewhere.
template <typename ShiftFn>
void check_guard_band(const std::vector<Complex>& data, const GridSpec& g, Axis axis,
                      ShiftFn&& shift) {
    double total = 0.0;
    for (const auto& a : data) total += std::norm(a);
    const double cell_floor = g.boundary_threshold * total / static_cast<double>(g.nx * g.ny);
    const std::size_t lines = axis == Axis::y ? g.nx : g.ny;
    const std::size_t along = axis == Axis::y ? g.ny : g.nx;
    const double inner = (1.0 - kBoundaryShell) * (axis == Axis::y ? g.ly : g.lx);
    for (std::size_t line = 0; line < lines; ++line) {
        std::ptrdiff_t lo = -1;
        std::ptrdiff_t hi = -1;
        for (std::size_t j = 0; j < along; ++j) {
            const std::size_t idx = axis == Axis::y ? line * g.ny + j : j * g.ny + line;
            if (std::norm(data[idx]) > cell_floor) {
                if (lo < 0) lo = static_cast<std::ptrdiff_t>(j);
                hi = static_cast<std::ptrdiff_t>(j);
            }
        }
        if (lo < 0) continue;
        const double d = shift(line);
        const double pos_lo = (axis == Axis::y ? g.y(static_cast<std::size_t>(lo)) : g.x(static_cast<std::size_t>(lo))) + d;
        const double pos_hi = (axis == Axis::y ? g.y(static_cast<std::size_t>(hi)) : g.x(static_cast<std::size_t>(hi))) + d;
        if (pos_lo < -inner || pos_hi > inner) {
            throw BoundaryMassError("shear displacement " + std::to_string(d) +
                                    " exceeds the domain guard band");
        }
    }
}

inline void shear_x_py(std::vector<Complex>& data, const GridSpec& g, double theta) {
    if (theta == 0.0) return;
    check_guard_band(data, g, Axis::y, [&](std::size_t ix) { return theta * g.x(ix); });
    // Column ix is translated in y by theta * x_ix.
    spectral_multiply(data, g, Axis::y, [&](std::size_t ix, double k) {
        return std::polar(1.0, -k * theta * g.x(ix));
    });
}

inline void shear_px_y(std::vector<Complex>& data, const GridSpec& g, double theta) {
    if (theta == 0.0) return;
    check_guard_band(data, g, Axis::x, [&](std::size_t iy) { return -theta * g.y(iy); });
    // Row iy is translated in x by -theta * y_iy.
    spectral_multiply(data, g, Axis::x, [&](std::size_t iy, double k) {
        return std::polar(1.0, k * theta * g.y(iy));
    });
}

}  // namespace detail

/// psi(x, y) -> psi(x, y - theta x), i.e. exp(-i theta x p_y).
inline GridState apply_shear_x_py(GridState state, double theta) {
    const GridSpec g = state.spec();
    check_boundary(state.amplitudes(), g, "apply_shear_x_py (before)");
    detail::shear_x_py(state.amplitudes(), g, theta);
    check_boundary(state.amplitudes(), g, "apply_shear_x_py (after)");
    return state;
}

/// psi(x, y) -> psi(x + theta y, y), i.e. exp(+i theta p_x y).
inline GridState apply_shear_px_y(GridState state, double theta) {
    const GridSpec g = state.spec();
    check_boundary(state.amplitudes(), g, "apply_shear_px_y (before)");
    detail::shear_px_y(state.amplitudes(), g, theta);
    check_boundary(state.amplitudes(), g, "apply_shear_px_y (after)");
    return state;
}

/// exp(-i x p_y) exp(i p_x y): the p_x y shear acts first.
inline GridState ozawa_unitary(GridState state) {
    return apply_shear_x_py(apply_shear_px_y(std::move(state), 1.0), 1.0);
}

inline GridState von_neumann_unitary(GridState state) {
    return apply_shear_x_py(std::move(state), 1.0);
}

enum class GridModel { von_neumann, ozawa };

inline GridState apply_unitary(GridState state, GridModel model) {
    return model == GridModel::ozawa ? ozawa_unitary(std::move(state))
                                     : von_neumann_unitary(std::move(state));
}

// Operators used by the oracle. Momenta are applied spectrally.

inline GridState multiply_x(GridState s) {
    const GridSpec& g = s.spec();
    auto& a = s.amplitudes();
    for (std::size_t ix = 0; ix < g.nx; ++ix)
        for (std::size_t iy = 0; iy < g.ny; ++iy) a[ix * g.ny + iy] *= g.x(ix);
    return s;
}

inline GridState multiply_y(GridState s) {
    const GridSpec& g = s.spec();
    auto& a = s.amplitudes();
    for (std::size_t ix = 0; ix < g.nx; ++ix)
        for (std::size_t iy = 0; iy < g.ny; ++iy) a[ix * g.ny + iy] *= g.y(iy);
    return s;
}

inline GridState apply_px(GridState s) {
    const GridSpec g = s.spec();
    detail::spectral_multiply(s.amplitudes(), g, detail::Axis::x,
                              [](std::size_t, double k) { return Complex(k, 0.0); });
    return s;
}

inline GridState apply_py(GridState s) {
    const GridSpec g = s.spec();
    detail::spectral_multiply(s.amplitudes(), g, detail::Axis::y,
                              [](std::size_t, double k) { return Complex(k, 0.0); });
    return s;
}

/// <a|b> with the cell-area measure.
inline Complex inner(const GridState& a, const GridState& b) {
    Complex s = 0.0;
    const auto& va = a.amplitudes();
    const auto& vb = b.amplitudes();
    for (std::size_t i = 0; i < va.size(); ++i) s += std::conj(va[i]) * vb[i];
    return s * a.spec().cell_area();
}

/// ||a - b||^2 with the cell-area measure.
inline double distance_squared(const GridState& a, const GridState& b) {
    double s = 0.0;
    const auto& va = a.amplitudes();
    const auto& vb = b.amplitudes();
    for (std::size_t i = 0; i < va.size(); ++i) s += std::norm(va[i] - vb[i]);
    return s * a.spec().cell_area();
}

/// Single-mode wavefunction of a pure Gaussian spec (hbar = 1), unnormalized.
///
/// psi(x) = exp(-A (x - mu)^2 / 2 + i p0 (x - mu)) with Re A = 1 / (2 sx^2)
/// and Im A = -cov_xp / sx^2, which reproduces var x, var p and cov_xp.
inline std::function<Complex(double)> gaussian_wavefunction(const ModeSpec& m) {
    const double a = m.sigma_x * m.sigma_x;
    const double c = m.correlation * m.sigma_x * m.sigma_p;
    if (!(a > 0.0)) throw std::invalid_argument("gaussian_wavefunction: sigma_x must be positive");
    if (std::abs(a * m.sigma_p * m.sigma_p - c * c - 0.25) > 1e-9 * std::max(1.0, a * m.sigma_p * m.sigma_p)) {
        throw PhysicalityError(
            "gaussian_wavefunction: only pure Gaussians (sigma_x sigma_p sqrt(1-rho^2) = 1/2) have a "
            "wavefunction");
    }
    const Complex big_a(1.0 / (2.0 * a), -c / a);
    const double mu = m.mean_x;
    const double p0 = m.mean_p;
    return [=](double x) {
        const double u = x - mu;
        return std::exp(-0.5 * big_a * u * u + Complex(0.0, p0 * u));
    };
}

/// Equal-weight superposition of two Gaussian packets centered at mean_x -/+ separation/2.
inline std::function<Complex(double)> bimodal_wavefunction(const ModeSpec& packet, double separation) {
    ModeSpec left = packet;
    ModeSpec right = packet;
    left.mean_x -= 0.5 * separation;
    right.mean_x += 0.5 * separation;
    auto fl = gaussian_wavefunction(left);
    auto fr = gaussian_wavefunction(right);
    return [=](double x) { return fl(x) + fr(x); };
}

/// psi(x, y) = f(x) g(y), normalized on the grid.
inline GridState init_product_grid(const std::function<Complex(double)>& object,
                                   const std::function<Complex(double)>& probe, const GridSpec& spec) {
    spec.validate();
    std::vector<Complex> fx(spec.nx), fy(spec.ny);
    for (std::size_t ix = 0; ix < spec.nx; ++ix) fx[ix] = object(spec.x(ix));
    for (std::size_t iy = 0; iy < spec.ny; ++iy) fy[iy] = probe(spec.y(iy));
    std::vector<Complex> amp(spec.nx * spec.ny);
    for (std::size_t ix = 0; ix < spec.nx; ++ix)
        for (std::size_t iy = 0; iy < spec.ny; ++iy) amp[ix * spec.ny + iy] = fx[ix] * fy[iy];
    GridState s(spec, std::move(amp));
    s.normalize();
    check_boundary(s.amplitudes(), spec, "init_product_grid");
    return s;
}

inline GridState init_gaussian_grid(const ModeSpec& object, const ModeSpec& probe, const GridSpec& spec) {
    return init_product_grid(gaussian_wavefunction(object), gaussian_wavefunction(probe), spec);
}

/// First moments and symmetrized covariance in (x, p_x, y, p_y) order, by quadrature.
inline MomentState grid_moments(const GridState& psi) {
    const GridSpec& g = psi.spec();
    const GridState px = apply_px(psi);
    const GridState py = apply_py(psi);
    const GridState xpsi = multiply_x(psi);
    const GridState ypsi = multiply_y(psi);

    double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
    const auto& a = psi.amplitudes();
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
            const double w = std::norm(a[ix * g.ny + iy]);
            const double x = g.x(ix), y = g.y(iy);
            mx += w * x;
            my += w * y;
            xx += w * x * x;
            yy += w * y * y;
            xy += w * x * y;
        }
    }
    const double da = g.cell_area();
    mx *= da; my *= da; xx *= da; yy *= da; xy *= da;

    Vector mean(4);
    mean << mx, inner(psi, px).real(), my, inner(psi, py).real();
    Matrix second(4, 4);
    auto set = [&](std::size_t i, std::size_t j, double v) { second(i, j) = second(j, i) = v; };
    set(kX, kX, xx);
    set(kY, kY, yy);
    set(kX, kY, xy);
    set(kPx, kPx, px.norm_squared());
    set(kPy, kPy, py.norm_squared());
    set(kPx, kPy, inner(px, py).real());
    set(kX, kPx, inner(xpsi, px).real());
    set(kX, kPy, inner(xpsi, py).real());
    set(kY, kPx, inner(ypsi, px).real());
    set(kY, kPy, inner(ypsi, py).real());
    Matrix cov = second - mean * mean.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {object_probe_system(1.0), std::move(mean), std::move(cov), false};
}

struct GridNoiseDisturbance {
    double epsilon;
    double eta;
};

/// epsilon^2 = ||y U phi - U x phi||^2 and eta^2 = ||p_x U phi - U p_x phi||^2,
/// evaluated on wavefunctions without any moment shortcut.
inline GridNoiseDisturbance grid_noise_disturbance(const GridState& initial, GridModel model) {
    const GridState u_phi = apply_unitary(initial, model);
    const GridState u_x_phi = apply_unitary(multiply_x(initial), model);
    const GridState u_px_phi = apply_unitary(apply_px(initial), model);
    return {std::sqrt(distance_squared(multiply_y(u_phi), u_x_phi)),
            std::sqrt(distance_squared(apply_px(u_phi), u_px_phi))};
}

inline double grid_noise(const GridState& initial, GridModel model) {
    const GridState u_phi = apply_unitary(initial, model);
    const GridState u_x_phi = apply_unitary(multiply_x(initial), model);
    return std::sqrt(distance_squared(multiply_y(u_phi), u_x_phi));
}

inline double grid_disturbance(const GridState& initial, GridModel model) {
    const GridState u_phi = apply_unitary(initial, model);
    const GridState u_px_phi = apply_unitary(apply_px(initial), model);
    return std::sqrt(distance_squared(apply_px(u_phi), u_px_phi));
}

/// Binned probabilities of one position coordinate over [-l, l).
struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> probabilities;

    [[nodiscard]] double bin_width() const {
        return (hi - lo) / static_cast<double>(probabilities.size());
    }
    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double p : probabilities) s += p;
        return s;
    }
};

enum class Coordinate { x, y };

inline Histogram position_histogram(const GridState& s, Coordinate coord, std::size_t bins) {
    const GridSpec& g = s.spec();
    const std::size_t n = coord == Coordinate::x ? g.nx : g.ny;
    if (bins == 0 || n % bins != 0) {
        throw std::invalid_argument("position_histogram: bins must divide the grid size " +
                                    std::to_string(n));
    }
    const std::size_t per_bin = n / bins;
    Histogram h;
    h.lo = coord == Coordinate::x ? -g.lx : -g.ly;
    h.hi = -h.lo;
    h.probabilities.assign(bins, 0.0);
    const auto& a = s.amplitudes();
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
            const std::size_t cell = coord == Coordinate::x ? ix : iy;
            h.probabilities[cell / per_bin] += std::norm(a[ix * g.ny + iy]);
        }
    }
    for (double& p : h.probabilities) p *= g.cell_area();
    return h;
}

/// Distribution of the probe readout y after the measuring interaction.
inline Histogram output_histogram(const GridState& initial, GridModel model, std::size_t bins) {
    return position_histogram(apply_unitary(initial, model), Coordinate::y, bins);
}

inline double total_variation(const Histogram& a, const Histogram& b) {
    if (a.probabilities.size() != b.probabilities.size() || a.lo != b.lo || a.hi != b.hi) {
        throw DimensionError("total_variation: histograms are not on the same bins");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.probabilities.size(); ++i) {
        s += std::abs(a.probabilities[i] - b.probabilities[i]);
    }
    return 0.5 * s;
}

/// Canonical rescaling to hbar = 1: x -> x, p -> p / hbar.
inline ModeSpec to_unit_hbar(ModeSpec m, double hbar) {
    m.mean_p /= hbar;
    m.sigma_p /= hbar;
    return m;
}

}  // namespace qmeas::grid

namespace qmeas::grid {

/// Square grid whose half-width is `sigmas` standard deviations (plus the
/// mean offset) of every position coordinate before, during and after the
/// interaction. Fails if the momentum spread would exceed the Nyquist range.
inline GridSpec fit_grid(const ModeSpec& object, const ModeSpec& probe, GridModel model,
                         std::size_t n = 1024, double sigmas = 12.0) {
    const ModeSystem sys = object_probe_system(1.0);
    const MomentState initial = from_gaussian(GaussianSpec{object, probe}, sys);
    const RealizationFactors f = realization_factors(1.0);
    std::vector<MomentState> stages{initial};
    if (model == GridModel::ozawa) {
        stages.push_back(evolve(initial, f.px_y));
        stages.push_back(evolve(stages.back(), f.x_py));
    } else {
        stages.push_back(evolve(initial, f.x_py));
    }
    double half = 0.0;
    double kneed = 0.0;
    for (const auto& s : stages) {
        for (Eigen::Index i : {Eigen::Index{kX}, Eigen::Index{kY}}) {
            half = std::max(half, std::abs(s.mean()(i)) + sigmas * std::sqrt(s.cov()(i, i)));
        }
        for (Eigen::Index i : {Eigen::Index{kPx}, Eigen::Index{kPy}}) {
            kneed = std::max(kneed, std::abs(s.mean()(i)) + sigmas * std::sqrt(s.cov()(i, i)));
        }
    }
    GridSpec g{n, n, half, half, kDefaultBoundaryThreshold};
    const double kmax = std::numbers::pi / g.dx();
    if (kneed > kmax) {
        throw BoundaryMassError("fit_grid: momentum spread " + std::to_string(kneed) +
                                " exceeds the grid Nyquist wavenumber " + std::to_string(kmax) +
                                "; increase the grid size");
    }
    return g;
}

}  // namespace qmeas::grid

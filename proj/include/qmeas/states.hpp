#pragma once

// Moment-state calculus: first moments and symmetrized second central
// moments, cov_ij = <{r_i - mu_i, r_j - mu_j}>/2.

#include "qmeas/canonical.hpp"
#include "qmeas/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qmeas {

inline constexpr double kPhysicalityTol = 1e-10;

/// Single-mode Gaussian preparation.
struct ModeSpec {
    double mean_x = 0.0;
    double mean_p = 0.0;
    double sigma_x = 1.0;
    double sigma_p = 1.0;
    double correlation = 0.0;  // in (-1, 1)

    /// Minimum-uncertainty (pure, uncorrelated) spec with the given position width.
    static ModeSpec coherent(double sigma_x, double hbar = 1.0, double mean_x = 0.0,
                             double mean_p = 0.0) {
        return {mean_x, mean_p, sigma_x, hbar / (2.0 * sigma_x), 0.0};
    }

    /// sigma_x sigma_p sqrt(1 - rho^2); a state is admissible iff this is >= hbar/2.
    [[nodiscard]] double uncertainty_product() const {
        return sigma_x * sigma_p * std::sqrt(1.0 - correlation * correlation);
    }
};

using GaussianSpec = std::vector<ModeSpec>;

/// Enforces cov + i(hbar/2) Omega >= 0 up to tol scaled by the covariance magnitude.
inline void check_physical(const ModeSystem& system, const Matrix& cov,
                           double tol = kPhysicalityTol) {
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    const double min_eig =
        min_hermitian_eigenvalue(cov, 0.5 * system.hbar() * system.symplectic_form());
    if (min_eig < -tol * scale) {
        throw PhysicalityError("state violates cov + i(hbar/2) Omega >= 0 (min eigenvalue " +
                               std::to_string(min_eig) + ")");
    }
}

class MomentState {
public:
    MomentState(ModeSystem system, Vector mean, Matrix cov, bool gaussian)
        : system_(std::move(system)), mean_(std::move(mean)), cov_(std::move(cov)),
          gaussian_(gaussian) {
        if (mean_.size() != system_.dim() || cov_.rows() != system_.dim() ||
            cov_.cols() != system_.dim()) {
            throw DimensionError("MomentState: moment shapes do not match the mode system");
        }
        if (!mean_.allFinite() || !cov_.allFinite()) {
            throw std::invalid_argument("MomentState: non-finite moments");
        }
        if (!is_symmetric(cov_, 0.0)) throw std::invalid_argument("MomentState: cov not symmetric");
        if ((cov_.diagonal().array() < 0.0).any()) {
            throw PhysicalityError("MomentState: negative variance on the diagonal");
        }
        check_physical(system_, cov_);
    }

    [[nodiscard]] const ModeSystem& system() const { return system_; }
    [[nodiscard]] const Vector& mean() const { return mean_; }
    [[nodiscard]] const Matrix& cov() const { return cov_; }
    /// Only Gaussian-flagged states determine interval probabilities.
    [[nodiscard]] bool gaussian() const { return gaussian_; }

private:
    ModeSystem system_;
    Vector mean_;
    Matrix cov_;
    bool gaussian_;
};

inline MomentState from_gaussian(const GaussianSpec& spec, const ModeSystem& system,
                                 double tol = kDefaultTol) {
    if (spec.size() != system.modes()) {
        throw DimensionError("from_gaussian: spec has " + std::to_string(spec.size()) +
                             " modes, system has " + std::to_string(system.modes()));
    }
    Vector mean(system.dim());
    Matrix cov = Matrix::Zero(system.dim(), system.dim());
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const ModeSpec& m = spec[k];
        if (!(m.sigma_x > 0.0) || !(m.sigma_p > 0.0) || !std::isfinite(m.sigma_x) ||
            !std::isfinite(m.sigma_p)) {
            throw PhysicalityError("from_gaussian: widths must be positive and finite");
        }
        if (!(m.correlation > -1.0 && m.correlation < 1.0)) {
            throw PhysicalityError("from_gaussian: correlation must lie in (-1, 1)");
        }
        if (m.uncertainty_product() < 0.5 * system.hbar() - tol) {
            throw PhysicalityError("from_gaussian: mode '" + system.labels()[k] +
                                   "' violates the Robertson bound (sigma_x sigma_p sqrt(1-rho^2) = " +
                                   std::to_string(m.uncertainty_product()) + " < hbar/2)");
        }
        const auto ix = system.x_index(k);
        const auto ip = system.p_index(k);
        mean(ix) = m.mean_x;
        mean(ip) = m.mean_p;
        cov(ix, ix) = m.sigma_x * m.sigma_x;
        cov(ip, ip) = m.sigma_p * m.sigma_p;
        cov(ix, ip) = cov(ip, ix) = m.correlation * m.sigma_x * m.sigma_p;
    }
    return {system, std::move(mean), std::move(cov), true};
}

inline MomentState from_gaussian(const ModeSpec& spec, const std::string& label,
                                 double hbar = 1.0) {
    return from_gaussian(GaussianSpec{spec}, ModeSystem({label}, hbar));
}

/// Uncorrelated composite a (x) b; modes of b follow the modes of a.
inline MomentState product(const MomentState& a, const MomentState& b) {
    ModeSystem joined = a.system().join(b.system());
    const Eigen::Index na = a.system().dim();
    const Eigen::Index nb = b.system().dim();
    Vector mean(na + nb);
    mean << a.mean(), b.mean();
    Matrix cov = Matrix::Zero(na + nb, na + nb);
    cov.topLeftCorner(na, na) = a.cov();
    cov.bottomRightCorner(nb, nb) = b.cov();
    return {std::move(joined), std::move(mean), std::move(cov), a.gaussian() && b.gaussian()};
}

inline double expectation(const MomentState& s, const LinearObservable& obs) {
    require_same_system(s.system(), obs.system(), "expectation");
    return obs.coeffs().dot(s.mean()) + obs.offset();
}

inline double variance(const MomentState& s, const LinearObservable& obs) {
    require_same_system(s.system(), obs.system(), "variance");
    return std::max(0.0, obs.coeffs().dot(s.cov() * obs.coeffs()));
}

/// <L^2> = c^T cov c + <L>^2. The commutator part cancels in a square, so this
/// holds for any state with these moments.
inline double second_moment(const MomentState& s, const LinearObservable& obs) {
    const double m = expectation(s, obs);
    return variance(s, obs) + m * m;
}

inline double std_dev(const MomentState& s, const LinearObservable& obs) {
    return std::sqrt(variance(s, obs));
}

struct RobertsonResult {
    double lhs;    // sigma(A) sigma(B)
    double bound;  // |<[A, B]>| / 2
    bool pass;
};

inline RobertsonResult robertson_check(const MomentState& s, const LinearObservable& a,
                                       const LinearObservable& b, double tol = kDefaultTol) {
    require_same_system(a.system(), b.system(), "robertson_check");
    const double lhs = std_dev(s, a) * std_dev(s, b);
    const double bound = 0.5 * std::abs(commutator_constant(a, b));
    return {lhs, bound, lhs >= bound - tol};
}

/// Schroedinger-picture counterpart of heisenberg_apply.
inline MomentState evolve(const MomentState& s, const SymplecticPropagation& prop) {
    require_same_system(s.system(), prop.system(), "evolve");
    const Matrix& m = prop.matrix();
    Matrix cov = m * s.cov() * m.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    return {s.system(), m * s.mean(), std::move(cov), s.gaussian()};
}

/// Normal law of one linear observable; variance 0 is a point mass.
struct ScalarDistribution {
    double mean = 0.0;
    double variance = 0.0;

    [[nodiscard]] double stddev() const { return std::sqrt(variance); }

    [[nodiscard]] double cdf(double x) const {
        if (variance == 0.0) return x >= mean ? 1.0 : 0.0;
        return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
    }

    /// Pr{lo < X <= hi}.
    [[nodiscard]] double interval_probability(double lo, double hi) const {
        if (hi <= lo) return 0.0;
        return cdf(hi) - cdf(lo);
    }

    [[nodiscard]] double pdf(double x) const {
        if (variance == 0.0) return x == mean ? INFINITY : 0.0;
        const double z = (x - mean) / std::sqrt(variance);
        return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi * variance);
    }
};

class NotGaussianError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline ScalarDistribution observable_distribution(const MomentState& s,
                                                  const LinearObservable& obs) {
    if (!s.gaussian()) {
        throw NotGaussianError(
            "observable_distribution: state is not Gaussian; moments do not fix interval "
            "probabilities");
    }
    return {expectation(s, obs), variance(s, obs)};
}

/// Counter-based generator: output k is splitmix64 of (seed, k). Streams are
/// reproducible across platforms and can be split by copying.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ * 0xD1B54A32D192ED03ULL + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(phi);
        return r * std::cos(phi);
    }

    [[nodiscard]] std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::optional<double> spare_;
};

inline std::vector<double> sample_outcomes(const ScalarDistribution& d, std::size_t count,
                                           CounterRng& rng) {
    std::vector<double> out(count);
    const double sd = d.stddev();
    for (auto& v : out) v = d.mean + sd * rng.normal();
    return out;
}

inline std::vector<double> sample_outcomes(const ScalarDistribution& d, std::size_t count,
                                           std::uint64_t seed) {
    CounterRng rng(seed);
    return sample_outcomes(d, count, rng);
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `d`.
inline double ks_statistic(std::vector<double> samples, const ScalarDistribution& d) {
    if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double stat = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = d.cdf(samples[i]);
        stat = std::max({stat, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return stat;
}

/// Asymptotic critical value of the one-sample KS statistic at the 1% level.
inline double ks_critical_1pct(std::size_t n) {
    return 1.6276 / std::sqrt(static_cast<double>(n));
}

}  // namespace qmeas

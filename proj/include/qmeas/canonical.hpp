#pragma once

// Canonical-mode bookkeeping. Coordinates are interleaved per mode,
// r = (x_1, p_1, x_2, p_2, ...), and Omega is block-diagonal with 2x2 blocks
// [[0, 1], [-1, 0]], so that [r_i, r_j] = i hbar Omega_ij.

#include "qmeas/numerics.hpp"

#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace qmeas {

class ModeSystem {
public:
    explicit ModeSystem(std::vector<std::string> labels, double hbar = 1.0)
        : labels_(std::move(labels)), hbar_(hbar) {
        if (labels_.empty()) throw DimensionError("ModeSystem: at least one mode required");
        if (!(hbar_ > 0.0) || !std::isfinite(hbar_)) {
            throw std::invalid_argument("ModeSystem: hbar must be positive and finite");
        }
    }

    [[nodiscard]] std::size_t modes() const { return labels_.size(); }
    [[nodiscard]] Eigen::Index dim() const { return static_cast<Eigen::Index>(2 * labels_.size()); }
    [[nodiscard]] double hbar() const { return hbar_; }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }

    [[nodiscard]] Eigen::Index x_index(std::size_t mode) const {
        check_mode(mode);
        return static_cast<Eigen::Index>(2 * mode);
    }
    [[nodiscard]] Eigen::Index p_index(std::size_t mode) const {
        check_mode(mode);
        return static_cast<Eigen::Index>(2 * mode + 1);
    }

    [[nodiscard]] Matrix symplectic_form() const {
        Matrix omega = Matrix::Zero(dim(), dim());
        for (Eigen::Index k = 0; k < dim(); k += 2) {
            omega(k, k + 1) = 1.0;
            omega(k + 1, k) = -1.0;
        }
        return omega;
    }

    /// Disjoint union: modes of `other` follow the modes of this system.
    [[nodiscard]] ModeSystem join(const ModeSystem& other) const {
        if (hbar_ != other.hbar_) throw DimensionError("ModeSystem::join: hbar mismatch");
        std::vector<std::string> labels = labels_;
        labels.insert(labels.end(), other.labels_.begin(), other.labels_.end());
        return ModeSystem(std::move(labels), hbar_);
    }

    friend bool operator==(const ModeSystem&, const ModeSystem&) = default;

private:
    void check_mode(std::size_t mode) const {
        if (mode >= labels_.size()) {
            throw DimensionError("ModeSystem: mode index " + std::to_string(mode) +
                                 " out of range for " + std::to_string(labels_.size()) + " modes");
        }
    }

    std::vector<std::string> labels_;
    double hbar_;
};

inline void require_same_system(const ModeSystem& a, const ModeSystem& b, const char* what) {
    if (!(a == b)) throw DimensionError(std::string(what) + ": mode system mismatch");
}

/// coeffs . r + offset. Hermitian by construction since all coefficients are real.
class LinearObservable {
public:
    LinearObservable(ModeSystem system, Vector coeffs, double offset = 0.0)
        : system_(std::move(system)), coeffs_(std::move(coeffs)), offset_(offset) {
        if (coeffs_.size() != system_.dim()) {
            throw DimensionError("LinearObservable: coefficient vector has length " +
                                 std::to_string(coeffs_.size()) + ", expected " +
                                 std::to_string(system_.dim()));
        }
        if (!coeffs_.allFinite() || !std::isfinite(offset_)) {
            throw std::invalid_argument("LinearObservable: non-finite coefficients");
        }
    }

    static LinearObservable position(const ModeSystem& system, std::size_t mode) {
        Vector c = Vector::Zero(system.dim());
        c(system.x_index(mode)) = 1.0;
        return {system, std::move(c)};
    }
    static LinearObservable momentum(const ModeSystem& system, std::size_t mode) {
        Vector c = Vector::Zero(system.dim());
        c(system.p_index(mode)) = 1.0;
        return {system, std::move(c)};
    }
    static LinearObservable constant(const ModeSystem& system, double value) {
        return {system, Vector::Zero(system.dim()), value};
    }

    [[nodiscard]] const ModeSystem& system() const { return system_; }
    [[nodiscard]] const Vector& coeffs() const { return coeffs_; }
    [[nodiscard]] double offset() const { return offset_; }

    [[nodiscard]] bool is_zero(double tol = 0.0) const {
        return coeffs_.cwiseAbs().maxCoeff() <= tol && std::abs(offset_) <= tol;
    }

    /// True when every nonzero coefficient belongs to `mode`.
    [[nodiscard]] bool supported_on(std::size_t mode) const {
        for (Eigen::Index i = 0; i < coeffs_.size(); ++i) {
            if (coeffs_(i) != 0.0 && static_cast<std::size_t>(i / 2) != mode) return false;
        }
        return true;
    }

    friend LinearObservable operator+(const LinearObservable& a, const LinearObservable& b) {
        require_same_system(a.system_, b.system_, "LinearObservable::operator+");
        return {a.system_, a.coeffs_ + b.coeffs_, a.offset_ + b.offset_};
    }
    friend LinearObservable operator-(const LinearObservable& a, const LinearObservable& b) {
        require_same_system(a.system_, b.system_, "LinearObservable::operator-");
        return {a.system_, a.coeffs_ - b.coeffs_, a.offset_ - b.offset_};
    }
    friend LinearObservable operator*(double s, const LinearObservable& a) {
        return {a.system_, s * a.coeffs_, s * a.offset_};
    }
    friend LinearObservable operator-(const LinearObservable& a) { return -1.0 * a; }

private:
    ModeSystem system_;
    Vector coeffs_;
    double offset_;
};

/// One bilinear term c * r_i r_j of a Hamiltonian, written in operator order.
struct QuadraticTerm {
    double coefficient;
    std::size_t first;
    std::size_t second;
};

/// H_op = (1/2) r^T H r with a symmetric real form H.
class QuadraticHamiltonian {
public:
    QuadraticHamiltonian(ModeSystem system, Matrix form)
        : system_(std::move(system)), form_(std::move(form)) {
        if (form_.rows() != system_.dim() || form_.cols() != system_.dim()) {
            throw DimensionError("QuadraticHamiltonian: form must be 2n x 2n");
        }
        if (!form_.allFinite()) throw std::invalid_argument("QuadraticHamiltonian: non-finite form");
        if (!is_symmetric(form_, 0.0)) {
            throw std::invalid_argument("QuadraticHamiltonian: form is not symmetric");
        }
    }

    [[nodiscard]] const ModeSystem& system() const { return system_; }
    [[nodiscard]] const Matrix& form() const { return form_; }

    [[nodiscard]] QuadraticHamiltonian scaled(double factor) const {
        return {system_, factor * form_};
    }

private:
    ModeSystem system_;
    Matrix form_;
};

/// Weyl-symmetrizes each term into a quadratic form.
///
/// Reordering x_k p_k into (x_k p_k + p_k x_k)/2 leaves a constant +i hbar/2
/// (and p_k x_k leaves -i hbar/2). Those constants are dropped, which is only
/// sound when they cancel over the whole term list; otherwise the operator was
/// not Hermitian and construction fails.
inline QuadraticHamiltonian build_quadratic(const ModeSystem& system,
                                            const std::vector<QuadraticTerm>& terms) {
    const auto dim = static_cast<std::size_t>(system.dim());
    Matrix form = Matrix::Zero(system.dim(), system.dim());
    double imaginary_constant = 0.0;  // in units of i hbar
    double scale = 0.0;
    for (const auto& t : terms) {
        if (t.first >= dim || t.second >= dim) {
            throw DimensionError("build_quadratic: coordinate index out of range (" +
                                 std::to_string(t.first) + ", " + std::to_string(t.second) +
                                 ") for dimension " + std::to_string(dim));
        }
        if (!std::isfinite(t.coefficient)) {
            throw std::invalid_argument("build_quadratic: non-finite coefficient");
        }
        const auto i = static_cast<Eigen::Index>(t.first);
        const auto j = static_cast<Eigen::Index>(t.second);
        if (i == j) {
            form(i, i) += 2.0 * t.coefficient;
        } else {
            form(i, j) += t.coefficient;
            form(j, i) += t.coefficient;
            if (i / 2 == j / 2) imaginary_constant += (i < j ? 0.5 : -0.5) * t.coefficient;
        }
        scale += std::abs(t.coefficient);
    }
    if (std::abs(imaginary_constant) > 1e-12 * scale) {
        throw std::invalid_argument(
            "build_quadratic: term list is not Hermitian (uncancelled x p ordering constant " +
            std::to_string(imaginary_constant) + " i hbar)");
    }
    return {system, std::move(form)};
}

/// Heisenberg-picture map r(t + tau) = S r(t).
class SymplecticPropagation {
public:
    SymplecticPropagation(ModeSystem system, Matrix matrix)
        : system_(std::move(system)), matrix_(std::move(matrix)) {
        if (matrix_.rows() != system_.dim() || matrix_.cols() != system_.dim()) {
            throw DimensionError("SymplecticPropagation: matrix must be 2n x 2n");
        }
    }

    static SymplecticPropagation identity(const ModeSystem& system) {
        return {system, Matrix::Identity(system.dim(), system.dim())};
    }

    [[nodiscard]] const ModeSystem& system() const { return system_; }
    [[nodiscard]] const Matrix& matrix() const { return matrix_; }

    /// Frobenius norm of S Omega S^T - Omega.
    [[nodiscard]] double symplectic_defect() const {
        const Matrix omega = system_.symplectic_form();
        return (matrix_ * omega * matrix_.transpose() - omega).norm();
    }
    [[nodiscard]] bool is_symplectic(double tol = kDefaultTol) const {
        return symplectic_defect() <= tol && std::abs(matrix_.determinant() - 1.0) <= tol;
    }

    /// later * earlier: the map of running `earlier` first, then `later`
    /// (same order as the product of the underlying unitaries).
    friend SymplecticPropagation operator*(const SymplecticPropagation& later,
                                           const SymplecticPropagation& earlier) {
        require_same_system(later.system_, earlier.system_, "SymplecticPropagation::operator*");
        return {later.system_, later.matrix_ * earlier.matrix_};
    }

private:
    ModeSystem system_;
    Matrix matrix_;
};

/// Real c with [A, B] = i c; c = hbar a^T Omega b.
inline double commutator_constant(const LinearObservable& a, const LinearObservable& b) {
    require_same_system(a.system(), b.system(), "commutator_constant");
    const ModeSystem& sys = a.system();
    double c = 0.0;
    for (Eigen::Index k = 0; k < sys.dim(); k += 2) {
        c += a.coeffs()(k) * b.coeffs()(k + 1) - a.coeffs()(k + 1) * b.coeffs()(k);
    }
    return sys.hbar() * c;
}

/// dr/dtau = (i/hbar)[H_op, r] = Omega H r, hence S = exp(Omega H duration).
inline SymplecticPropagation propagate(const QuadraticHamiltonian& h, double duration,
                                       double tol = kDefaultTol) {
    if (!std::isfinite(duration)) throw std::invalid_argument("propagate: non-finite duration");
    const Matrix generator = h.system().symplectic_form() * h.form() * duration;
    return {h.system(), mat_exp(generator, tol)};
}

inline LinearObservable heisenberg_apply(const SymplecticPropagation& s,
                                         const LinearObservable& obs) {
    require_same_system(s.system(), obs.system(), "heisenberg_apply");
    return {obs.system(), s.matrix().transpose() * obs.coeffs(), obs.offset()};
}

/// Lifts a propagation on k modes to `target`, acting on target modes
/// mode_map[0..k) and as the identity on every other mode.
inline SymplecticPropagation embed(const SymplecticPropagation& s,
                                   const std::vector<std::size_t>& mode_map,
                                   const ModeSystem& target) {
    if (mode_map.size() != s.system().modes()) {
        throw DimensionError("embed: mode map has " + std::to_string(mode_map.size()) +
                             " entries for a " + std::to_string(s.system().modes()) +
                             "-mode propagation");
    }
    if (s.system().hbar() != target.hbar()) throw DimensionError("embed: hbar mismatch");
    std::set<std::size_t> seen;
    for (std::size_t m : mode_map) {
        if (m >= target.modes()) {
            throw DimensionError("embed: target mode " + std::to_string(m) + " out of range");
        }
        if (!seen.insert(m).second) throw DimensionError("embed: mode map is not injective");
    }
    Matrix big = Matrix::Identity(target.dim(), target.dim());
    const auto k = static_cast<Eigen::Index>(mode_map.size());
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            const auto ta = static_cast<Eigen::Index>(2 * mode_map[static_cast<std::size_t>(a)]);
            const auto tb = static_cast<Eigen::Index>(2 * mode_map[static_cast<std::size_t>(b)]);
            big.block(ta, tb, 2, 2) = s.matrix().block(2 * a, 2 * b, 2, 2);
        }
    }
    return {target, std::move(big)};
}

}  // namespace qmeas

#pragma once

// Small dense real-matrix kernel for 2n x 2n phase-space matrices (n <= 8).
// Storage and LU/eigen solves come from Eigen; the exponential is ours.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace qmeas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-12;

/// Raised when operands have incompatible shapes or belong to different mode systems.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a state violates cov + i(hbar/2) Omega >= 0 or a spec is inadmissible.
class PhysicalityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    }
}

namespace detail {

// Diagonal Pade coefficients b_0..b_m for exp, degrees 3, 5, 7, 9, 13.
inline constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
inline constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
inline constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                                 25200.0,    1512.0,    56.0,      1.0};
inline constexpr std::array<double, 10> kPade9 = {
    17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
    2162160.0,     110880.0,     3960.0,       90.0,        1.0};
inline constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// 1-norm bounds below which the degree-m approximant has backward error under 2^-53.
inline constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                                 9.504178996162932e-1, 2.097847961257068e0,
                                                 5.371920351148152e0};

template <std::size_t N>
Matrix pade_ratio(const Matrix& a, const std::array<double, N>& b) {
    const Eigen::Index n = a.rows();
    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = a * a;
    Matrix even = b[0] * id;
    Matrix odd = b[1] * id;
    Matrix power = id;
    for (std::size_t k = 2; k < N; k += 2) {
        power = power * a2;
        even += b[k] * power;
        if (k + 1 < N) odd += b[k + 1] * power;
    }
    const Matrix u = a * odd;
    return (even - u).partialPivLu().solve(even + u);
}

}  // namespace detail

/// exp(m) by scaling and squaring with a diagonal Pade approximant.
///
/// The degree is the smallest of {3,5,7,9,13} whose threshold covers the
/// 1-norm; otherwise m is scaled by 2^-s into the degree-13 region and the
/// result squared s times. The backward error is at unit roundoff, so any
/// tol >= machine epsilon is met; smaller tolerances are rejected.
inline Matrix mat_exp(const Matrix& m, double tol = kDefaultTol) {
    require_square(m, "mat_exp");
    if (!all_finite(m)) throw std::invalid_argument("mat_exp: non-finite entries");
    if (!(tol >= std::numeric_limits<double>::epsilon())) {
        throw std::invalid_argument("mat_exp: tolerance must be at least machine epsilon");
    }
    const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 == 0.0) return Matrix::Identity(m.rows(), m.cols());

    if (norm1 <= detail::kTheta[0]) return detail::pade_ratio(m, detail::kPade3);
    if (norm1 <= detail::kTheta[1]) return detail::pade_ratio(m, detail::kPade5);
    if (norm1 <= detail::kTheta[2]) return detail::pade_ratio(m, detail::kPade7);
    if (norm1 <= detail::kTheta[3]) return detail::pade_ratio(m, detail::kPade9);

    int squarings = 0;
    if (norm1 > detail::kTheta[4]) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / detail::kTheta[4])));
    }
    Matrix result = detail::pade_ratio(std::ldexp(1.0, -squarings) * m, detail::kPade13);
    for (int i = 0; i < squarings; ++i) result = result * result;
    return result;
}

inline bool is_symmetric(const Matrix& m, double tol = kDefaultTol) {
    if (m.rows() != m.cols()) return false;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
            if (!(std::abs(m(i, j) - m(j, i)) <= tol)) return false;
        }
    }
    return true;
}

inline double frobenius_distance(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "frobenius_distance");
    return (a - b).norm();
}

inline double max_abs_difference(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_difference");
    return (a - b).cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the Hermitian matrix re + i*im (im antisymmetric).
inline double min_hermitian_eigenvalue(const Matrix& re, const Matrix& im) {
    require_same_shape(re, im, "min_hermitian_eigenvalue");
    require_square(re, "min_hermitian_eigenvalue");
    Eigen::MatrixXcd h(re.rows(), re.cols());
    h.real() = re;
    h.imag() = im;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("min_hermitian_eigenvalue: eigensolver did not converge");
    }
    return solver.eigenvalues().minCoeff();
}

}  // namespace qmeas

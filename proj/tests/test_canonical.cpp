#include "qmeas/canonical.hpp"
#include "qmeas/measurement.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace qmeas;

namespace {

const ModeSystem kTwo({"object", "probe"});

// Index order: x = 0, px = 1, y = 2, py = 3.
Matrix heisenberg_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(4, 4);
    Eigen::Index i = 0;
    for (auto r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

SymplecticPropagation random_symplectic(std::mt19937_64& rng, const ModeSystem& sys) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix h(sys.dim(), sys.dim());
    for (Eigen::Index i = 0; i < sys.dim(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) h(i, j) = h(j, i) = n(rng);
    return propagate(QuadraticHamiltonian(sys, h), 0.5);
}

}  // namespace

TEST_CASE("build_quadratic transcribes the von Neumann coupling", "[canonical]") {
    const double k = 2.5;
    const auto h = build_quadratic(kTwo, {{k, 0, 3}});
    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 3) = expected(3, 0) = k;
    CHECK(h.form() == expected);
}

TEST_CASE("build_quadratic expands the Ozawa Hamiltonian", "[canonical]") {
    // (1/2) r^T H r must reproduce g(2 x py - 2 px y + x px - y py).
    const double g = std::numbers::pi / (3.0 * std::sqrt(3.0));
    const auto h = build_quadratic(kTwo, {{2 * g, 0, 3}, {-2 * g, 1, 2}, {g, 0, 1}, {-g, 2, 3}});
    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 3) = expected(3, 0) = 2 * g;
    expected(1, 2) = expected(2, 1) = -2 * g;
    expected(0, 1) = expected(1, 0) = g;
    expected(2, 3) = expected(3, 2) = -g;
    CHECK(max_abs_difference(h.form(), expected) == 0.0);

    // Evaluate the classical polynomial at a sample point.
    Vector r(4);
    r << 0.3, -1.1, 0.7, 2.0;
    const double direct = g * (2 * r(0) * r(3) - 2 * r(1) * r(2) + r(0) * r(1) - r(2) * r(3));
    CHECK(0.5 * r.dot(h.form() * r) == Catch::Approx(direct).epsilon(1e-15));
}

TEST_CASE("build_quadratic edge cases", "[canonical]") {
    CHECK(build_quadratic(kTwo, {}).form() == Matrix::Zero(4, 4));
    CHECK_THROWS_AS(build_quadratic(kTwo, {{1.0, 0, 4}}), DimensionError);
    // x px alone leaves an uncancelled i hbar / 2.
    CHECK_THROWS_AS(build_quadratic(kTwo, {{1.0, 0, 1}}), std::invalid_argument);
    // x px + px x is Hermitian.
    CHECK_NOTHROW(build_quadratic(kTwo, {{1.0, 0, 1}, {1.0, 1, 0}}));
    // Squares contribute 2c on the diagonal.
    CHECK(build_quadratic(kTwo, {{0.5, 1, 1}}).form()(1, 1) == 1.0);
}

TEST_CASE("commutator_constant", "[canonical]") {
    const auto x = LinearObservable::position(kTwo, 0);
    const auto px = LinearObservable::momentum(kTwo, 0);
    const auto y = LinearObservable::position(kTwo, 1);
    CHECK(commutator_constant(x, px) == 1.0);
    CHECK(commutator_constant(x, y) == 0.0);

    const ModeSystem h2({"a"}, 2.0);
    CHECK(commutator_constant(LinearObservable::position(h2, 0), LinearObservable::momentum(h2, 0)) ==
          2.0);

    const auto d = disturbance_operator(ozawa_model(), px);
    CHECK(commutator_constant(x, d) == Catch::Approx(-1.0).margin(1e-12));

    CHECK_THROWS_AS(commutator_constant(x, LinearObservable::position(h2, 0)), DimensionError);
}

TEST_CASE("commutator_constant is antisymmetric and bilinear", "[canonical][property]") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    auto rand_obs = [&] {
        Vector c(4);
        for (auto& v : c) v = n(rng);
        return LinearObservable(kTwo, c, n(rng));
    };
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = rand_obs(), b = rand_obs(), c = rand_obs();
        const double s = n(rng);
        CHECK(commutator_constant(a, b) == -commutator_constant(b, a));
        CHECK(commutator_constant(s * a + c, b) ==
              Catch::Approx(s * commutator_constant(a, b) + commutator_constant(c, b)).margin(1e-12));
    }
}

TEST_CASE("propagate reproduces the von Neumann endpoint map", "[canonical]") {
    const auto h = build_quadratic(kTwo, {{1.0, 0, 3}});
    const auto s = propagate(h, 1.0);
    // x -> x, px -> px - py, y -> x + y, py -> py
    const Matrix expected = heisenberg_rows({{1, 0, 0, 0}, {0, 1, 0, -1}, {1, 0, 1, 0}, {0, 0, 0, 1}});
    CHECK(max_abs_difference(s.matrix(), expected) <= 1e-15);
}

TEST_CASE("propagate reproduces the Ozawa endpoint and half-time maps", "[canonical]") {
    const auto m = ozawa_model(1.0);
    const Matrix expected = heisenberg_rows({{1, 0, -1, 0}, {0, 0, 0, -1}, {1, 0, 0, 0}, {0, 1, 0, 1}});
    CHECK(max_abs_difference(m.endpoint().matrix(), expected) <= 1e-12);

    // K tau = 1/2: x(t+tau) = (2/sqrt3) x - (1/sqrt3) y.
    const Matrix half = m.propagation(0.5).matrix();
    CHECK(half(0, 0) == Catch::Approx(2.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(half(0, 2) == Catch::Approx(-1.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(half(0, 1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(half(0, 3) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("propagate output is symplectic with a group law", "[canonical][property]") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix form(4, 4);
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) form(i, j) = form(j, i) = n(rng);
        const QuadraticHamiltonian h(kTwo, form);
        const double s = 0.4 * n(rng), t = 0.4 * n(rng);
        const auto ps = propagate(h, s), pt = propagate(h, t);
        CHECK(ps.symplectic_defect() <= 1e-12);
        CHECK(std::abs(ps.matrix().determinant() - 1.0) <= 1e-12);
        const auto pst = propagate(h, s + t);
        CHECK(max_abs_difference((ps * pt).matrix(), pst.matrix()) <=
              1e-12 * std::max(1.0, pst.matrix().cwiseAbs().maxCoeff()));

        // Commutators survive the Heisenberg map.
        Vector ca(4), cb(4);
        for (auto& v : ca) v = n(rng);
        for (auto& v : cb) v = n(rng);
        const LinearObservable a(kTwo, ca), b(kTwo, cb);
        CHECK(commutator_constant(heisenberg_apply(ps, a), heisenberg_apply(ps, b)) ==
              Catch::Approx(commutator_constant(a, b)).margin(1e-12 * ps.matrix().squaredNorm()));
    }
}

TEST_CASE("heisenberg_apply", "[canonical]") {
    Vector c(4);
    c << 1.0, 2.0, 3.0, 4.0;
    const LinearObservable obs(kTwo, c, 0.25);
    const auto same = heisenberg_apply(SymplecticPropagation::identity(kTwo), obs);
    CHECK(same.coeffs() == obs.coeffs());
    CHECK(same.offset() == 0.25);

    const auto y_out = heisenberg_apply(ozawa_model().endpoint(), LinearObservable::position(kTwo, 1));
    Vector x_only = Vector::Zero(4);
    x_only(0) = 1.0;
    CHECK((y_out.coeffs() - x_only).cwiseAbs().maxCoeff() <= 1e-12);

    const auto px_out = heisenberg_apply(von_neumann_model().endpoint(), LinearObservable::momentum(kTwo, 0));
    Vector px_minus_py = Vector::Zero(4);
    px_minus_py(1) = 1.0;
    px_minus_py(3) = -1.0;
    CHECK((px_out.coeffs() - px_minus_py).cwiseAbs().maxCoeff() <= 1e-15);

    CHECK_THROWS_AS(heisenberg_apply(SymplecticPropagation::identity(ModeSystem({"a"})), obs),
                    DimensionError);
}

TEST_CASE("embed places a two-mode map on chosen modes", "[canonical]") {
    const ModeSystem three({"object", "probe1", "probe2"});
    const auto id = embed(SymplecticPropagation::identity(kTwo), {0, 2}, three);
    CHECK(id.matrix() == Matrix::Identity(6, 6));

    const auto big = embed(ozawa_model().endpoint(), {0, 2}, three);
    const auto z = heisenberg_apply(big, LinearObservable::position(three, 2));
    const auto x = heisenberg_apply(big, LinearObservable::position(three, 0));
    Vector ez = Vector::Zero(6), ex = Vector::Zero(6);
    ez(0) = 1.0;            // z reads x
    ex(0) = 1.0;
    ex(4) = -1.0;           // x reads x - z
    CHECK((z.coeffs() - ez).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((x.coeffs() - ex).cwiseAbs().maxCoeff() <= 1e-12);
    // probe1 untouched
    const auto y = heisenberg_apply(big, LinearObservable::position(three, 1));
    CHECK(y.coeffs()(2) == 1.0);
    CHECK(y.coeffs().cwiseAbs().sum() == 1.0);

    CHECK_THROWS_AS(embed(ozawa_model().endpoint(), {0, 0}, three), DimensionError);
    CHECK_THROWS_AS(embed(ozawa_model().endpoint(), {0, 3}, three), DimensionError);
    CHECK_THROWS_AS(embed(ozawa_model().endpoint(), {0}, three), DimensionError);
}

TEST_CASE("embedding preserves symplecticity", "[canonical][property]") {
    std::mt19937_64 rng(4);
    const ModeSystem four({"a", "b", "c", "d"});
    const std::vector<std::vector<std::size_t>> maps{{0, 1}, {3, 1}, {2, 0}, {1, 3}};
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = random_symplectic(rng, kTwo);
        const auto e = embed(s, maps[static_cast<std::size_t>(trial) % maps.size()], four);
        CHECK(e.symplectic_defect() <= 1e-12 * std::max(1.0, s.matrix().squaredNorm()));
    }
}

#include "qmeas/measurement.hpp"
#include "qmeas/states.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace qmeas;

namespace {

const ModeSystem kOne({"object"});
const ModeSystem kTwo({"object", "probe"});

// Random admissible mode: widths log-uniform, correlation in (-0.9, 0.9),
// squeezed or thermal above the Robertson bound.
ModeSpec random_mode(std::mt19937_64& rng, double hbar = 1.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ModeSpec m;
    m.sigma_x = std::exp(4.0 * u(rng) - 2.0);
    m.correlation = 1.8 * u(rng) - 0.9;
    const double floor = hbar / (2.0 * m.sigma_x * std::sqrt(1.0 - m.correlation * m.correlation));
    m.sigma_p = floor * (1.0 + (u(rng) < 0.3 ? 0.0 : 3.0 * u(rng)));
    m.mean_x = 4.0 * u(rng) - 2.0;
    m.mean_p = 4.0 * u(rng) - 2.0;
    return m;
}

}  // namespace

TEST_CASE("from_gaussian builds per-mode covariance blocks", "[states]") {
    const double s = std::sqrt(0.5);
    const auto vac = from_gaussian(ModeSpec{0, 0, s, s, 0}, "object");
    CHECK(max_abs_difference(vac.cov(), 0.5 * Matrix::Identity(2, 2)) <= 1e-15);
    CHECK(vac.gaussian());

    CHECK_THROWS_AS(from_gaussian(ModeSpec{0, 0, 0.1, 0.1, 0}, "object"), PhysicalityError);
    CHECK_THROWS_AS(from_gaussian(ModeSpec{0, 0, 1, 1, 1.0}, "object"), PhysicalityError);
    CHECK_THROWS_AS(from_gaussian(ModeSpec{0, 0, -1, 1, 0}, "object"), PhysicalityError);

    const auto st = from_gaussian(ModeSpec{0, 0, 1, 2, 0}, "object");
    CHECK(st.cov()(0, 0) == 1.0);
    CHECK(st.cov()(1, 1) == 4.0);
    CHECK(st.cov()(0, 1) == 0.0);

    const auto corr = from_gaussian(ModeSpec{0, 0, 1, 2, 0.5}, "object");
    CHECK(corr.cov()(0, 1) == 1.0);
}

TEST_CASE("MomentState enforces physicality", "[states]") {
    Matrix cov = 0.1 * Matrix::Identity(2, 2);
    CHECK_THROWS_AS(MomentState(kOne, Vector::Zero(2), cov, true), PhysicalityError);
    Matrix asym = 0.5 * Matrix::Identity(2, 2);
    asym(0, 1) = 0.1;
    CHECK_THROWS_AS(MomentState(kOne, Vector::Zero(2), asym, true), std::invalid_argument);
    CHECK_THROWS_AS(MomentState(kOne, Vector::Zero(4), 0.5 * Matrix::Identity(2, 2), true),
                    DimensionError);
}

TEST_CASE("product concatenates means and blocks", "[states]") {
    const auto a = from_gaussian(ModeSpec{1, 2, 1, 1, 0}, "object");
    const auto b = from_gaussian(ModeSpec{3, 4, 2, 0.5, 0.3}, "probe");
    const auto ab = product(a, b);
    CHECK(ab.system() == kTwo);
    Vector mean(4);
    mean << 1, 2, 3, 4;
    CHECK(ab.mean() == mean);
    CHECK(ab.cov().topLeftCorner(2, 2) == a.cov());
    CHECK(ab.cov().bottomRightCorner(2, 2) == b.cov());
    CHECK(ab.cov().topRightCorner(2, 2) == Matrix::Zero(2, 2));
}

TEST_CASE("product is associative on blocks", "[states][property]") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = from_gaussian(random_mode(rng), "a");
        const auto b = from_gaussian(random_mode(rng), "b");
        const auto c = from_gaussian(random_mode(rng), "c");
        const auto left = product(product(a, b), c);
        const auto right = product(a, product(b, c));
        CHECK(left.system() == right.system());
        CHECK(left.mean() == right.mean());
        CHECK(left.cov() == right.cov());
    }
}

TEST_CASE("expectation, second_moment and std_dev", "[states]") {
    const auto psi = from_gaussian(ModeSpec{3, 1, 1, 1, 0}, "object");
    const auto xi = from_gaussian(ModeSpec{0, 2, 0.5, 2, 0}, "probe");
    const auto s = product(psi, xi);
    const auto x = LinearObservable::position(kTwo, 0);
    const auto px = LinearObservable::momentum(kTwo, 0);
    const auto y = LinearObservable::position(kTwo, 1);
    const auto py = LinearObservable::momentum(kTwo, 1);

    CHECK(expectation(s, x) == 3.0);
    CHECK(expectation(s, px + py) == 3.0);
    CHECK(expectation(s, LinearObservable::constant(kTwo, 1.5)) == 1.5);

    CHECK(second_moment(s, y) == Catch::Approx(0.25));
    CHECK(second_moment(s, LinearObservable::constant(kTwo, 0.0)) == 0.0);

    const auto zero_mean = product(from_gaussian(ModeSpec{0, 0, 1, 1, 0}, "object"),
                                   from_gaussian(ModeSpec{0, 0, 1, 2, 0}, "probe"));
    // sigma(px)^2 + sigma(py)^2 + (<px> + <py>)^2 = 1 + 4 + 0
    CHECK(second_moment(zero_mean, px + py) == Catch::Approx(5.0));

    CHECK(std_dev(psi, LinearObservable::position(kOne, 0)) == 1.0);
    CHECK(std_dev(s, LinearObservable::constant(kTwo, 7.0)) == 0.0);
    const auto wide = product(from_gaussian(ModeSpec{0, 0, 3, 1, 0}, "object"),
                              from_gaussian(ModeSpec{0, 0, 4, 1, 0}, "probe"));
    CHECK(std_dev(wide, x + y) == Catch::Approx(5.0));

    CHECK_THROWS_AS(expectation(psi, x), DimensionError);
}

TEST_CASE("robertson_check", "[states]") {
    const double s = std::sqrt(0.5);
    const auto vac = product(from_gaussian(ModeSpec{0, 0, s, s, 0}, "object"),
                             from_gaussian(ModeSpec{0, 0, 1, 2, 0}, "probe"));
    const auto x = LinearObservable::position(kTwo, 0);
    const auto px = LinearObservable::momentum(kTwo, 0);
    const auto y = LinearObservable::position(kTwo, 1);
    const auto py = LinearObservable::momentum(kTwo, 1);

    const auto r = robertson_check(vac, x, px);
    CHECK(r.lhs == Catch::Approx(0.5));
    CHECK(r.bound == 0.5);
    CHECK(r.pass);

    const auto commuting = robertson_check(vac, x, y);
    CHECK(commuting.bound == 0.0);
    CHECK(commuting.pass);

    const auto probe = robertson_check(vac, y, py);
    CHECK(probe.lhs == Catch::Approx(2.0));
    CHECK(probe.bound == 0.5);
    CHECK(probe.pass);
}

TEST_CASE("robertson_check holds on random admissible states", "[states][property]") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    int failures = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto st = product(from_gaussian(random_mode(rng), "object"),
                                from_gaussian(random_mode(rng), "probe"));
        Vector ca(4), cb(4);
        for (auto& v : ca) v = n(rng);
        for (auto& v : cb) v = n(rng);
        const auto r = robertson_check(st, LinearObservable(kTwo, ca), LinearObservable(kTwo, cb),
                                       1e-12 * (1.0 + ca.squaredNorm() * cb.squaredNorm()));
        if (!r.pass) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("evolve is the Schroedinger picture of heisenberg_apply", "[states][property]") {
    const auto psi = from_gaussian(ModeSpec{0.2, -0.3, 1.5, 0.5, 0}, "object");
    const auto xi = from_gaussian(ModeSpec{0, 0, 0.7, 1.0, 0.2}, "probe");
    const auto s = product(psi, xi);
    CHECK(evolve(s, SymplecticPropagation::identity(kTwo)).cov() == s.cov());

    const auto after = evolve(s, ozawa_model().endpoint());
    CHECK(after.cov()(0, 0) == Catch::Approx(1.5 * 1.5 + 0.7 * 0.7).epsilon(1e-12));

    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const auto st = product(from_gaussian(random_mode(rng), "object"),
                                from_gaussian(random_mode(rng), "probe"));
        Matrix form(4, 4);
        for (Eigen::Index i = 0; i < 4; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) form(i, j) = form(j, i) = n(rng);
        const auto prop = propagate(QuadraticHamiltonian(kTwo, form), 0.3);
        MomentState evolved = evolve(st, prop);  // constructor re-checks physicality
        Vector c(4);
        for (auto& v : c) v = n(rng);
        const LinearObservable obs(kTwo, c, n(rng));
        const double a = expectation(evolved, obs);
        const double b = expectation(st, heisenberg_apply(prop, obs));
        CHECK(a == Catch::Approx(b).margin(1e-12 * (1.0 + std::abs(b))));
    }
}

TEST_CASE("observable_distribution", "[states]") {
    const double s = std::sqrt(0.5);
    const auto vac = product(from_gaussian(ModeSpec{0, 0, s, s, 0}, "object"),
                             from_gaussian(ModeSpec{0.4, 0, 0.3, 2.0, 0}, "probe"));
    const auto x = LinearObservable::position(kTwo, 0);
    const auto dx = observable_distribution(vac, x);
    CHECK(dx.mean == 0.0);
    CHECK(dx.variance == Catch::Approx(0.5));
    CHECK(dx.cdf(0.0) == Catch::Approx(0.5));
    CHECK(dx.interval_probability(-1.0, 1.0) == Catch::Approx(std::erf(1.0)));

    const auto point = observable_distribution(vac, LinearObservable::constant(kTwo, 2.0));
    CHECK(point.variance == 0.0);
    CHECK(point.cdf(1.999) == 0.0);
    CHECK(point.cdf(2.0) == 1.0);

    // Ozawa readout y(t + dt) = x(t): same law as the object position.
    const auto m = ozawa_model();
    const auto out = observable_distribution(evolve(vac, m.endpoint()), m.probe_obs());
    CHECK(out.mean == Catch::Approx(dx.mean).margin(1e-12));
    CHECK(out.variance == Catch::Approx(dx.variance).epsilon(1e-12));

    const MomentState non_gaussian(kTwo, vac.mean(), vac.cov(), false);
    CHECK_THROWS_AS(observable_distribution(non_gaussian, x), NotGaussianError);
}

TEST_CASE("sample_outcomes statistics and determinism", "[states]") {
    const ScalarDistribution d{1.5, 4.0};
    const std::size_t count = 100000;
    const auto a = sample_outcomes(d, count, 42);
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    var /= static_cast<double>(count - 1);

    CHECK(std::abs(mean - d.mean) <= 4.0 * d.stddev() / std::sqrt(static_cast<double>(count)));
    CHECK(var / d.variance >= 0.9);
    CHECK(var / d.variance <= 1.1);

    CHECK(sample_outcomes(d, 1000, 42) == std::vector<double>(a.begin(), a.begin() + 1000));
    CHECK(sample_outcomes(d, 1000, 43) != std::vector<double>(a.begin(), a.begin() + 1000));
    CHECK(ks_statistic(a, d) < ks_critical_1pct(count));
}

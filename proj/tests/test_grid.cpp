#include "qmeas/grid.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace qmeas;
using namespace qmeas::grid;

namespace {

ModeSpec pure(double mean_x, double mean_p, double sigma_x, double rho = 0.0) {
    return {mean_x, mean_p, sigma_x, 1.0 / (2.0 * sigma_x * std::sqrt(1.0 - rho * rho)), rho};
}

GridSpec small_grid(double l = 10.0, std::size_t n = 256) { return {n, n, l, l, kDefaultBoundaryThreshold}; }

double max_moment_error(const MomentState& a, const MomentState& b) {
    return std::max((a.mean() - b.mean()).cwiseAbs().maxCoeff(), (a.cov() - b.cov()).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("Gaussian grid states are normalized and reproduce their moments", "[grid]") {
    const ModeSpec obj = pure(0.0, 0.0, 1.0);
    const ModeSpec prb = pure(0.0, 0.0, 1.0);
    const auto s = init_gaussian_grid(obj, prb, small_grid());
    CHECK(std::abs(s.norm_squared() - 1.0) <= 1e-10);
    const auto m = grid_moments(s);
    CHECK(std::abs(m.mean()(kX)) <= 1e-10);

    // Oracle: closed-form moments from the spec, at the fine grid and l = 10 sigma.
    const ModeSpec obj2 = pure(0.3, -0.4, 0.8, 0.35);
    const ModeSpec prb2 = pure(-0.2, 0.25, 0.6, -0.2);
    GridSpec fine{512, 512, 10.0 * 0.8 / 0.6 * 0.6, 10.0 * 0.8, kDefaultBoundaryThreshold};
    fine.lx = fine.ly = 10.0 * 0.8 + 0.5;
    const auto grid_m = grid_moments(init_gaussian_grid(obj2, prb2, fine));
    const auto exact = from_gaussian(GaussianSpec{obj2, prb2}, object_probe_system());
    CHECK(max_moment_error(grid_m, exact) <= 1e-6);
}

TEST_CASE("wavefunction requires a pure Gaussian", "[grid]") {
    CHECK_THROWS_AS(gaussian_wavefunction(ModeSpec{0, 0, 1.0, 1.0, 0}), PhysicalityError);
}

TEST_CASE("x p_y shear", "[grid]") {
    const auto s = init_gaussian_grid(pure(0.7, 0.1, 0.8), pure(-0.3, 0.2, 0.6), small_grid(12.0));
    const auto same = apply_shear_x_py(s, 0.0);
    CHECK(distance_squared(same, s) == 0.0);

    const auto there = apply_shear_x_py(s, 1.0);
    CHECK(std::abs(there.norm_squared() - 1.0) <= 1e-10);
    const auto back = apply_shear_x_py(there, -1.0);
    CHECK(std::sqrt(distance_squared(back, s)) <= 1e-10);

    const auto before = grid_moments(s);
    const auto after = grid_moments(there);
    // <y> -> <y> + <x>, <p_x> -> <p_x> - <p_y>
    CHECK(after.mean()(kY) == Catch::Approx(before.mean()(kY) + before.mean()(kX)).margin(1e-9));
    CHECK(after.mean()(kPx) == Catch::Approx(before.mean()(kPx) - before.mean()(kPy)).margin(1e-9));
}

TEST_CASE("p_x y shear", "[grid]") {
    const auto s = init_gaussian_grid(pure(0.5, -0.3, 0.9), pure(0.4, 0.6, 0.7), small_grid(12.0));
    CHECK(distance_squared(apply_shear_px_y(s, 0.0), s) == 0.0);
    const auto there = apply_shear_px_y(s, 1.0);
    CHECK(std::sqrt(distance_squared(apply_shear_px_y(there, -1.0), s)) <= 1e-10);

    const auto before = grid_moments(s);
    const auto after = grid_moments(there);
    // x -> x - y, p_y -> p_y + p_x
    CHECK(after.mean()(kX) == Catch::Approx(before.mean()(kX) - before.mean()(kY)).margin(1e-9));
    CHECK(after.mean()(kPy) == Catch::Approx(before.mean()(kPy) + before.mean()(kPx)).margin(1e-9));
}

TEST_CASE("grid Ozawa unitary matches the symplectic map on moments", "[grid]") {
    const ModeSpec obj = pure(0.4, -0.2, 0.9, 0.3);
    const ModeSpec prb = pure(-0.1, 0.3, 0.5, -0.25);
    const auto g = fit_grid(obj, prb, GridModel::ozawa, 512);
    const auto s = init_gaussian_grid(obj, prb, g);
    const auto u = ozawa_unitary(s);
    CHECK(std::abs(u.norm_squared() - 1.0) <= 1e-10);
    const auto expected = evolve(from_gaussian(GaussianSpec{obj, prb}, object_probe_system()),
                                 ozawa_model().endpoint());
    CHECK(max_moment_error(grid_moments(u), expected) <= 1e-6);
}

TEST_CASE("grid noise and disturbance agree with the moment engine", "[grid]") {
    const ModeSpec obj = pure(0.3, 0.2, 1.0);
    const ModeSpec prb = pure(0.0, 0.0, 0.5);
    const MomentState composite = from_gaussian(GaussianSpec{obj, prb}, object_probe_system());
    const auto px = LinearObservable::momentum(object_probe_system(), 0);

    const auto s_oz = init_gaussian_grid(obj, prb, fit_grid(obj, prb, GridModel::ozawa, 512));
    const auto oz = grid_noise_disturbance(s_oz, GridModel::ozawa);
    CHECK(oz.epsilon <= 1e-8);
    CHECK(std::abs(oz.eta - disturbance(ozawa_model(), composite, px)) <= 1e-4);
    CHECK(grid_noise(s_oz, GridModel::ozawa) == oz.epsilon);
    CHECK(grid_disturbance(s_oz, GridModel::ozawa) == oz.eta);

    const auto s_vn = init_gaussian_grid(obj, prb, fit_grid(obj, prb, GridModel::von_neumann, 512));
    const auto vn = grid_noise_disturbance(s_vn, GridModel::von_neumann);
    CHECK(std::abs(vn.epsilon - 0.5) <= 1e-4);
    CHECK(std::abs(vn.eta - disturbance(von_neumann_model(), composite, px)) <= 1e-4);
}

TEST_CASE("bimodal object: precise output and moment-level epsilon/eta", "[grid]") {
    const ModeSpec packet = pure(0.0, 0.0, 0.6);
    const ModeSpec prb = pure(0.0, 0.0, 0.5);
    const GridSpec g{512, 512, 16.0, 16.0, kDefaultBoundaryThreshold};
    const auto s = init_product_grid(bimodal_wavefunction(packet, 5.0), gaussian_wavefunction(prb), g);

    const auto r = grid_noise_disturbance(s, GridModel::ozawa);
    CHECK(r.epsilon <= 1e-6);
    const MomentState moments = grid_moments(s);
    CHECK_FALSE(moments.gaussian());
    const auto px = LinearObservable::momentum(object_probe_system(), 0);
    CHECK(std::abs(r.eta - disturbance(ozawa_model(), moments, px)) <= 1e-4);

    const auto out = output_histogram(s, GridModel::ozawa, 128);
    const auto in = position_histogram(s, Coordinate::x, 128);
    CHECK(std::abs(out.total() - 1.0) <= 1e-10);
    CHECK(total_variation(out, in) <= 1e-3);
    // Two separated peaks survive in the readout.
    const std::size_t mid = 64;
    CHECK(out.probabilities[mid] < 0.1 * *std::max_element(out.probabilities.begin(), out.probabilities.end()));
}

TEST_CASE("Gaussian output histogram matches the normal law", "[grid]") {
    const ModeSpec obj = pure(0.4, 0.0, 1.0);
    const ModeSpec prb = pure(0.0, 0.0, 0.5);
    const auto g = fit_grid(obj, prb, GridModel::von_neumann, 256);
    const auto out = output_histogram(init_gaussian_grid(obj, prb, g), GridModel::von_neumann, 64);
    const auto m = von_neumann_model();
    const auto law = observable_distribution(
        evolve(from_gaussian(GaussianSpec{obj, prb}, object_probe_system()), m.endpoint()), m.probe_obs());
    double worst = 0.0;
    for (std::size_t b = 0; b < out.probabilities.size(); ++b) {
        const double lo = out.lo + static_cast<double>(b) * out.bin_width();
        // Cells sit at the left edge of each grid interval; shift by half a cell.
        const double half = 0.5 * g.dy();
        worst = std::max(worst, std::abs(out.probabilities[b] - law.interval_probability(lo - half, lo + out.bin_width() - half)));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("aliasing is a hard error", "[grid]") {
    const GridSpec tight{64, 64, 4.0, 4.0, kDefaultBoundaryThreshold};
    CHECK_THROWS_AS(init_gaussian_grid(pure(0, 0, 1.0), pure(0, 0, 1.0), tight), BoundaryMassError);

    // Fits initially, but the shear pushes probability across the guard band.
    const GridSpec g{128, 128, 8.0, 8.0, kDefaultBoundaryThreshold};
    const auto s = init_gaussian_grid(pure(5.0, 0, 0.3), pure(0, 0, 0.3), g);
    CHECK_THROWS_AS(apply_shear_x_py(s, 1.0), BoundaryMassError);
}

TEST_CASE("grid spec validation", "[grid]") {
    CHECK_THROWS_AS(GridSpec({100, 128, 1.0, 1.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec({128, 128, -1.0, 1.0}).validate(), std::invalid_argument);
    const auto h = position_histogram(init_gaussian_grid(pure(0, 0, 1), pure(0, 0, 1), small_grid()),
                                      Coordinate::x, 16);
    CHECK(h.probabilities.size() == 16);
    CHECK_THROWS_AS(position_histogram(init_gaussian_grid(pure(0, 0, 1), pure(0, 0, 1), small_grid()),
                                       Coordinate::x, 100),
                    std::invalid_argument);
}

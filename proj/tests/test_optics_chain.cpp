#include <doctest.h>

#include <cmath>
#include <complex>

#include "mzdetect/errors.hpp"
#include "mzdetect/optics_chain.hpp"

using namespace mzd;

namespace {

// Independent Bessel oracle: the ascending series in long double.
long double bessel_series(int n, long double x) {
  const int m = n < 0 ? -n : n;
  long double term = 1.0L;
  for (int k = 1; k <= m; ++k) term *= x / (2.0L * k);
  long double sum = term;
  for (int k = 1; k < 200; ++k) {
    term *= -(x * x / 4.0L) / (static_cast<long double>(k) * (k + m));
    sum += term;
    if (std::fabs(term) < 1e-30L) break;
  }
  return (n < 0 && (m % 2)) ? -sum : sum;
}

constexpr double kW = kTwoPi * 2.5e6;

}  // namespace

TEST_SUITE("optics_chain") {

TEST_CASE("Bessel values agree with an independent series") {
  for (int n = -6; n <= 6; ++n)
    for (double x : {0.0, 0.1, 0.528209, 1.0, 1.84118, 3.0, -0.7}) {
      CAPTURE(n);
      CAPTURE(x);
      CHECK(bessel_j(n, x) == doctest::Approx(static_cast<double>(bessel_series(n, x))).epsilon(1e-12));
    }
}

TEST_CASE("sideband power sums to one at cutoff 10") {
  for (double m = 0.0; m <= 3.0; m += 0.1) {
    double sum = 0.0;
    for (int n = -10; n <= 10; ++n) sum += std::pow(bessel_j(n, m), 2);
    CHECK(std::abs(sum - 1.0) < 1e-8);
    CHECK(std::abs(sum + modulation_tail_power(m, 10) - 1.0) < 1e-14);
  }
}

TEST_CASE("phase modulation reproduces exp(i m sin theta)") {
  const double m = 0.528209;
  const auto f = apply_phase_modulation(SpectralField::carrier(2.0, 12, kW), m, 12);
  for (double theta : {0.0, 0.3, 1.7, 3.0, 5.5}) {
    const std::complex<double> want = std::sqrt(2.0) * std::exp(std::complex<double>(0.0, m * std::sin(theta)));
    CHECK(std::abs(f.envelope(theta) - want) < 1e-12);
  }
  CHECK(f.power() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.sideband_power(1) == doctest::Approx(2.0 * std::pow(bessel_j(1, m), 2)));
  CHECK(f.amplitude(-1).real() == doctest::Approx(-f.amplitude(1).real()));
}

TEST_CASE("modulating twice adds the depths") {
  const auto once = apply_phase_modulation(SpectralField::carrier(1.0, 14, kW), 0.9, 14);
  const auto twice = apply_phase_modulation(
      apply_phase_modulation(SpectralField::carrier(1.0, 14, kW), 0.4, 14), 0.5, 14);
  CHECK((once.amplitudes() - twice.amplitudes()).norm() < 1e-10);
}

TEST_CASE("beamsplitter matrix is unitary to 1e-10") {
  for (double rho : {0.01, 0.3, 0.5, 0.77, 0.99}) {
    const auto u = beamsplitter_matrix(rho);
    const Eigen::Matrix2cd id = u * u.adjoint();
    CHECK((id - Eigen::Matrix2cd::Identity()).norm() < 1e-10);
  }
}

TEST_CASE("beamsplitter conserves power for arbitrary sideband inputs") {
  const auto a = apply_phase_modulation(SpectralField::carrier(1.3, 5, kW, 0.4), 0.7, 5);
  const auto b = apply_phase_modulation(SpectralField::carrier(0.6, 5, kW, -1.1), 1.2, 5);
  for (double rho : {0.2, 0.5, 0.9}) {
    const auto [c, d] = beamsplitter(a, b, rho);
    CHECK(c.power() + d.power() == doctest::Approx(a.power() + b.power()).epsilon(1e-12));
  }
  CHECK_THROWS_AS(beamsplitter(a, SpectralField::carrier(1.0, 4, kW), 0.5), InvalidInput);
}

TEST_CASE("lossless interferometer: ports follow (1 -+ cos(phi - gamma)) / 2") {
  InterferometerSpec spec;
  OpticalResponse atoms;
  atoms.phase_shift = 0.85;
  const auto laser = SpectralField::carrier(1e-3, 5, kW);
  const auto arms = propagate_arms(laser, SpectralField::vacuum(5, kW), spec, atoms, 0.0, 5);
  for (double gamma : {0.0, 0.4, 1.0, 2.5, 4.0}) {
    const auto [a, b] = recombine(arms, spec, gamma);
    const double c = std::cos(atoms.phase_shift - gamma);
    CHECK(a.power() == doctest::Approx(0.5e-3 * (1.0 - c)).epsilon(1e-10));
    CHECK(b.power() == doctest::Approx(0.5e-3 * (1.0 + c)).epsilon(1e-10));
  }
}

TEST_CASE("mean port power is independent of the modulation") {
  InterferometerSpec spec;
  const auto laser = SpectralField::carrier(1e-3, 8, kW);
  const auto arms = propagate_arms(laser, SpectralField::vacuum(8, kW), spec, OpticalResponse{}, 0.6, 8);
  const auto [a, b] = recombine(arms, spec, 0.3);
  CHECK(a.power() + b.power() == doctest::Approx(1e-3).epsilon(1e-8));
}

TEST_CASE("visibility scales the interference term but not the direct powers") {
  InterferometerSpec spec;
  spec.splitter_ratio = 0.5;
  const auto laser = SpectralField::carrier(1.0, 3, kW);
  for (double v : {1.0, 0.8, 0.0}) {
    spec.mode_matching_visibility = v;
    const auto arms = propagate_arms(laser, SpectralField::vacuum(3, kW), spec, OpticalResponse{}, 0.0, 3);
    const double p0 = recombine(arms, spec, 0.0).first.power();
    const double p1 = recombine(arms, spec, kPi).first.power();
    CHECK(p0 + p1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p1 - p0) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("losses and absorption reduce the probe arm power") {
  InterferometerSpec spec;
  spec.probe_arm_loss = 0.9;
  spec.probe_attenuation = 1e-6;
  OpticalResponse atoms;
  atoms.optical_depth = 0.01;
  const auto laser = SpectralField::carrier(2.0, 5, kW);
  const auto arms = propagate_arms(laser, SpectralField::vacuum(5, kW), spec, atoms, 0.5, 5);
  const double kept = 1.0 - modulation_tail_power(0.5, 5);
  CHECK(arms.probe.power() == doctest::Approx(1.0 * 0.9 * 1e-6 * std::exp(-0.01) * kept).epsilon(1e-12));
  CHECK(arms.lo.power() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("regridding keeps the overlapping orders") {
  const auto f = apply_phase_modulation(SpectralField::carrier(1.0, 4, kW), 0.5, 4);
  const auto g = f.regridded(7);
  for (int n = -4; n <= 4; ++n) CHECK(g.amplitude(n) == f.amplitude(n));
  CHECK(g.amplitude(6) == std::complex<double>(0.0));
  CHECK(f.regridded(1).max_order() == 1);
}

TEST_CASE("invalid optical inputs are rejected") {
  CHECK_THROWS_AS(SpectralField::carrier(-1.0, 2, kW), InvalidInput);
  CHECK_THROWS_AS(apply_phase_modulation(SpectralField::carrier(1.0, 2, kW), -0.1, 2), InvalidInput);
  InterferometerSpec spec;
  spec.splitter_ratio = 1.0;
  CHECK_THROWS_AS(spec.validate(), InvalidInput);
  spec = InterferometerSpec{};
  spec.mode_matching_visibility = 1.2;
  CHECK_THROWS_AS(spec.validate(), InvalidInput);
}

TEST_CASE("long double instantiation agrees with double") {
  using F = BasicSpectralField<long double>;
  const auto fl = apply_phase_modulation(F::carrier(1.0L, 6, static_cast<long double>(kW)), 0.5L, 6);
  const auto fd = apply_phase_modulation(SpectralField::carrier(1.0, 6, kW), 0.5, 6);
  for (int n = -6; n <= 6; ++n)
    CHECK(static_cast<double>(fl.amplitude(n).real()) == doctest::Approx(fd.amplitude(n).real()).epsilon(1e-12));
}

}

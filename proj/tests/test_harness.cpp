#include <doctest.h>

#include <cmath>

#include "mzdetect/errors.hpp"
#include "mzdetect/harness.hpp"

using namespace mzd;

namespace {

HarnessConfig quick_config() {
  HarnessConfig h;
  h.chain = default_chain_settings();
  h.chain.noise = NoiseConfig::shot_only();
  h.duration = 0.05;
  h.replicates = 3;
  h.seed = 5;
  return h;
}

HarnessConfig lo_only_config() {
  HarnessConfig h = quick_config();
  h.chain.modulation_depth = 0.0;
  h.chain.sample_rate = 10e6;
  h.chain.lockin.output_sample_decimation = 1000;
  return h;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("noiseless fringe scan has zero residual and the analytic amplitude") {
  HarnessConfig h = quick_config();
  h.chain.noise = NoiseConfig::none();
  h.probe_power = 1e-10;
  const ExperimentResult r = run_fringe_scan(2.0 * kTwoPi, h);
  const double a = r.scalar("calibration_A_per_rad");
  CHECK(a == doctest::Approx(r.scalar("expected_amplitude")).epsilon(1e-3));
  CHECK(r.scalar("residual_rms") < 1e-3 * a);
  CHECK(r.fit.parameter("period") == doctest::Approx(kTwoPi).epsilon(1e-3));
  CHECK(r.warnings.empty());
  CHECK(r.measured.size() == r.sweep_values.size());
  CHECK(r.column("expected").size() == r.measured.size());
}

TEST_CASE("short fringe scan warns") {
  HarnessConfig h = quick_config();
  h.probe_power = 1e-10;
  const ExperimentResult r = run_fringe_scan(3.0, h);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("noise versus LO power follows the square root") {
  HarnessConfig h = lo_only_config();
  h.duration = 0.05;
  h.replicates = 4;
  const ExperimentResult r = run_noise_vs_power({1e-4, 4e-4, 1.6e-3}, h);
  CHECK(r.fit.parameter("slope") == doctest::Approx(0.5).epsilon(0.1));
  for (Eigen::Index i = 0; i < r.measured.size(); ++i)
    CHECK(r.measured(i) == doctest::Approx(r.column("shot_noise_prediction")(i)).epsilon(0.1));
  CHECK(r.seeds.size() == 12);
}

TEST_CASE("results do not depend on the number of threads") {
  HarnessConfig h = lo_only_config();
  h.duration = 0.03;
  h.replicates = 3;
  const ExperimentResult one = run_noise_vs_power({2e-4, 1e-3}, h);
  h.threads = 3;
  const ExperimentResult three = run_noise_vs_power({2e-4, 1e-3}, h);
  CHECK(one.measured == three.measured);
  CHECK(one.standard_error == three.standard_error);
}

TEST_CASE("out-of-range LO power is flagged") {
  HarnessConfig h = lo_only_config();
  h.duration = 0.03;
  h.replicates = 2;
  const ExperimentResult r = run_noise_vs_power({1e-5, 1e-3}, h);
  CHECK(r.flagged[0]);
  CHECK_FALSE(r.flagged[1]);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("SNR versus probe power: zero power gives zero, ideal curve scaled by loss") {
  HarnessConfig h = quick_config();
  h.duration = 0.1;
  h.replicates = 2;
  const ExperimentResult r = run_snr_vs_power({0.0, 1e-10}, h);
  CHECK(r.measured(0) == 0.0);
  CHECK(r.measured(1) > 0.0);
  CHECK(r.column("loss_scaled")(1) == doctest::Approx(0.77 * r.column("ideal")(1)));
  CHECK(r.column("chain_analytic")(1) == doctest::Approx(r.column("loss_scaled")(1)).epsilon(0.02));
}

TEST_CASE("locked run without disturbance is limited by shot noise") {
  HarnessConfig h = quick_config();
  h.probe_power = 1e-8;
  h.servo.residual_floor = 0.0;
  h.vibration = VibrationSpectrum::none();
  const ExperimentResult r = run_locked_sensitivity(0.1, h);
  CHECK_FALSE(r.lock_lost);
  CHECK(r.scalar("phase_noise_density") == doctest::Approx(r.scalar("shot_phase_density")).epsilon(0.2));
  CHECK(r.scalar("fraction_in_lock") == 1.0);
}

TEST_CASE("locked run with the residual floor") {
  HarnessConfig h = quick_config();
  h.probe_power = 1e-8;
  const ExperimentResult r = run_locked_sensitivity(0.2, h);
  CHECK_FALSE(r.lock_lost);
  CHECK(r.scalar("phase_noise_density") == doctest::Approx(2e-4).epsilon(0.15));
  CHECK(r.scalar("servo_phase_density") == doctest::Approx(2e-4).epsilon(0.15));
}

TEST_CASE("lost lock is flagged and data still returned") {
  HarnessConfig h = quick_config();
  h.probe_power = 1e-8;
  h.servo.proportional_gain = 0.0;
  h.servo.integral_gain = 0.0;
  const ExperimentResult r = run_locked_sensitivity(0.05, h);
  CHECK(r.lock_lost);
  CHECK(r.measured.size() > 0);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("harness configuration is validated") {
  HarnessConfig h = quick_config();
  h.replicates = 0;
  CHECK_THROWS_AS(h.validate(), InvalidConfig);
  h = quick_config();
  h.loss_factor = 0.0;
  CHECK_THROWS_AS(h.validate(), InvalidConfig);
  h = quick_config();
  CHECK_THROWS_AS(run_noise_vs_power({}, h), InvalidInput);
  h.duration = 0.01;
  CHECK_THROWS_AS(run_fringe_scan(kTwoPi, h), InsufficientData);
}

}

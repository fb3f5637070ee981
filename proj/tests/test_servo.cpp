#include <doctest.h>

#include <cmath>

#include "mzdetect/errors.hpp"
#include "mzdetect/fitting.hpp"
#include "mzdetect/servo.hpp"

using namespace mzd;

namespace {

VibrationSpectrum single_tone(double f, double rms) {
  VibrationSpectrum v;
  v.tones = {{f, rms}};
  return v;
}

ServoConfig quiet_servo() {
  ServoConfig s;
  s.residual_floor = 0.0;
  return s;
}

}  // namespace

TEST_SUITE("servo") {

TEST_CASE("critically damped integral gain") {
  const ServoConfig c = ServoConfig::critically_damped(9.0, 10e3, 1e6);
  CHECK(c.integral_gain == doctest::Approx(kTwoPi * 10e3 * 100.0 / 4.0));
  CHECK(ServoConfig{}.integral_gain == doctest::Approx(c.integral_gain));
}

TEST_CASE("sensitivity function is small in band and unity far out") {
  const ServoConfig c;
  CHECK(std::abs(loop_sensitivity(c, 10.0)) < 1e-3);
  CHECK(std::abs(loop_sensitivity(c, 100.0)) < 1e-2);
  // At Nyquist z^-1 = -1: P = -a / (2 - a), C = Kp + Ki T / 2.
  const double t = 1.0 / c.loop_rate;
  const double a = 1.0 - std::exp(-kTwoPi * c.piezo_bandwidth * t);
  const double nyquist = 1.0 / (1.0 - a / (2.0 - a) * (c.proportional_gain + c.integral_gain * t / 2.0));
  CHECK(loop_sensitivity(c, 0.5 * c.loop_rate).real() == doctest::Approx(nyquist).epsilon(1e-9));
  double prev = 0.0;
  for (double f : {1.0, 10.0, 100.0, 1e3}) {
    const double s = std::abs(loop_sensitivity(c, f));
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("tone suppression matches the sensitivity function") {
  const ServoConfig c = quiet_servo();
  for (double f : {200.0, 1e3, 3e3}) {
    CAPTURE(f);
    const Eigen::VectorXd open = open_loop_phase(single_tone(f, 0.05), 0.2, c.loop_rate, 4);
    const LockResult r = close_loop(open, c.loop_rate, c, 5);
    const Eigen::Index skip = 50000;
    const double residual = tone_rms(r.locked_phase.tail(open.size() - skip), c.loop_rate, f);
    const double predicted_db = 20.0 * std::log10(std::abs(loop_sensitivity(c, f)));
    CHECK(std::abs(20.0 * std::log10(residual / 0.05) - predicted_db) < 1.0);
    CHECK_FALSE(r.lock_failure);
  }
}

TEST_CASE("residual floor appears as white phase noise of the configured density") {
  ServoConfig c;
  const Eigen::VectorXd open = Eigen::VectorXd::Zero(1 << 21);
  const LockResult r = close_loop(open, c.loop_rate, c, 9);
  const PowerSpectrum s = welch_psd(r.locked_phase, c.loop_rate, 1 << 14);
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < s.frequency.size(); ++i)
    if (s.frequency(i) > 100.0 && s.frequency(i) < 5e3) {
      sum += s.density(i);
      ++n;
    }
  CHECK(std::sqrt(sum / n) == doctest::Approx(2e-4).epsilon(0.05));
}

TEST_CASE("lock flag is monotone under disturbance scaling") {
  const ServoConfig c;
  double previous = 0.0;
  for (double rms : {24.0, 18.0, 12.0, 6.0, 3.0}) {
    CAPTURE(rms);
    const Eigen::VectorXd open = open_loop_phase(single_tone(20.0, rms), 0.1, c.loop_rate, 3);
    const LockResult r = close_loop(open, c.loop_rate, c, 3);
    CHECK(r.fraction_in_lock() >= previous);
    previous = r.fraction_in_lock();
  }
  CHECK(previous == 1.0);
  const Eigen::VectorXd big = open_loop_phase(single_tone(20.0, 24.0), 0.1, c.loop_rate, 3);
  CHECK(close_loop(big, c.loop_rate, c, 3).lock_failure);
}

TEST_CASE("zero gains with a disturbance is a lock failure") {
  ServoConfig c = quiet_servo();
  c.proportional_gain = 0.0;
  c.integral_gain = 0.0;
  const Eigen::VectorXd open = open_loop_phase(single_tone(50.0, 0.05), 0.05, c.loop_rate, 1);
  CHECK(close_loop(open, c.loop_rate, c, 1).lock_failure);
  const Eigen::VectorXd flat = Eigen::VectorXd::Zero(1000);
  CHECK_FALSE(close_loop(flat, c.loop_rate, c, 1).lock_failure);
}

TEST_CASE("broadband vibration has the configured density") {
  VibrationSpectrum v;
  v.broadband_density = 1e-3;
  v.broadband_cutoff = 1e3;
  const Eigen::VectorXd x = open_loop_phase(v, 2.0, 1e5, 12);
  const PowerSpectrum s = welch_psd(x, 1e5, 1 << 14);
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < s.frequency.size(); ++i)
    if (s.frequency(i) > 50.0 && s.frequency(i) < 800.0) {
      sum += s.density(i);
      ++n;
    }
  CHECK(std::sqrt(sum / n) == doctest::Approx(1e-3).epsilon(0.05));
}

TEST_CASE("Nyquist violation and invalid settings are rejected") {
  CHECK_THROWS_AS(open_loop_phase(single_tone(6e5, 0.1), 0.01, 1e6, 1), InvalidConfig);
  ServoConfig c;
  c.residual_floor = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidConfig);
  c = ServoConfig{};
  c.loop_rate = 2e6;
  CHECK_THROWS_AS(ServoLoop(c, 1e6, 1), InvalidConfig);
}

TEST_CASE("SNR ceiling for a pi swing") {
  CHECK(snr_ceiling(2e-4, 1e3) == doctest::Approx(316.2278).epsilon(1e-6));
  CHECK_THROWS_AS(snr_ceiling(0.0, 1e3), InvalidInput);
}

TEST_CASE("open-loop phase is reproducible from its seed") {
  const auto v = VibrationSpectrum::laboratory();
  CHECK(open_loop_phase(v, 0.01, 1e6, 7) == open_loop_phase(v, 0.01, 1e6, 7));
  CHECK(open_loop_phase(v, 0.01, 1e6, 7) != open_loop_phase(v, 0.01, 1e6, 8));
}

}

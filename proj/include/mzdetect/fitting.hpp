#pragma once

// Least-squares fits and small statistics used by the experiment harness.

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace mzd {

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Sample mean and its standard error.
Estimate mean_estimate(const Eigen::Ref<const Eigen::VectorXd>& x);

/// rms = sqrt(mean of per-replicate variances), error propagated from the
/// spread of the variances.
Estimate rms_from_variances(const Eigen::Ref<const Eigen::VectorXd>& variances);

/// y = 10^intercept * x^slope, fitted on log10 data.
struct PowerLawFit {
  double slope = 0.0;
  double slope_error = 0.0;
  double intercept = 0.0;  // log10 prefactor
  double intercept_error = 0.0;
  double residual_rms = 0.0;  // in log10 units

  double operator()(double x) const;
};

/// Unweighted by default; `log_sigma` gives per-point uncertainties of log10 y.
PowerLawFit fit_power_law(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const std::optional<Eigen::VectorXd>& log_sigma = std::nullopt);

/// y = A sin(2 pi (x - x0) / period) + C with A >= 0.
struct SineFit {
  double amplitude = 0.0;
  double amplitude_error = 0.0;
  double phase = 0.0;  // x0
  double phase_error = 0.0;
  double offset = 0.0;
  double offset_error = 0.0;
  double period = 0.0;
  double period_error = 0.0;
  double residual_rms = 0.0;
  Eigen::VectorXd residuals;

  double operator()(double x) const;
};

/// Linear fit at `period_guess`, then Levenberg-Marquardt over all four
/// parameters when `free_period` is set.
SineFit fit_sine(const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Eigen::Ref<const Eigen::VectorXd>& y, double period_guess,
                 bool free_period = true);

/// Jarque-Bera statistic n/6 (S^2 + (K - 3)^2 / 4); chi^2 with 2 dof under normality.
double jarque_bera(const Eigen::Ref<const Eigen::VectorXd>& x);

struct PowerSpectrum {
  Eigen::VectorXd frequency;  // Hz
  Eigen::VectorXd density;    // one-sided, units^2/Hz
};

/// Welch estimate with Hann windows and 50% overlap.
PowerSpectrum welch_psd(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate,
                        Eigen::Index segment_length);

/// rms amplitude of the component at `frequency`, by least squares on cos, sin and a constant.
double tone_rms(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate, double frequency);

}  // namespace mzd

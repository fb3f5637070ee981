#include "mzdetect/fitting.hpp"

#include <cmath>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/NonLinearOptimization>

#include "mzdetect/constants.hpp"
#include "mzdetect/errors.hpp"

namespace mzd {

Estimate mean_estimate(const Eigen::Ref<const Eigen::VectorXd>& x) {
  detail::require<InsufficientData>(x.size() >= 2, "need at least two samples");
  const double m = x.mean();
  const double var = (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(x.size()))};
}

Estimate rms_from_variances(const Eigen::Ref<const Eigen::VectorXd>& variances) {
  const Estimate v = mean_estimate(variances);
  const double rms = std::sqrt(v.value);
  return {rms, rms > 0.0 ? v.standard_error / (2.0 * rms) : 0.0};
}

double PowerLawFit::operator()(double x) const { return std::pow(10.0, intercept) * std::pow(x, slope); }

PowerLawFit fit_power_law(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const std::optional<Eigen::VectorXd>& log_sigma) {
  detail::require<InvalidInput>(x.size() == y.size(), "x and y must have equal length");
  detail::require<InsufficientData>(x.size() >= 3, "power-law fit needs at least three points");
  detail::require<InvalidInput>((x.array() > 0.0).all() && (y.array() > 0.0).all(),
                                "power-law fit needs positive data");
  const Eigen::Index n = x.size();
  Eigen::MatrixXd a(n, 2);
  a.col(0).setOnes();
  a.col(1) = x.array().log10().matrix();
  Eigen::VectorXd b = y.array().log10().matrix();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  if (log_sigma) {
    detail::require<InvalidInput>(log_sigma->size() == n && (log_sigma->array() > 0.0).all(),
                                  "weights must be positive, one per point");
    w = log_sigma->cwiseInverse();
  }
  const Eigen::MatrixXd aw = w.asDiagonal() * a;
  const Eigen::VectorXd bw = w.asDiagonal() * b;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw);
  const Eigen::Vector2d p = qr.solve(bw);
  const Eigen::VectorXd r = b - a * p;
  const double chi2 = (w.asDiagonal() * r).squaredNorm() / static_cast<double>(n - 2);
  const Eigen::Matrix2d cov = chi2 * (aw.transpose() * aw).inverse();

  PowerLawFit f;
  f.intercept = p(0);
  f.slope = p(1);
  f.intercept_error = std::sqrt(cov(0, 0));
  f.slope_error = std::sqrt(cov(1, 1));
  f.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(n));
  return f;
}

double SineFit::operator()(double x) const {
  return amplitude * std::sin(kTwoPi * (x - phase) / period) + offset;
}

namespace {

// y = a sin(w x) + b cos(w x) + c, parameters (a, b, c, w).
struct SineResidual {
  SineResidual(const Eigen::VectorXd& x, const Eigen::VectorXd& y) : x_(x), y_(y) {}

  int inputs() const { return 4; }
  int values() const { return static_cast<int>(x_.size()); }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (Eigen::Index i = 0; i < x_.size(); ++i)
      r(i) = p(0) * std::sin(p(3) * x_(i)) + p(1) * std::cos(p(3) * x_(i)) + p(2) - y_(i);
    return 0;
  }

  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
    for (Eigen::Index i = 0; i < x_.size(); ++i) {
      const double s = std::sin(p(3) * x_(i)), c = std::cos(p(3) * x_(i));
      j(i, 0) = s;
      j(i, 1) = c;
      j(i, 2) = 1.0;
      j(i, 3) = x_(i) * (p(0) * c - p(1) * s);
    }
    return 0;
  }

  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& y_;
};

}  // namespace

SineFit fit_sine(const Eigen::Ref<const Eigen::VectorXd>& x_in,
                 const Eigen::Ref<const Eigen::VectorXd>& y_in, double period_guess,
                 bool free_period) {
  detail::require<InvalidInput>(x_in.size() == y_in.size(), "x and y must have equal length");
  detail::require<InvalidInput>(period_guess > 0.0, "period guess must be > 0");
  const Eigen::Index n = x_in.size();
  const int n_params = free_period ? 4 : 3;
  detail::require<InsufficientData>(n > n_params, "too few points for a sine fit");
  const Eigen::VectorXd x = x_in, y = y_in;

  Eigen::VectorXd p(4);
  {
    const double w = kTwoPi / period_guess;
    Eigen::MatrixXd a(n, 3);
    a.col(0) = (w * x.array()).sin().matrix();
    a.col(1) = (w * x.array()).cos().matrix();
    a.col(2).setOnes();
    const Eigen::Vector3d lin = a.colPivHouseholderQr().solve(y);
    p << lin(0), lin(1), lin(2), w;
  }
  SineResidual functor(x, y);
  if (free_period) {
    Eigen::LevenbergMarquardt<SineResidual> lm(functor);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    lm.minimize(p);
  }

  Eigen::VectorXd r(n);
  functor(p, r);
  Eigen::MatrixXd j(n, 4);
  functor.df(p, j);
  const Eigen::MatrixXd jn = j.leftCols(n_params);
  const double sigma2 = r.squaredNorm() / static_cast<double>(n - n_params);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov.topLeftCorner(n_params, n_params) = sigma2 * (jn.transpose() * jn).inverse();

  SineFit f;
  const double a = p(0), b = p(1), w = p(3);
  f.amplitude = std::hypot(a, b);
  f.offset = p(2);
  f.period = kTwoPi / w;
  // a sin + b cos = A sin(w x - w x0) with a = A cos(w x0), b = -A sin(w x0).
  const double theta = std::atan2(-b, a);
  f.phase = theta / w;
  Eigen::Vector4d g_amp(a / f.amplitude, b / f.amplitude, 0.0, 0.0);
  const double a2 = f.amplitude * f.amplitude;
  Eigen::Vector4d g_phase(b / (a2 * w), -a / (a2 * w), 0.0, -theta / (w * w));
  Eigen::Vector4d g_period(0.0, 0.0, 0.0, -kTwoPi / (w * w));
  f.amplitude_error = std::sqrt(g_amp.dot(cov * g_amp));
  f.phase_error = std::sqrt(g_phase.dot(cov * g_phase));
  f.offset_error = std::sqrt(cov(2, 2));
  f.period_error = std::sqrt(g_period.dot(cov * g_period));
  f.residuals = r;
  f.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(n));
  return f;
}

double jarque_bera(const Eigen::Ref<const Eigen::VectorXd>& x) {
  detail::require<InsufficientData>(x.size() >= 8, "normality test needs at least eight samples");
  const double n = static_cast<double>(x.size());
  const Eigen::ArrayXd d = x.array() - x.mean();
  const double m2 = d.square().sum() / n;
  const double m3 = d.cube().sum() / n;
  const double m4 = d.square().square().sum() / n;
  const double skew = m3 / std::pow(m2, 1.5);
  const double kurt = m4 / (m2 * m2);
  return n / 6.0 * (skew * skew + 0.25 * (kurt - 3.0) * (kurt - 3.0));
}

PowerSpectrum welch_psd(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate,
                        Eigen::Index segment_length) {
  detail::require<InvalidInput>(segment_length >= 8 && segment_length % 2 == 0,
                                "segment length must be even and >= 8");
  detail::require<InsufficientData>(x.size() >= segment_length, "trace shorter than one segment");
  const Eigen::Index m = segment_length, hop = m / 2;
  const Eigen::ArrayXd window =
      0.5 - 0.5 * (Eigen::ArrayXd::LinSpaced(m, 0.0, static_cast<double>(m - 1)) * kTwoPi /
                   static_cast<double>(m))
                      .cos();
  const double norm = window.square().sum() * sample_rate;

  Eigen::FFT<double> fft;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m / 2 + 1);
  Eigen::VectorXcd bins;
  Eigen::VectorXd segment(m);
  int count = 0;
  for (Eigen::Index start = 0; start + m <= x.size(); start += hop, ++count) {
    const auto s = x.segment(start, m);
    segment = ((s.array() - s.mean()) * window).matrix();
    fft.fwd(bins, segment);
    acc += bins.head(m / 2 + 1).cwiseAbs2();
  }
  PowerSpectrum out;
  out.density = acc / (count * norm);
  out.density.segment(1, m / 2 - 1) *= 2.0;
  out.frequency = Eigen::VectorXd::LinSpaced(m / 2 + 1, 0.0, sample_rate / 2.0);
  return out;
}

double tone_rms(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate, double frequency) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  const double step = frequency / sample_rate;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double cycles = static_cast<double>(i) * step;
    cycles -= std::floor(cycles);
    const Eigen::Vector3d row(std::cos(kTwoPi * cycles), std::sin(kTwoPi * cycles), 1.0);
    ata.noalias() += row * row.transpose();
    atb.noalias() += row * x(i);
  }
  const Eigen::Vector3d c = ata.ldlt().solve(atb);
  return std::hypot(c(0), c(1)) / std::sqrt(2.0);
}

}  // namespace mzd

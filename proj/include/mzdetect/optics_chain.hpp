#pragma once

// Complex field amplitudes on a sideband grid n = -n_max..n_max around the
// carrier, spaced by the modulation frequency, and the elements of the
// two-arm interferometer that act on them.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>

#include "mzdetect/atom_optics.hpp"
#include "mzdetect/errors.hpp"

namespace mzd {

inline constexpr int kDefaultSidebandCutoff = 5;

/// J_n(x) for integer order of either sign.
template <typename Scalar>
Scalar bessel_j(int order, Scalar x) {
  const int n = order < 0 ? -order : order;
  const Scalar sign = (order < 0 && (n % 2) == 1) ? Scalar(-1) : Scalar(1);
  const Scalar value = x < Scalar(0)
                           ? ((n % 2) ? Scalar(-1) : Scalar(1)) *
                                 static_cast<Scalar>(std::cyl_bessel_j(Scalar(n), -x))
                           : static_cast<Scalar>(std::cyl_bessel_j(Scalar(n), x));
  return sign * value;
}

/// Power a unit carrier loses into orders beyond +-cutoff: sum_{|n|>cutoff} J_n(m)^2.
template <typename Scalar>
Scalar modulation_tail_power(Scalar depth, int cutoff) {
  Scalar tail(0);
  for (int n = cutoff + 1; n <= cutoff + 60; ++n) {
    const Scalar j = bessel_j(n, depth);
    tail += Scalar(2) * j * j;
    if (j * j < Scalar(1e-40)) break;
  }
  return tail;
}

template <typename Scalar>
class BasicSpectralField {
 public:
  using Complex = std::complex<Scalar>;
  using Amplitudes = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

  BasicSpectralField() : BasicSpectralField(Amplitudes::Zero(1), Scalar(0)) {}

  BasicSpectralField(Amplitudes amplitudes, Scalar modulation_frequency)
      : amplitudes_(std::move(amplitudes)), modulation_frequency_(modulation_frequency) {
    detail::require<InvalidInput>(amplitudes_.size() % 2 == 1,
                                  "sideband grid must have odd length 2 n_max + 1");
    detail::require<InvalidInput>(modulation_frequency_ >= Scalar(0),
                                  "modulation frequency must be >= 0");
  }

  static BasicSpectralField vacuum(int max_order, Scalar modulation_frequency) {
    return BasicSpectralField(Amplitudes::Zero(2 * max_order + 1), modulation_frequency);
  }

  /// Unmodulated carrier of the given power and optical phase.
  static BasicSpectralField carrier(Scalar power, int max_order, Scalar modulation_frequency,
                                    Scalar phase = Scalar(0)) {
    detail::require<InvalidInput>(power >= Scalar(0), "carrier power must be >= 0");
    auto field = vacuum(max_order, modulation_frequency);
    field.amplitudes_(max_order) = std::polar(std::sqrt(power), phase);
    return field;
  }

  int max_order() const { return static_cast<int>(amplitudes_.size() / 2); }
  Scalar modulation_frequency() const { return modulation_frequency_; }  // rad/s
  const Amplitudes& amplitudes() const { return amplitudes_; }

  Complex amplitude(int order) const {
    return std::abs(order) > max_order() ? Complex(0) : amplitudes_(order + max_order());
  }
  Scalar carrier_phase() const { return std::arg(amplitude(0)); }
  Scalar sideband_power(int order) const { return std::norm(amplitude(order)); }
  Scalar power() const { return amplitudes_.squaredNorm(); }

  bool same_grid(const BasicSpectralField& other) const {
    return max_order() == other.max_order() &&
           modulation_frequency_ == other.modulation_frequency_;
  }

  /// Same amplitudes on a grid extended (zero-filled) or truncated to +-max_order.
  BasicSpectralField regridded(int max_order) const {
    Amplitudes a = Amplitudes::Zero(2 * max_order + 1);
    const int common = std::min(max_order, this->max_order());
    a.segment(max_order - common, 2 * common + 1) =
        amplitudes_.segment(this->max_order() - common, 2 * common + 1);
    return BasicSpectralField(std::move(a), modulation_frequency_);
  }

  /// Complex envelope sum_n a_n exp(i n theta) at modulation phase theta.
  Complex envelope(Scalar theta) const {
    Complex acc(0);
    const Complex step = std::polar(Scalar(1), theta);
    const int n_max = max_order();
    Complex up(1), down(1);
    acc += amplitudes_(n_max);
    for (int n = 1; n <= n_max; ++n) {
      up *= step;
      down = std::conj(up);
      acc += amplitudes_(n_max + n) * up + amplitudes_(n_max - n) * down;
    }
    return acc;
  }

  BasicSpectralField operator*(Complex factor) const {
    return BasicSpectralField(amplitudes_ * factor, modulation_frequency_);
  }

  BasicSpectralField operator+(const BasicSpectralField& other) const {
    detail::require<InvalidInput>(same_grid(other), "sideband grids differ");
    return BasicSpectralField(amplitudes_ + other.amplitudes_, modulation_frequency_);
  }

 private:
  Amplitudes amplitudes_;
  Scalar modulation_frequency_;
};

using SpectralField = BasicSpectralField<double>;

/// Jacobi-Anger: exp(i m sin wt) = sum_n J_n(m) exp(i n wt). The input grid is
/// convolved with the Bessel weights and truncated at +-order_cutoff.
template <typename Scalar>
BasicSpectralField<Scalar> apply_phase_modulation(const BasicSpectralField<Scalar>& field,
                                                  Scalar depth, int order_cutoff) {
  using Complex = std::complex<Scalar>;
  detail::require<InvalidInput>(depth >= Scalar(0) && std::isfinite(depth),
                                "modulation depth must be finite and >= 0");
  detail::require<InvalidInput>(order_cutoff >= 1, "sideband cutoff must be >= 1");

  const int n_in = field.max_order();
  Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> weights(2 * order_cutoff + 1,
                                                                 2 * n_in + 1);
  for (int k = -order_cutoff; k <= order_cutoff; ++k)
    for (int n = -n_in; n <= n_in; ++n)
      weights(k + order_cutoff, n + n_in) = Complex(bessel_j(k - n, depth));

  return BasicSpectralField<Scalar>(weights * field.amplitudes(), field.modulation_frequency());
}

/// Every order picks up the same absorption and phase (far-detuned probe).
template <typename Scalar>
BasicSpectralField<Scalar> apply_atoms(const BasicSpectralField<Scalar>& field,
                                       const OpticalResponse& response) {
  const auto factor = std::polar(static_cast<Scalar>(std::exp(-response.optical_depth / 2.0)),
                                 static_cast<Scalar>(response.phase_shift));
  return field * factor;
}

template <typename Scalar>
BasicSpectralField<Scalar> attenuate(const BasicSpectralField<Scalar>& field,
                                     Scalar power_transmission) {
  detail::require<InvalidInput>(power_transmission >= Scalar(0) && power_transmission <= Scalar(1),
                                "power transmission must lie in [0, 1]");
  return field * std::complex<Scalar>(std::sqrt(power_transmission));
}

template <typename Scalar>
BasicSpectralField<Scalar> phase_delay(const BasicSpectralField<Scalar>& field, Scalar phase) {
  return field * std::polar(Scalar(1), phase);
}

/// Lossless splitter, out_a = sqrt(r) a + i sqrt(1-r) b, out_b = i sqrt(1-r) a + sqrt(r) b.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 2, 2> beamsplitter_matrix(Scalar ratio) {
  using Complex = std::complex<Scalar>;
  const Complex t(std::sqrt(ratio)), r(Scalar(0), std::sqrt(Scalar(1) - ratio));
  Eigen::Matrix<Complex, 2, 2> u;
  u << t, r, r, t;
  return u;
}

template <typename Scalar>
std::pair<BasicSpectralField<Scalar>, BasicSpectralField<Scalar>> beamsplitter(
    const BasicSpectralField<Scalar>& in_a, const BasicSpectralField<Scalar>& in_b, Scalar ratio) {
  detail::require<InvalidInput>(ratio > Scalar(0) && ratio < Scalar(1),
                                "splitter ratio must lie in (0, 1)");
  detail::require<InvalidInput>(in_a.same_grid(in_b), "beamsplitter inputs have different sideband grids");
  using Complex = std::complex<Scalar>;
  Eigen::Matrix<Complex, 2, Eigen::Dynamic> stacked(2, in_a.amplitudes().size());
  stacked.row(0) = in_a.amplitudes().transpose();
  stacked.row(1) = in_b.amplitudes().transpose();
  const Eigen::Matrix<Complex, 2, Eigen::Dynamic> out = beamsplitter_matrix(ratio) * stacked;
  const Scalar w = in_a.modulation_frequency();
  return {BasicSpectralField<Scalar>(out.row(0).transpose(), w),
          BasicSpectralField<Scalar>(out.row(1).transpose(), w)};
}

struct InterferometerSpec {
  double splitter_ratio = 0.5;
  double operating_phase = 0.0;  // gamma, rad, applied to the LO arm
  double probe_arm_loss = 1.0;   // power transmission after the atoms
  double lo_arm_loss = 1.0;      // power transmission of the LO arm
  double mode_matching_visibility = 1.0;
  double probe_attenuation = 1.0;  // colour-glass filter, power transmission

  void validate() const {
    using detail::require;
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    require<InvalidInput>(splitter_ratio > 0.0 && splitter_ratio < 1.0,
                          "splitter_ratio must lie in (0, 1)");
    require<InvalidInput>(unit(probe_arm_loss) && unit(lo_arm_loss) && unit(probe_attenuation),
                          "arm transmissions must lie in [0, 1]");
    require<InvalidInput>(unit(mode_matching_visibility),
                          "mode_matching_visibility must lie in [0, 1]");
    require<InvalidInput>(std::isfinite(operating_phase), "operating_phase must be finite");
  }
};

/// Light leaving one output port: the part sharing the LO spatial mode and
/// the part orthogonal to it, which adds power but never interferes.
template <typename Scalar>
struct BasicOutputPort {
  BasicSpectralField<Scalar> matched;
  BasicSpectralField<Scalar> orthogonal;

  Scalar power() const { return matched.power() + orthogonal.power(); }

  /// Instantaneous power at modulation phase theta.
  Scalar power_at(Scalar theta) const {
    return std::norm(matched.envelope(theta)) + std::norm(orthogonal.envelope(theta));
  }
};

using OutputPort = BasicOutputPort<double>;

/// Fields arriving at the recombining splitter, the LO before the
/// operating phase is applied.
template <typename Scalar>
struct BasicInterferometerArms {
  BasicSpectralField<Scalar> probe;
  BasicSpectralField<Scalar> lo;
};

using InterferometerArms = BasicInterferometerArms<double>;

/// Input splitter, EOM in the probe arm, colour glass, atoms, probe-arm loss;
/// LO arm loss. Both inputs must share a sideband grid.
template <typename Scalar>
BasicInterferometerArms<Scalar> propagate_arms(const BasicSpectralField<Scalar>& probe_input,
                                               const BasicSpectralField<Scalar>& lo_input,
                                               const InterferometerSpec& spec,
                                               const OpticalResponse& response, Scalar depth,
                                               int order_cutoff = kDefaultSidebandCutoff) {
  spec.validate();
  const int grid = std::max({order_cutoff, probe_input.max_order(), lo_input.max_order()});
  auto [probe_arm, lo_arm] = beamsplitter(probe_input.regridded(grid), lo_input.regridded(grid),
                                          static_cast<Scalar>(spec.splitter_ratio));
  probe_arm = apply_phase_modulation(probe_arm, depth, grid);
  probe_arm = attenuate(probe_arm, static_cast<Scalar>(spec.probe_attenuation));
  probe_arm = apply_atoms(probe_arm, response);
  probe_arm = attenuate(probe_arm, static_cast<Scalar>(spec.probe_arm_loss));
  lo_arm = attenuate(lo_arm, static_cast<Scalar>(spec.lo_arm_loss));
  return {std::move(probe_arm), std::move(lo_arm)};
}

/// Recombining splitter with the LO arm delayed by gamma. The probe amplitude
/// is split V : sqrt(1 - V^2) between the LO mode and an orthogonal mode so the
/// interference term scales with V while direct powers are untouched.
template <typename Scalar>
std::pair<BasicOutputPort<Scalar>, BasicOutputPort<Scalar>> recombine(
    const BasicInterferometerArms<Scalar>& arms, const InterferometerSpec& spec, Scalar gamma) {
  using Complex = std::complex<Scalar>;
  const Scalar v = static_cast<Scalar>(spec.mode_matching_visibility);
  const Scalar ratio = static_cast<Scalar>(spec.splitter_ratio);
  const auto lo = phase_delay(arms.lo, gamma);
  const auto probe_matched = arms.probe * Complex(v);
  const auto probe_orthogonal = arms.probe * Complex(std::sqrt(std::max(Scalar(0), Scalar(1) - v * v)));
  const auto vacuum =
      BasicSpectralField<Scalar>::vacuum(arms.probe.max_order(), arms.probe.modulation_frequency());

  auto [matched_a, matched_b] = beamsplitter(probe_matched, lo, ratio);
  auto [orth_a, orth_b] = beamsplitter(probe_orthogonal, vacuum, ratio);
  return {BasicOutputPort<Scalar>{std::move(matched_a), std::move(orth_a)},
          BasicOutputPort<Scalar>{std::move(matched_b), std::move(orth_b)}};
}

template <typename Scalar>
std::pair<BasicOutputPort<Scalar>, BasicOutputPort<Scalar>> run_chain(
    const BasicSpectralField<Scalar>& probe_input, const BasicSpectralField<Scalar>& lo_input,
    const InterferometerSpec& spec, const OpticalResponse& response, Scalar depth,
    int order_cutoff = kDefaultSidebandCutoff) {
  const auto arms = propagate_arms(probe_input, lo_input, spec, response, depth, order_cutoff);
  return recombine(arms, spec, static_cast<Scalar>(spec.operating_phase));
}

}  // namespace mzd

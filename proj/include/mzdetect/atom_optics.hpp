#pragma once

// Two-level-atom optical response of a uniform cloud: resonant cross
// section, dispersive phase shift, optical depth and the heating budget.
//
// Detuning is dimensionless throughout, in units of half the natural
// linewidth, and carries a sign.

#include <cmath>
#include <string>

#include "mzdetect/constants.hpp"
#include "mzdetect/errors.hpp"

namespace mzd {

enum class Axis { X, Y, Z };

inline Axis parse_axis(const std::string& name) {
  if (name == "x") return Axis::X;
  if (name == "y") return Axis::Y;
  if (name == "z") return Axis::Z;
  throw InvalidInput("probe axis must be one of x, y, z (got '" + name + "')");
}

inline std::string to_string(Axis axis) {
  switch (axis) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: break;
  }
  return "z";
}

struct AtomCloud {
  double atom_count = 1e5;
  double extent_x = 10e-6;  // m
  double extent_y = 10e-6;  // m
  double extent_z = 50e-6;  // m
  Axis probe_axis = Axis::Z;
  double lifetime = 1.0;  // s

  void validate() const {
    using detail::require;
    require<InvalidInput>(atom_count >= 0.0 && std::isfinite(atom_count),
                          "atom_count must be finite and >= 0");
    require<InvalidInput>(extent_x > 0.0 && extent_y > 0.0 && extent_z > 0.0,
                          "cloud extents must be > 0");
    require<InvalidInput>(lifetime > 0.0, "cloud lifetime must be > 0");
  }

  /// Atoms per unit area seen along the probe axis (uniform box model).
  double column_density() const {
    validate();
    switch (probe_axis) {
      case Axis::X: return atom_count / (extent_y * extent_z);
      case Axis::Y: return atom_count / (extent_x * extent_z);
      case Axis::Z: break;
    }
    return atom_count / (extent_x * extent_y);
  }
};

struct ProbeSpec {
  double wavelength = kRb87D2Wavelength;  // m
  double detuning = 0.0;                  // half-linewidths, signed
  double input_power = 0.0;               // W

  void validate() const {
    detail::require<InvalidInput>(wavelength > 0.0, "probe wavelength must be > 0");
    detail::require<InvalidInput>(input_power >= 0.0, "probe input power must be >= 0");
  }
};

struct OpticalResponse {
  double phase_shift = 0.0;    // rad
  double optical_depth = 0.0;  // power attenuation exponent k
  double transmission = 1.0;   // exp(-k)
  double scattering_rate = 0.0;  // photons/s for the given absorbed power

  static OpticalResponse vacuum() { return {}; }
};

struct HeatingBudget {
  double max_scattering_rate = 0.0;  // photons/s
  double max_absorbed_power = 0.0;   // W
};

template <typename Scalar>
Scalar photon_energy(Scalar wavelength) {
  detail::require<InvalidInput>(wavelength > Scalar(0), "wavelength must be > 0");
  return Scalar(kPlanck) * Scalar(kSpeedOfLight) / wavelength;
}

/// sigma_0 = 3 lambda^2 / (2 pi).
template <typename Scalar>
Scalar resonant_cross_section(Scalar wavelength) {
  detail::require<InvalidInput>(wavelength > Scalar(0), "wavelength must be > 0");
  return Scalar(3) * wavelength * wavelength / Scalar(kTwoPi);
}

/// phi = n sigma_0 Delta / (2 (1 + Delta^2)).
template <typename Scalar>
Scalar phase_shift(Scalar column_density, Scalar cross_section, Scalar detuning) {
  detail::require<InvalidInput>(column_density >= Scalar(0), "column density must be >= 0");
  return column_density * cross_section * detuning /
         (Scalar(2) * (Scalar(1) + detuning * detuning));
}

/// k = n sigma_0 / (1 + Delta^2).
template <typename Scalar>
Scalar optical_depth(Scalar column_density, Scalar cross_section, Scalar detuning) {
  detail::require<InvalidInput>(column_density >= Scalar(0), "column density must be >= 0");
  return column_density * cross_section / (Scalar(1) + detuning * detuning);
}

/// One scattered photon per atom per lifetime.
inline HeatingBudget heating_budget(const AtomCloud& cloud, double photon_energy_j) {
  cloud.validate();
  detail::require<InvalidInput>(photon_energy_j >= 0.0, "photon energy must be >= 0");
  const double rate = cloud.atom_count / cloud.lifetime;
  return {rate, rate * photon_energy_j};
}

/// Full response of the cloud to a probe; `absorbed_power` sets the
/// scattering rate reported alongside.
inline OpticalResponse optical_response(const AtomCloud& cloud, const ProbeSpec& probe,
                                        double absorbed_power = 0.0) {
  probe.validate();
  const double n = cloud.column_density();
  const double sigma = resonant_cross_section(probe.wavelength);
  OpticalResponse r;
  r.phase_shift = phase_shift(n, sigma, probe.detuning);
  r.optical_depth = optical_depth(n, sigma, probe.detuning);
  r.transmission = std::exp(-r.optical_depth);
  r.scattering_rate = absorbed_power / photon_energy(probe.wavelength);
  return r;
}

}  // namespace mzd

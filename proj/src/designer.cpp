#include "mzdetect/designer.hpp"

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

#include "mzdetect/errors.hpp"
#include "mzdetect/optics_chain.hpp"

namespace mzd {

namespace {

// First maximum of J1.
constexpr double kJ1PeakArgument = 1.8411837813406593;

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

double optical_thickness(const AtomCloud& cloud, double wavelength) {
  return cloud.column_density() * resonant_cross_section(wavelength);
}

DetectorSpec with_efficiency(DetectorSpec spec, double eta) {
  spec.quantum_efficiency = eta;
  return spec;
}

}  // namespace

void DesignPoint::validate() const {
  using detail::require;
  require<InvalidInput>(target_optical_depth > 0.0 && target_optical_depth < 1.0,
                        "optical depth must lie in (0, 1)");
  require<InvalidInput>(absorbed_power >= 0.0 && transmitted_probe_power >= 0.0 && lo_power >= 0.0,
                        "powers must be >= 0");
  require<InvalidInput>(bandwidth > 0.0, "bandwidth must be > 0");
  require<InvalidInput>(modulation_depth >= 0.0, "modulation depth must be >= 0");
}

void DesignRequest::validate() const {
  using detail::require;
  cloud.validate();
  detector.validate();
  require<InvalidInput>(wavelength > 0.0, "wavelength must be > 0");
  require<InvalidInput>(target_optical_depth > 0.0 && target_optical_depth < 1.0,
                        "target optical depth must lie in (0, 1)");
  require<InvalidInput>(bandwidth > 0.0, "bandwidth must be > 0");
  require<InvalidInput>(lo_power >= 0.0, "LO power must be >= 0");
  require<InvalidInput>(scattering_rate >= 0.0, "scattering rate must be >= 0");
  require<InvalidInput>(locking_floor >= 0.0, "locking floor must be >= 0");
}

DesignPoint make_design_point(const AtomCloud& cloud, double wavelength, double optical_depth,
                              double absorbed_power, double lo_power, double bandwidth,
                              double modulation_depth, double fractional_signal) {
  DesignPoint p;
  p.target_optical_depth = optical_depth;
  p.detuning = detuning_for_depth(optical_depth, cloud, wavelength);
  p.absorbed_power = absorbed_power;
  p.transmitted_probe_power = transmitted_power(absorbed_power, optical_depth);
  p.lo_power = lo_power;
  p.bandwidth = bandwidth;
  p.modulation_depth = modulation_depth;
  p.fractional_signal = fractional_signal;
  p.phase_signal = 0.5 * p.detuning * optical_depth * fractional_signal;
  p.validate();
  return p;
}

double modulation_penalty(double depth) { return 2.0 * bessel_j(1, depth); }

double solve_modulation_depth(double penalty) {
  const double peak = modulation_penalty(kJ1PeakArgument);
  detail::require<InvalidInput>(penalty >= 0.0 && penalty <= peak,
                                "modulation penalty must lie in [0, 2 max J1]");
  if (penalty == 0.0) return 0.0;
  if (penalty == peak) return kJ1PeakArgument;
  auto f = [penalty](double m) { return modulation_penalty(m) - penalty; };
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iterations = 100;
  const auto [lo, hi] =
      boost::math::tools::toms748_solve(f, 0.0, kJ1PeakArgument, tol, iterations);
  return 0.5 * (lo + hi);
}

double snr_max(const DesignPoint& point, const AtomCloud& cloud, const DetectorSpec& detector,
               double wavelength) {
  detail::require<InvalidInput>(point.bandwidth > 0.0, "bandwidth must be > 0");
  const double h_nu = photon_energy(wavelength);
  const double rate = detector.quantum_efficiency * point.absorbed_power *
                      optical_thickness(cloud, wavelength) / (h_nu * point.bandwidth);
  return 0.5 * std::sqrt(rate) * point.fractional_signal;
}

double detuning_for_depth(double target_optical_depth, const AtomCloud& cloud,
                          double wavelength) {
  detail::require<InvalidInput>(target_optical_depth > 0.0, "target optical depth must be > 0");
  const double thickness = optical_thickness(cloud, wavelength);
  if (target_optical_depth > thickness) {
    throw InfeasibleDesign("target optical depth " + std::to_string(target_optical_depth) +
                           " exceeds the resonant optical thickness " + std::to_string(thickness));
  }
  return std::sqrt(thickness / target_optical_depth - 1.0);
}

double transmitted_power(double absorbed_power, double optical_depth) {
  detail::require<InvalidInput>(optical_depth > 0.0, "optical depth must be > 0");
  detail::require<InvalidInput>(absorbed_power >= 0.0, "absorbed power must be >= 0");
  return absorbed_power / -std::expm1(-optical_depth);
}

double snr_modulated(const DesignPoint& point, const AtomCloud& cloud,
                     const DetectorSpec& detector, double wavelength) {
  point.validate();
  constexpr double tol = 1e-6;
  const double thickness = optical_thickness(cloud, wavelength);
  const double k = point.target_optical_depth;
  detail::require<InvalidInput>(
      close(k, thickness / (1.0 + point.detuning * point.detuning), tol),
      "design point: optical depth does not match the detuning");
  detail::require<InvalidInput>(
      close(point.transmitted_probe_power, transmitted_power(point.absorbed_power, k), tol),
      "design point: transmitted power does not match absorbed power and optical depth");
  detail::require<InvalidInput>(
      close(point.phase_signal, 0.5 * point.detuning * k * point.fractional_signal, tol),
      "design point: phase signal does not match detuning and optical depth");

  const double h_nu = photon_energy(wavelength);
  return bessel_j(1, point.modulation_depth) *
         std::sqrt(detector.quantum_efficiency * point.absorbed_power * thickness /
                   (h_nu * point.bandwidth)) *
         point.fractional_signal;
}

double snr_modulated_phase_form(const DesignPoint& point, const DetectorSpec& detector,
                                double wavelength) {
  point.validate();
  const double h_nu = photon_energy(wavelength);
  return modulation_penalty(point.modulation_depth) *
         std::sqrt(detector.quantum_efficiency * point.transmitted_probe_power /
                   (h_nu * point.bandwidth)) *
         point.phase_signal;
}

CurrentPair signal_and_noise_currents(const DesignPoint& point, const DetectorSpec& detector,
                                      double phase_offset, double wavelength) {
  point.validate();
  const double h_nu = photon_energy(wavelength);
  const double a = detector.gain, eta = detector.quantum_efficiency, e = kElementaryCharge;
  CurrentPair c;
  c.signal = a * eta * e / (std::numbers::sqrt2 * h_nu) *
             std::sqrt(point.lo_power * point.transmitted_probe_power) *
             bessel_j(1, point.modulation_depth) * std::sin(phase_offset);
  c.shot_noise = a * e / std::numbers::sqrt2 *
                 std::sqrt(eta * point.lo_power * point.bandwidth / (2.0 * h_nu));
  return c;
}

CurrentPair balanced_readout_currents(const DesignPoint& point, const DetectorSpec& detector,
                                      double phase_offset, double wavelength) {
  CurrentPair c = signal_and_noise_currents(point, detector, phase_offset, wavelength);
  c.signal *= 2.0 * kLockInReadoutScale;
  c.shot_noise *= std::numbers::sqrt2 * kLockInReadoutScale;
  return c;
}

double phase_sensitivity(const DesignPoint& point, const AtomCloud& cloud,
                         const DetectorSpec& detector, double wavelength) {
  DesignPoint full = point;
  full.fractional_signal = 1.0;
  const double phi = 0.5 * point.detuning * point.target_optical_depth;
  return phi / (snr_max(full, cloud, detector, wavelength) * std::sqrt(point.bandwidth));
}

NoiseBudget noise_budget(const DesignPoint& point, const DetectorSpec& detector,
                         double locking_floor, double wavelength) {
  const double penalty = modulation_penalty(point.modulation_depth);
  const double h_nu = photon_energy(wavelength);
  NoiseBudget b;
  const double inf = std::numeric_limits<double>::infinity();
  const double pt = point.transmitted_probe_power;
  b.shot = penalty > 0.0 && pt > 0.0
               ? 1.0 / (penalty * std::sqrt(detector.quantum_efficiency * pt / h_nu))
               : inf;
  b.detector = penalty > 0.0 && pt > 0.0 && point.lo_power > 0.0
                   ? detector.nep / (penalty * std::sqrt(point.lo_power * pt))
                   : inf;
  b.locking = locking_floor;
  b.total = std::sqrt(b.shot * b.shot + b.detector * b.detector + b.locking * b.locking);
  b.dominant = "shot";
  if (b.detector > b.shot && b.detector >= b.locking) b.dominant = "detector";
  if (b.locking > b.shot && b.locking > b.detector) b.dominant = "locking";
  return b;
}

DesignReport imperfection_scaling(const DesignReport& report, double loss_factor) {
  detail::require<InvalidInput>(loss_factor > 0.0 && loss_factor <= 1.0,
                                "loss_factor must lie in (0, 1]");
  DesignReport r = report;
  for (double* snr : {&r.snr_max, &r.snr_modulated, &r.achievable_snr, &r.ideal.snr_max,
                      &r.ideal.snr_modulated, &r.detector.snr_max, &r.detector.snr_modulated})
    *snr *= loss_factor;
  r.loss_factor *= loss_factor;
  return r;
}

DesignReport rescale_bandwidth(const DesignReport& report, double bandwidth) {
  detail::require<InvalidInput>(bandwidth > 0.0, "bandwidth must be > 0");
  DesignReport r = report;
  const double s = std::sqrt(report.point.bandwidth / bandwidth);
  for (double* snr : {&r.snr_max, &r.snr_modulated, &r.achievable_snr, &r.ideal.snr_max,
                      &r.ideal.snr_modulated, &r.detector.snr_max, &r.detector.snr_modulated})
    *snr *= s;
  r.shot_noise_current /= s;
  r.minimum_detectable_fraction /= s;
  r.point.bandwidth = bandwidth;
  return r;
}

std::vector<std::string> regime_warnings(const DesignPoint& point) {
  std::vector<std::string> w;
  if (point.target_optical_depth > 0.1)
    w.push_back("optical depth above 0.1: the cloud is not optically thin");
  if (std::abs(point.detuning) < 10.0)
    w.push_back("detuning below 10 half-linewidths: far-detuned approximation is poor");
  if (std::abs(point.phase_signal) > 1.0)
    w.push_back("phase signal above 1 rad: small-signal approximation is poor");
  return w;
}

DesignReport design(const DesignRequest& request) {
  request.validate();
  const double wl = request.wavelength;
  const double h_nu = photon_energy(wl);
  const double rate = request.scattering_rate > 0.0
                          ? request.scattering_rate
                          : heating_budget(request.cloud, h_nu).max_scattering_rate;
  const double depth = request.modulation_depth >= 0.0
                           ? request.modulation_depth
                           : solve_modulation_depth(request.modulation_penalty);

  DesignReport r;
  r.point = make_design_point(request.cloud, wl, request.target_optical_depth, rate * h_nu,
                              request.lo_power, request.bandwidth, depth,
                              request.fractional_signal);
  r.wavelength = wl;
  r.photon_energy = h_nu;
  r.optical_thickness = optical_thickness(request.cloud, wl);
  r.full_cloud_phase = phase_shift(request.cloud.column_density(), resonant_cross_section(wl),
                                   r.point.detuning);
  r.heating_rate = request.cloud.atom_count > 0.0 ? rate / request.cloud.atom_count : 0.0;
  r.modulation_penalty = modulation_penalty(depth);

  const double root_b = std::sqrt(request.bandwidth);
  auto figures = [&](double eta) {
    const DetectorSpec det = with_efficiency(request.detector, eta);
    DesignPoint unit = r.point;
    unit.fractional_signal = 1.0;
    unit.phase_signal = r.full_cloud_phase;
    DesignFigures f;
    f.quantum_efficiency = eta;
    f.snr_max = snr_max(r.point, request.cloud, det, wl);
    f.snr_modulated = snr_modulated(r.point, request.cloud, det, wl);
    f.phase_sensitivity = phase_sensitivity(r.point, request.cloud, det, wl);
    const double unit_snr = snr_modulated(unit, request.cloud, det, wl);
    f.column_density_sensitivity = unit_snr > 0.0 ? 1.0 / (unit_snr * root_b)
                                                  : std::numeric_limits<double>::infinity();
    return f;
  };
  r.ideal = figures(1.0);
  r.detector = figures(request.detector.quantum_efficiency);

  r.snr_max = r.ideal.snr_max;
  r.phase_sensitivity = r.ideal.phase_sensitivity;
  r.snr_modulated = r.detector.snr_modulated;
  r.column_density_sensitivity = r.detector.column_density_sensitivity;
  {
    DesignPoint unit = r.point;
    unit.fractional_signal = 1.0;
    const double full = snr_max(unit, request.cloud, with_efficiency(request.detector, 1.0), wl);
    r.minimum_detectable_fraction = full > 0.0 ? 1.0 / full : 1.0;
  }

  const CurrentPair c =
      signal_and_noise_currents(r.point, request.detector, r.point.phase_signal, wl);
  r.signal_current = c.signal;
  r.shot_noise_current = c.shot_noise;

  r.noise_budget = noise_budget(r.point, request.detector, request.locking_floor, wl);
  r.locking_floor = request.locking_floor;
  r.locking_limited = request.locking_floor > r.phase_sensitivity;
  r.achievable_snr = r.locking_limited
                         ? r.full_cloud_phase * request.fractional_signal /
                               (request.locking_floor * root_b)
                         : r.snr_max;
  r.warnings = regime_warnings(r.point);
  return r;
}

}  // namespace mzd

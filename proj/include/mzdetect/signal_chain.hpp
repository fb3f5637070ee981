#pragma once

// End-to-end time-domain chain: laser -> interferometer -> two photodiodes
// -> balanced subtraction -> lock-in. Samples are produced and consumed in
// blocks so long runs never hold the raw photocurrent in memory.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mzdetect/atom_optics.hpp"
#include "mzdetect/detection.hpp"
#include "mzdetect/lockin.hpp"
#include "mzdetect/optics_chain.hpp"

namespace mzd {

struct ChainSettings {
  AtomCloud cloud;
  ProbeSpec probe;  // input_power is the laser power at the input splitter
  bool atoms_present = true;
  InterferometerSpec interferometer;
  double modulation_depth = 0.528;
  double modulation_frequency = 2.5e6;  // Hz
  int sideband_cutoff = kDefaultSidebandCutoff;
  DetectorSpec detector_a, detector_b;
  NoiseConfig noise;
  LockInConfig lockin;
  double sample_rate = 25e6;  // Hz

  void validate() const;
};

/// Highest sideband order carrying more than `threshold` of the modulated power.
int significant_sideband_order(double depth, int cutoff, double threshold = 1e-9);

/// Sets the laser power and the colour-glass transmission so that `lo_power`
/// reaches the recombiner and `probe_power` leaves the atoms.
/// Throws InfeasibleDesign when the probe would need gain.
void configure_powers(ChainSettings& settings, double lo_power, double probe_power);

struct ChainRun {
  double duration = 1.0;  // s
  std::uint64_t seed = 1;
  double control_rate = 1e6;  // Hz, rate at which `gamma` is sampled
  /// Operating phase for control tick k; held until the next tick.
  std::function<double(std::uint64_t)> gamma;
  Eigen::Index raw_samples = 0;  // leading balanced samples to keep
};

struct ChainOutput {
  DemodulatedTrace demodulated;
  Eigen::VectorXd raw_balanced;  // A, first raw_samples samples
  double sample_rate = 0.0;
  std::vector<std::string> warnings;
};

class SignalChain {
 public:
  explicit SignalChain(const ChainSettings& settings);

  const ChainSettings& settings() const { return settings_; }
  const OpticalResponse& response() const { return response_; }

  /// Output ports for operating phase gamma.
  std::pair<OutputPort, OutputPort> ports(double gamma) const;

  /// Noiseless lock-in output, computed from the first harmonic of the port
  /// fields: sqrt2 Re(c1 exp(-i ref)), c1 = sum_n a_{n+1} conj(a_n).
  double expected_port_demodulated(int port, double gamma) const;
  double expected_demodulated(double gamma) const;  // balanced

  double mean_port_power(int port, double gamma) const;

  /// rms of the balanced lock-in output from the enabled white sources
  /// (shot, NEP), each port contributing density x lock-in bandwidth.
  double expected_white_noise(double gamma) const;

  ChainOutput run(const ChainRun& run) const;

 private:
  ChainSettings settings_;
  OpticalResponse response_;
  InterferometerArms arms_;
  // port power = c + cos(gamma) dc + sin(gamma) ds, tabulated over one
  // modulation period when it spans a whole number of samples.
  struct PortTable {
    std::vector<double> c, dc, ds;
  };
  PortTable table_a_, table_b_;
  int period_samples_ = 0;
};

}  // namespace mzd

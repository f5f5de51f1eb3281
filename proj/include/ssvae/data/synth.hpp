#pragma once

// Synthetic bearing vibration for desk-scale runs.
//
//   class 0 (healthy): band-limited Gaussian noise (biquad band-pass)
//   class k > 0:       impulse train at fault_rates_hz[k], every impulse
//                      exciting a decaying resonance
//                      h(t) = exp(-decay t) sin(2 pi f_res t)
//
// Repetition rates vary per recording by rate_jitter, impulse times by
// timing_jitter of a period and amplitudes by amplitude_jitter. White
// Gaussian noise is added at snr_db relative to the clean signal power
// (no noise for an infinite SNR).

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "ssvae/data/segments.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::data {

struct SynthConfig {
  int sample_rate_hz = 12000;
  /// 4,900 samples give exactly 20 windows of 1,024 at stride 204.
  std::size_t length = 4900;
  std::size_t classes = 4;
  std::size_t train_recordings_per_class = 100;
  std::size_t test_recordings_per_class = 10;
  double snr_db = 10.0;

  double healthy_center_hz = 600.0;
  double healthy_q = 0.7;
  std::vector<double> fault_rates_hz{0.0, 62.0, 103.0, 165.0};
  double resonance_hz = 3000.0;
  double decay_per_s = 900.0;
  double rate_jitter = 0.02;
  double timing_jitter = 0.005;
  double amplitude_jitter = 0.1;

  bool noise_free() const { return snr_db == std::numeric_limits<double>::infinity(); }
  void validate() const;
};

/// n recordings of one class, source ids "synth_c<class>_<index>" starting at
/// first_index (sequence = index).
std::vector<Recording> synth_generate(int class_label, std::size_t n, RngStream& rng, const SynthConfig& config = {},
                                      std::size_t first_index = 0);

/// train + test recordings for every class; class c draws from
/// RngStream(seed).split(c + 1).
std::vector<Recording> synth_dataset(const SynthConfig& config, std::uint64_t seed);

}  // namespace ssvae::data

#include "ssvae/data/synth.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ssvae/error.hpp"

namespace ssvae::data {

void SynthConfig::validate() const {
  if (sample_rate_hz <= 0) throw ConfigError("synthetic sample rate must be positive");
  if (length == 0) throw ConfigError("synthetic recording length must be positive");
  if (classes < 2 || classes > fault_rates_hz.size()) {
    throw ConfigError("synthetic classes must lie in [2, " + std::to_string(fault_rates_hz.size()) + "]");
  }
  for (std::size_t c = 1; c < classes; ++c) {
    if (!(fault_rates_hz[c] > 0.0)) throw ConfigError("fault repetition rates must be positive");
  }
  if (std::isnan(snr_db)) throw ConfigError("SNR must be a number");
  const double nyquist = sample_rate_hz / 2.0;
  if (!(healthy_center_hz > 0.0 && healthy_center_hz < nyquist) || !(resonance_hz > 0.0 && resonance_hz < nyquist)) {
    throw ConfigError("synthetic frequencies must lie below Nyquist");
  }
  if (!(decay_per_s > 0.0) || !(healthy_q > 0.0)) throw ConfigError("decay and Q must be positive");
  if (rate_jitter < 0.0 || timing_jitter < 0.0 || amplitude_jitter < 0.0 || rate_jitter >= 1.0) {
    throw ConfigError("jitter fractions must be non-negative and the rate jitter below 1");
  }
}

namespace {

// RBJ band-pass biquad (constant 0 dB peak gain) over white noise.
std::vector<double> band_noise(std::size_t n, double fs, double f0, double q, RngStream& rng) {
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  const std::size_t warm = 256;
  std::vector<double> y(n);
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t i = 0; i < n + warm; ++i) {
    const double x = rng.normal();
    const double v = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = v;
    if (i >= warm) y[i - warm] = v;
  }
  return y;
}

std::vector<double> impulse_train(std::size_t n, const SynthConfig& c, double rate, RngStream& rng) {
  const double fs = c.sample_rate_hz;
  const double r = rate * (1.0 + c.rate_jitter * (2.0 * rng.uniform() - 1.0));
  const double period = fs / r;
  const auto ring = static_cast<std::size_t>(std::ceil(fs * 12.0 / c.decay_per_s));
  std::vector<double> h(ring);
  for (std::size_t i = 0; i < ring; ++i) {
    const double t = i / fs;
    h[i] = std::exp(-c.decay_per_s * t) * std::sin(2.0 * std::numbers::pi * c.resonance_hz * t);
  }
  std::vector<double> y(n, 0.0);
  // Impulses start before the recording so the first window is not special.
  for (double at = -period * rng.uniform() - static_cast<double>(ring); at < static_cast<double>(n); at += period) {
    const double t0 = at + c.timing_jitter * period * rng.normal();
    const double amp = 1.0 + c.amplitude_jitter * rng.normal();
    const auto start = static_cast<long long>(std::floor(t0));
    for (std::size_t i = 0; i < ring; ++i) {
      const long long k = start + static_cast<long long>(i);
      if (k >= 0 && k < static_cast<long long>(n)) y[k] += amp * h[i];
    }
  }
  return y;
}

}  // namespace

std::vector<Recording> synth_generate(int class_label, std::size_t n, RngStream& rng, const SynthConfig& config,
                                      std::size_t first_index) {
  config.validate();
  if (class_label < 0 || static_cast<std::size_t>(class_label) >= config.classes) {
    throw ConfigError("synthetic class " + std::to_string(class_label) + " outside [0, " +
                      std::to_string(config.classes) + ")");
  }
  std::vector<Recording> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> clean =
        class_label == 0
            ? band_noise(config.length, config.sample_rate_hz, config.healthy_center_hz, config.healthy_q, rng)
            : impulse_train(config.length, config, config.fault_rates_hz[class_label], rng);
    double power = 0.0;
    for (double v : clean) power += v * v;
    power /= static_cast<double>(clean.size());
    const double noise_sd = config.noise_free() ? 0.0 : std::sqrt(power / std::pow(10.0, config.snr_db / 10.0));
    Recording rec;
    rec.sample_rate_hz = config.sample_rate_hz;
    rec.class_label = class_label;
    rec.sequence = static_cast<std::int64_t>(first_index + r);
    rec.source_id = "synth_c" + std::to_string(class_label) + "_" + std::to_string(first_index + r);
    rec.samples.resize(config.length);
    for (std::size_t i = 0; i < config.length; ++i) {
      rec.samples[i] = static_cast<float>(clean[i] + (noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Recording> synth_dataset(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const RngStream root(seed);
  std::vector<Recording> out;
  const std::size_t per_class = config.train_recordings_per_class + config.test_recordings_per_class;
  for (std::size_t c = 0; c < config.classes; ++c) {
    RngStream rng = root.split(c + 1);
    auto part = synth_generate(static_cast<int>(c), per_class, rng, config);
    for (auto& r : part) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace ssvae::data

#include "ssvae/ssl/labels.hpp"

#include "ssvae/error.hpp"

namespace ssvae::ssl {

void require_all_classes(std::span<const int> labels, std::size_t classes, const std::string& who) {
  std::vector<std::size_t> count(classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConfigError(who + ": label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
    }
    ++count[static_cast<std::size_t>(y)];
  }
  std::string missing;
  for (std::size_t k = 0; k < classes; ++k) {
    if (count[k] == 0) missing += (missing.empty() ? "" : ",") + std::to_string(k);
  }
  if (!missing.empty()) throw ConfigError(who + ": no labeled samples for classes " + missing);
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ConfigError("accuracy: prediction and label counts differ");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

std::vector<int> argmax_rows(std::span<const float> scores, std::size_t classes) {
  if (classes == 0 || scores.size() % classes != 0) throw ConfigError("argmax_rows: bad score layout");
  std::vector<int> out(scores.size() / classes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float* row = scores.data() + i * classes;
    std::size_t best = 0;
    for (std::size_t k = 1; k < classes; ++k) {
      if (row[k] > row[best]) best = k;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace ssvae::ssl

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssvae::ssl {

/// Throws ConfigError when a label falls outside [0, classes) or when some
/// class has no sample; the message lists the absent classes.
void require_all_classes(std::span<const int> labels, std::size_t classes, const std::string& who);

/// Fraction of positions where predicted == truth; 0 for empty input.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Row-wise argmax of scores [N*K]; ties go to the lowest index.
std::vector<int> argmax_rows(std::span<const float> scores, std::size_t classes);

}  // namespace ssvae::ssl

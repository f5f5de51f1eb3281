#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ssvae/rng.hpp"

namespace ssvae::baselines::detail {

// Consecutive batches of row indices from a permutation that is redrawn
// whenever it runs out.
class BatchStream {
 public:
  BatchStream(std::size_t rows, std::size_t batch, RngStream rng)
      : rows_(rows), batch_(std::min(batch, rows)), rng_(rng), perm_(rng_.permutation(rows)) {}

  // One pass uses ceil(rows / batch) full-or-tail batches without recycling.
  std::size_t steps_per_pass() const { return (rows_ + batch_ - 1) / batch_; }

  std::vector<std::size_t> next(bool allow_tail) {
    std::vector<std::size_t> idx;
    idx.reserve(batch_);
    while (idx.size() < batch_) {
      if (cursor_ == rows_) {
        if (allow_tail && !idx.empty()) break;
        perm_ = rng_.permutation(rows_);
        cursor_ = 0;
      }
      idx.push_back(perm_[cursor_++]);
    }
    return idx;
  }

 private:
  std::size_t rows_, batch_;
  RngStream rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
};

}  // namespace ssvae::baselines::detail

#include "ssvae/baselines/train_config.hpp"

#include "ssvae/error.hpp"

namespace ssvae::baselines {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (optimizer.lr <= 0.0f) throw ConfigError("learning rate must be positive");
}

}  // namespace ssvae::baselines

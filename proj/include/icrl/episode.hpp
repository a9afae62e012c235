#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "icrl/dataset.hpp"
#include "icrl/errors.hpp"
#include "icrl/reward.hpp"

namespace icrl {

// One (input, prediction, reward) interaction at timestep t. Immutable once
// created.
struct Episode {
  std::uint64_t t = 0;  // 1-based step index
  Example example;
  std::string prediction;
  RewardValue reward;
};

// Ordered store of retained episodes, strictly increasing t. Admission policy
// is the caller's job; the buffer only enforces ordering.
class EpisodeBuffer {
 public:
  void push(Episode e) {
    if (!episodes_.empty() && e.t <= episodes_.back().t) {
      throw ContractViolation("buffer timesteps must be strictly increasing");
    }
    episodes_.push_back(std::move(e));
  }
  const std::vector<Episode>& episodes() const { return episodes_; }
  std::size_t size() const { return episodes_.size(); }
  bool empty() const { return episodes_.empty(); }
  const Episode& operator[](std::size_t i) const { return episodes_[i]; }

 private:
  std::vector<Episode> episodes_;
};

}  // namespace icrl

#pragma once

#include <optional>
#include <string>

#include "icrl/dataset.hpp"
#include "icrl/rng.hpp"

namespace icrl {

// One enum value per experiment arm. The *_visible kinds score exactly like
// standard and only change buffer admission downstream.
enum class RewardKind {
  standard,
  inverted,
  noisy,
  none,
  positive_only_visible,
  negative_only_visible,
};

struct RewardMode {
  RewardKind kind = RewardKind::standard;
  double p_flip = 0.0;  // noisy only

  static RewardMode standard() { return {RewardKind::standard, 0.0}; }
  static RewardMode inverted() { return {RewardKind::inverted, 0.0}; }
  static RewardMode noisy(double p) { return {RewardKind::noisy, p}; }
  static RewardMode none() { return {RewardKind::none, 0.0}; }
};

struct RewardValue {
  int value = 0;          // 0 or 1
  bool observed = true;   // false under RewardKind::none

  // Sign of the reward itself; observability is tracked separately so the
  // reward-free arm can still gate admission on the underlying value.
  bool positive() const { return value > 0; }
};

RewardKind reward_kind_from_string(const std::string& s);
std::string to_string(RewardKind kind);

// Trims surrounding whitespace; otherwise case-sensitive. Constrained
// decoding emits canonical labels, so anything stronger would hide bugs.
std::string normalize_label(const std::string& s);

// True environment reward: exact match after normalization.
bool is_correct(const Example& example, const std::string& prediction);

// Observed reward under the configured mode. Total over arbitrary prediction
// strings. The rng stream is consumed only by noisy mode.
RewardValue evaluate_reward(const Example& example, const std::string& prediction,
                            const RewardMode& mode, RngStream& rng);

// Feedback wire format. Byte-exact: these strings are part of the prompt.
inline constexpr const char* kPositiveFeedbackSuffix =
    "' is the correct answer! Good job!";
inline constexpr const char* kNegativeFeedbackPrefix = "The answer '";
inline constexpr const char* kNegativeFeedbackSuffix =
    "' is wrong! You can do better!";

// r = 1 -> 'traffic' is the correct answer! Good job!
// r = 0 -> The answer 'traffic' is wrong! You can do better!
// Throws ContractViolation if the reward was never observed.
std::string verbalize_reward(const std::string& prediction, const RewardValue& r);

// Extracts the prediction back out of a feedback line (text between the
// first pair of single quotes); nullopt if the shape does not match.
std::optional<std::string> prediction_from_feedback(const std::string& feedback);

}  // namespace icrl

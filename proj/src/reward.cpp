#include "icrl/reward.hpp"

#include "icrl/errors.hpp"

namespace icrl {

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "standard") return RewardKind::standard;
  if (s == "inverted") return RewardKind::inverted;
  if (s == "noisy") return RewardKind::noisy;
  if (s == "none") return RewardKind::none;
  if (s == "positive_only_visible") return RewardKind::positive_only_visible;
  if (s == "negative_only_visible") return RewardKind::negative_only_visible;
  throw ConfigError("unknown reward mode '" + s + "'");
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::standard: return "standard";
    case RewardKind::inverted: return "inverted";
    case RewardKind::noisy: return "noisy";
    case RewardKind::none: return "none";
    case RewardKind::positive_only_visible: return "positive_only_visible";
    case RewardKind::negative_only_visible: return "negative_only_visible";
  }
  return "?";
}

std::string normalize_label(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_correct(const Example& example, const std::string& prediction) {
  return normalize_label(prediction) == normalize_label(example.gold_label);
}

RewardValue evaluate_reward(const Example& example, const std::string& prediction,
                            const RewardMode& mode, RngStream& rng) {
  int match = is_correct(example, prediction) ? 1 : 0;
  switch (mode.kind) {
    case RewardKind::standard:
    case RewardKind::positive_only_visible:
    case RewardKind::negative_only_visible:
      return {match, true};
    case RewardKind::inverted:
      return {1 - match, true};
    case RewardKind::noisy: {
      bool flip = rng.bernoulli(mode.p_flip);
      return {flip ? 1 - match : match, true};
    }
    case RewardKind::none:
      return {match, false};
  }
  throw ContractViolation("unhandled reward kind");
}

std::string verbalize_reward(const std::string& prediction, const RewardValue& r) {
  if (!r.observed) {
    throw ContractViolation("verbalize_reward called with an unobserved reward");
  }
  if (r.value > 0) {
    return "'" + prediction + kPositiveFeedbackSuffix;
  }
  return kNegativeFeedbackPrefix + prediction + kNegativeFeedbackSuffix;
}

std::optional<std::string> prediction_from_feedback(const std::string& feedback) {
  std::size_t first = feedback.find('\'');
  if (first == std::string::npos) return std::nullopt;
  std::size_t second = feedback.find('\'', first + 1);
  if (second == std::string::npos) return std::nullopt;
  return feedback.substr(first + 1, second - first - 1);
}

}  // namespace icrl

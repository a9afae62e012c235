#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icrl/dataset.hpp"
#include "icrl/http.hpp"
#include "icrl/policy.hpp"
#include "icrl/runner.hpp"

namespace icrl {

struct DatasetConfig {
  std::string path;
  DatasetFormat format = DatasetFormat::jsonl;
  std::optional<std::string> labels_path;
  std::optional<std::size_t> train_n;
  std::optional<std::size_t> test_n;
};

struct BackendConfig {
  std::string kind = "oracle";
  std::string label;      // constant
  double epsilon = 0.05;  // frequency_learner
  std::vector<std::string> train_script;  // scripted
  std::vector<std::string> eval_script;
  RemoteChatConfig remote;  // remote_chat
};

struct AppConfig {
  DatasetConfig dataset;
  RunnerConfig runner;
  std::string tokenizer = "whitespace";
  BackendConfig backend;
};

// Replaces every ${NAME} with the environment value; an unset variable is a
// config error.
std::string interpolate_env(const std::string& value, const std::string& where,
                            std::vector<std::string>& errors);

// Applies one dotted-path override, e.g. "p_keep=0.2" or
// "backend.kind=oracle". The value is parsed as JSON when well-formed and
// treated as a plain string otherwise; assigning a bare string onto an
// object that has a "kind" member replaces it with {"kind": value}.
void apply_override(nlohmann::json& root, const std::string& spec);

// Validates the whole document, reporting every problem at once (unknown
// keys, missing required fields, out-of-range values). Environment
// interpolation happens here.
AppConfig parse_app_config(const nlohmann::json& root);

struct LoadedConfig {
  AppConfig config;
  // Post-override, pre-interpolation document; what the snapshot echoes.
  nlohmann::json effective;
};

LoadedConfig load_config(const std::string& path,
                         const std::vector<std::string>& overrides);

inline constexpr const char* kRedactedMarker = "<redacted>";

// Canonical snapshot text: 2-space indent, sorted keys, trailing newline.
// A literal backend.api_key is replaced by the redacted marker; ${ENV}
// references are left as written (they never contain the secret).
std::string snapshot_json(nlohmann::json effective);

// Builds the configured backend. transport_override injects a fake transport
// for tests; remote_chat otherwise talks through an httplib client. Mock
// kinds never construct a transport at all.
std::shared_ptr<PolicyBackend> make_backend(
    const BackendConfig& config,
    std::shared_ptr<HttpTransport> transport_override = nullptr);

}  // namespace icrl

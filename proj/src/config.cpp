#include "icrl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "icrl/errors.hpp"

namespace icrl {

namespace {

using nlohmann::json;

// Typed field extraction over one JSON object, collecting every problem
// instead of stopping at the first.
class Reader {
 public:
  Reader(const json& obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (!obj_.is_object()) {
      errors_.push_back(where("") + ": expected an object");
      broken_ = true;
    }
  }

  bool has(const char* key) {
    if (broken_) return false;
    return obj_.contains(key);
  }

  const json* take(const char* key) {
    if (broken_) return nullptr;
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string str(const char* key, std::string fallback) {
    const json* v = take(key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) {
      errors_.push_back(where(key) + ": expected a string");
      return fallback;
    }
    return interpolate_env(v->get<std::string>(), where(key), errors_);
  }

  std::optional<std::string> str_opt(const char* key) {
    const json* v = take(key);
    if (v == nullptr || v->is_null()) return std::nullopt;
    if (!v->is_string()) {
      errors_.push_back(where(key) + ": expected a string");
      return std::nullopt;
    }
    return interpolate_env(v->get<std::string>(), where(key), errors_);
  }

  std::uint64_t u64(const char* key, std::uint64_t fallback) {
    const json* v = take(key);
    if (v == nullptr) return fallback;
    if (!v->is_number_unsigned()) {
      errors_.push_back(where(key) + ": expected a non-negative integer");
      return fallback;
    }
    return v->get<std::uint64_t>();
  }

  std::optional<std::uint64_t> u64_opt(const char* key) {
    const json* v = take(key);
    if (v == nullptr || v->is_null()) return std::nullopt;
    if (!v->is_number_unsigned()) {
      errors_.push_back(where(key) + ": expected a non-negative integer");
      return std::nullopt;
    }
    return v->get<std::uint64_t>();
  }

  double dbl(const char* key, double fallback) {
    const json* v = take(key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) {
      errors_.push_back(where(key) + ": expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  bool boolean(const char* key, bool fallback) {
    const json* v = take(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) {
      errors_.push_back(where(key) + ": expected a boolean");
      return fallback;
    }
    return v->get<bool>();
  }

  std::vector<std::string> str_list(const char* key) {
    const json* v = take(key);
    std::vector<std::string> out;
    if (v == nullptr) return out;
    if (!v->is_array()) {
      errors_.push_back(where(key) + ": expected an array of strings");
      return out;
    }
    for (const json& item : *v) {
      if (!item.is_string()) {
        errors_.push_back(where(key) + ": expected an array of strings");
        return {};
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }

  // Call last: flags keys nobody consumed.
  void finish() {
    if (broken_) return;
    for (const auto& item : obj_.items()) {
      if (seen_.count(item.key()) == 0) {
        errors_.push_back("unknown key '" + where(item.key().c_str()) + "'");
      }
    }
  }

  std::string where(const char* key) const {
    if (prefix_.empty()) return key;
    return *key == '\0' ? prefix_ : prefix_ + "." + key;
  }

  // Enum-ish string field validated through a parser that throws ConfigError.
  template <typename T, typename Parse>
  T parsed(const char* key, T fallback, Parse parse) {
    const json* v = take(key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) {
      errors_.push_back(where(key) + ": expected a string");
      return fallback;
    }
    try {
      return parse(v->get<std::string>());
    } catch (const ConfigError& e) {
      errors_.push_back(where(key) + ": " + e.what());
      return fallback;
    }
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
  bool broken_ = false;
};

const json kEmptyObject = json::object();

const json& subobject(Reader& r, const char* key) {
  const json* v = r.take(key);
  return v == nullptr ? kEmptyObject : *v;
}

}  // namespace

std::string interpolate_env(const std::string& value, const std::string& where,
                            std::vector<std::string>& errors) {
  std::string out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    std::size_t open = value.find("${", pos);
    if (open == std::string::npos) {
      out.append(value, pos, std::string::npos);
      break;
    }
    out.append(value, pos, open - pos);
    std::size_t close = value.find('}', open + 2);
    if (close == std::string::npos) {
      errors.push_back(where + ": unterminated ${...} reference");
      return out;
    }
    std::string name = value.substr(open + 2, close - open - 2);
    const char* env = std::getenv(name.c_str());
    if (env == nullptr) {
      errors.push_back(where + ": environment variable '" + name + "' is not set");
    } else {
      out += env;
    }
    pos = close + 1;
  }
  return out;
}

void apply_override(json& root, const std::string& spec) {
  std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + spec + "'");
  }
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &root;
  std::size_t pos = 0;
  for (;;) {
    std::size_t dot = path.find('.', pos);
    std::string key = path.substr(pos, dot - pos);
    if (key.empty()) {
      throw ConfigError("override path has an empty segment: '" + spec + "'");
    }
    if (dot == std::string::npos) {
      if (!node->is_object()) {
        throw ConfigError("override path crosses a non-object: '" + spec + "'");
      }
      json& slot = (*node)[key];
      // `backend=oracle` means "switch the kind", keeping the object shape.
      if (slot.is_object() && slot.contains("kind") && value.is_string()) {
        slot = json{{"kind", value}};
      } else {
        slot = value;
      }
      return;
    }
    if (!node->is_object()) {
      throw ConfigError("override path crosses a non-object: '" + spec + "'");
    }
    json& next = (*node)[key];
    if (next.is_null()) next = json::object();
    node = &next;
    pos = dot + 1;
  }
}

AppConfig parse_app_config(const json& root) {
  std::vector<std::string> errors;
  AppConfig app;

  Reader top(root, "", errors);

  {
    Reader r(subobject(top, "dataset"), "dataset", errors);
    app.dataset.path = r.str("path", "");
    if (app.dataset.path.empty()) errors.push_back("dataset.path is required");
    app.dataset.format = r.parsed("format", DatasetFormat::jsonl,
                                  dataset_format_from_string);
    app.dataset.labels_path = r.str_opt("labels_path");
    app.dataset.train_n = r.u64_opt("train_n");
    app.dataset.test_n = r.u64_opt("test_n");
    r.finish();
  }

  app.runner.algorithm = top.parsed("algorithm", Algorithm::explorative,
                                    algorithm_from_string);
  app.runner.p_keep = top.dbl("p_keep", 0.1);
  app.runner.k = top.u64("k", 8);
  app.runner.selection = top.parsed("selection", SelectionStrategy::uniform,
                                    selection_from_string);
  app.runner.downsample = top.parsed("downsample", DownsampleStrategy::unbiased,
                                     downsample_from_string);
  {
    Reader r(subobject(top, "reward"), "reward", errors);
    app.runner.reward_mode.kind =
        r.parsed("kind", RewardKind::standard, reward_kind_from_string);
    app.runner.reward_mode.p_flip = r.dbl("p_flip", 0.0);
    r.finish();
  }
  if (top.has("admission")) {
    app.runner.admission = top.parsed<BufferAdmission>(
        "admission", BufferAdmission::positive_only, admission_from_string);
  } else {
    top.take("admission");
  }
  {
    Reader r(subobject(top, "budget"), "budget", errors);
    app.runner.budget.window_tokens = r.u64("window_tokens", 4096);
    app.runner.budget.overhead_tokens = r.u64("overhead_tokens", 0);
    r.finish();
  }
  app.runner.steps = top.u64("steps", 0);
  app.runner.eval_every = top.u64("eval_every", 500);
  app.runner.train_window = top.u64("train_window", 256);
  app.runner.eval_concurrency = top.u64("eval_concurrency", 1);
  app.runner.seed = top.u64("seed", 0);
  app.runner.task = top.str("task", "");
  app.tokenizer = top.str("tokenizer", "whitespace");
  if (app.tokenizer != "whitespace" && app.tokenizer != "byte") {
    errors.push_back("tokenizer: expected 'whitespace' or 'byte', got '" +
                     app.tokenizer + "'");
  }

  {
    Reader r(subobject(top, "prompt"), "prompt", errors);
    PromptTemplate defaults;
    app.runner.tmpl.dialect =
        r.parsed("dialect", ChatDialect::llama, dialect_from_string);
    app.runner.tmpl.system_icl = r.str("system_icl", defaults.system_icl);
    app.runner.tmpl.system_icrl = r.str("system_icrl", defaults.system_icrl);
    app.runner.tmpl.query_prefix = r.str("query_prefix", defaults.query_prefix);
    app.runner.tmpl.answer_prefix = r.str("answer_prefix", defaults.answer_prefix);
    r.finish();
  }

  {
    Reader r(subobject(top, "backend"), "backend", errors);
    app.backend.kind = r.str("kind", "oracle");
    const std::set<std::string> kinds = {
        "oracle",           "constant", "parrot_last_positive",
        "frequency_learner", "scripted", "remote_chat"};
    if (kinds.count(app.backend.kind) == 0) {
      errors.push_back("backend.kind: unknown backend '" + app.backend.kind + "'");
    }
    app.backend.label = r.str("label", "");
    app.backend.epsilon = r.dbl("epsilon", 0.05);
    app.backend.train_script = r.str_list("train");
    app.backend.eval_script = r.str_list("eval");

    RemoteChatConfig& remote = app.backend.remote;
    remote.endpoint = r.str("endpoint", "");
    remote.api_key = r.str("api_key", "");
    remote.model = r.str("model", "");
    remote.temperature = r.dbl("temperature", 0.0);
    remote.max_tokens = r.u64("max_tokens", 16);
    remote.guided_choice = r.boolean("guided_choice", false);
    remote.max_attempts = static_cast<int>(r.u64("max_attempts", 3));
    remote.backoff_seconds = r.dbl("backoff_seconds", 0.5);
    remote.timeout_seconds = static_cast<int>(r.u64("timeout_seconds", 60));
    remote.on_invalid =
        r.parsed("on_invalid", InvalidCompletionPolicy::resample_once,
                 invalid_policy_from_string);
    r.finish();

    if (app.backend.kind == "constant" && app.backend.label.empty()) {
      errors.push_back("backend.label is required for the constant backend");
    }
    if (app.backend.kind == "scripted" && app.backend.train_script.empty() &&
        app.backend.eval_script.empty()) {
      errors.push_back("backend.train or backend.eval is required for scripted");
    }
    if (app.backend.kind == "frequency_learner" &&
        !(app.backend.epsilon >= 0.0 && app.backend.epsilon <= 1.0)) {
      errors.push_back("backend.epsilon must lie in [0, 1]");
    }
    if (app.backend.kind == "remote_chat") {
      if (remote.endpoint.empty()) {
        const char* env = std::getenv("ICRL_ENDPOINT");
        if (env != nullptr) {
          remote.endpoint = env;
        } else {
          errors.push_back(
              "backend.endpoint is required for remote_chat (or set "
              "ICRL_ENDPOINT)");
        }
      }
      if (remote.api_key.empty()) {
        const char* env = std::getenv("ICRL_API_KEY");
        if (env != nullptr) remote.api_key = env;
      }
      if (remote.model.empty()) {
        errors.push_back("backend.model is required for remote_chat");
      }
      if (remote.max_attempts < 1) {
        errors.push_back("backend.max_attempts must be >= 1");
      }
    }
  }

  top.finish();

  // Range checks the runner owns; fold its complaints into the same list,
  // unwrapping the bullet list it throws.
  if (errors.empty()) {
    try {
      validate(app.runner);
    } catch (const ConfigError& e) {
      std::istringstream lines(e.what());
      std::string line;
      while (std::getline(lines, line)) {
        if (line.rfind("  - ", 0) == 0) errors.push_back(line.substr(4));
      }
      if (errors.empty()) errors.push_back(e.what());
    }
  }

  if (!errors.empty()) {
    std::string all = "configuration invalid:";
    for (const std::string& e : errors) all += "\n  - " + e;
    throw ConfigError(all);
  }
  return app;
}

LoadedConfig load_config(const std::string& path,
                         const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded()) {
    throw ConfigError("config file is not valid JSON: " + path);
  }
  for (const std::string& spec : overrides) apply_override(root, spec);

  LoadedConfig out;
  out.effective = root;
  out.config = parse_app_config(root);
  return out;
}

std::string snapshot_json(json effective) {
  if (effective.contains("backend") && effective["backend"].is_object() &&
      effective["backend"].contains("api_key")) {
    json& key = effective["backend"]["api_key"];
    if (key.is_string()) {
      const std::string v = key.get<std::string>();
      // ${ENV} references never contain the secret; literals do.
      if (!v.empty() && v.find("${") == std::string::npos) {
        key = kRedactedMarker;
      }
    }
  }
  return effective.dump(2) + "\n";
}

std::shared_ptr<PolicyBackend> make_backend(
    const BackendConfig& config, std::shared_ptr<HttpTransport> transport_override) {
  if (config.kind == "oracle") return std::make_shared<OracleBackend>();
  if (config.kind == "constant") {
    return std::make_shared<ConstantBackend>(config.label);
  }
  if (config.kind == "parrot_last_positive") {
    return std::make_shared<ParrotLastPositiveBackend>();
  }
  if (config.kind == "frequency_learner") {
    return std::make_shared<FrequencyLearnerBackend>(config.epsilon);
  }
  if (config.kind == "scripted") {
    return std::make_shared<ScriptedBackend>(config.train_script,
                                             config.eval_script);
  }
  if (config.kind == "remote_chat") {
    std::shared_ptr<HttpTransport> transport = std::move(transport_override);
    if (transport == nullptr) {
      transport = make_httplib_transport(config.remote.endpoint,
                                         config.remote.timeout_seconds);
    }
    return std::make_shared<RemoteChatBackend>(config.remote, std::move(transport));
  }
  throw ConfigError("unknown backend kind '" + config.kind + "'");
}

}  // namespace icrl

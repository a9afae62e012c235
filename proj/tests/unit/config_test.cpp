#include <doctest.h>

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "icrl/config.hpp"
#include "icrl/errors.hpp"
#include "icrl/policy.hpp"
#include "support/helpers.hpp"

using namespace icrl;
using icrl::testing::ScriptedTransport;
using icrl::testing::TempDir;
using icrl::testing::spit;
using nlohmann::json;

namespace {

using icrl::testing::EnvGuard;

json minimal_doc() {
  return json{{"dataset", json{{"path", "data.jsonl"}}}};
}

// Collects the ConfigError text so multi-bullet messages can be probed.
std::string parse_failure(const json& doc) {
  try {
    (void)parse_app_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("interpolate_env expands references and reports problems") {
  std::vector<std::string> errors;

  SUBCASE("plain strings pass through") {
    CHECK(interpolate_env("no refs here", "spot", errors) == "no refs here");
    CHECK(errors.empty());
  }

  SUBCASE("set variables are substituted in place") {
    EnvGuard a("ICRL_TEST_A", "alpha");
    EnvGuard b("ICRL_TEST_B", "beta");
    std::string out =
        interpolate_env("x-${ICRL_TEST_A}/${ICRL_TEST_B}-y", "spot", errors);
    CHECK(out == "x-alpha/beta-y");
    CHECK(errors.empty());
  }

  SUBCASE("an unset variable is a collected error") {
    EnvGuard gone("ICRL_TEST_GONE", nullptr);
    std::string out = interpolate_env("p${ICRL_TEST_GONE}q", "dataset.path", errors);
    CHECK(out == "pq");
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] ==
          "dataset.path: environment variable 'ICRL_TEST_GONE' is not set");
  }

  SUBCASE("an unterminated reference is a collected error") {
    std::string out = interpolate_env("a${OOPS", "backend.api_key", errors);
    CHECK(out == "a");
    REQUIRE(errors.size() == 1);
    CHECK(errors[0] == "backend.api_key: unterminated ${...} reference");
  }
}

TEST_CASE("apply_override writes typed values along dotted paths") {
  json root = json::object();

  SUBCASE("values parse as JSON when well-formed, else as strings") {
    apply_override(root, "seed=42");
    apply_override(root, "p_keep=0.25");
    apply_override(root, "task=banking");
    apply_override(root, "labels=[\"a\",\"b\"]");
    apply_override(root, "task2=\"true\"");
    CHECK(root["seed"] == json(42));
    CHECK(root["p_keep"] == json(0.25));
    CHECK(root["task"] == json("banking"));
    CHECK(root["labels"] == json::parse("[\"a\",\"b\"]"));
    CHECK(root["task2"] == json("true"));  // quoting defeats JSON coercion
  }

  SUBCASE("dotted paths create intermediate objects") {
    apply_override(root, "budget.window_tokens=2048");
    apply_override(root, "budget.overhead_tokens=64");
    apply_override(root, "a.b.c=true");
    CHECK(root["budget"]["window_tokens"] == json(2048));
    CHECK(root["budget"]["overhead_tokens"] == json(64));
    CHECK(root["a"]["b"]["c"] == json(true));
  }

  SUBCASE("descending into an existing object keeps its other keys") {
    root["budget"] = json{{"window_tokens", 1}, {"overhead_tokens", 5}};
    apply_override(root, "budget.window_tokens=9");
    CHECK(root["budget"]["window_tokens"] == json(9));
    CHECK(root["budget"]["overhead_tokens"] == json(5));
  }

  SUBCASE("a bare string onto a kind-carrying object swaps the kind") {
    root["backend"] = json{{"kind", "remote_chat"},
                           {"model", "m"},
                           {"endpoint", "http://h"}};
    apply_override(root, "backend=oracle");
    CHECK(root["backend"] == json{{"kind", "oracle"}});
  }

  SUBCASE("a bare string elsewhere is just assigned") {
    apply_override(root, "backend=oracle");
    CHECK(root["backend"] == json("oracle"));
  }

  SUBCASE("malformed specs throw") {
    CHECK_THROWS_WITH_AS(apply_override(root, "novalue"),
                         "override must look like key=value: 'novalue'",
                         ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(root, "=5"),
                         "override must look like key=value: '=5'", ConfigError);
    CHECK_THROWS_WITH_AS(apply_override(root, "a..b=1"),
                         "override path has an empty segment: 'a..b=1'",
                         ConfigError);
    root["steps"] = 5;
    CHECK_THROWS_WITH_AS(apply_override(root, "steps.a.b=1"),
                         "override path crosses a non-object: 'steps.a.b=1'",
                         ConfigError);
    // Crossing at the final segment is the same mistake.
    apply_override(root, "backend=oracle");
    CHECK_THROWS_WITH_AS(apply_override(root, "backend.label=a"),
                         "override path crosses a non-object: 'backend.label=a'",
                         ConfigError);
  }
}

TEST_CASE("parse_app_config fills defaults for a minimal document") {
  AppConfig app = parse_app_config(minimal_doc());

  CHECK(app.dataset.path == "data.jsonl");
  CHECK(app.dataset.format == DatasetFormat::jsonl);
  CHECK_FALSE(app.dataset.labels_path.has_value());
  CHECK_FALSE(app.dataset.train_n.has_value());
  CHECK_FALSE(app.dataset.test_n.has_value());

  CHECK(app.runner.algorithm == Algorithm::explorative);
  CHECK(app.runner.p_keep == doctest::Approx(0.1));
  CHECK(app.runner.k == 8);
  CHECK(app.runner.selection == SelectionStrategy::uniform);
  CHECK(app.runner.downsample == DownsampleStrategy::unbiased);
  CHECK_FALSE(app.runner.admission.has_value());
  CHECK(app.runner.reward_mode.kind == RewardKind::standard);
  CHECK(app.runner.reward_mode.p_flip == doctest::Approx(0.0));
  CHECK(app.runner.budget.window_tokens == 4096);
  CHECK(app.runner.budget.overhead_tokens == 0);
  CHECK(app.runner.steps == 0);
  CHECK(app.runner.eval_every == 500);
  CHECK(app.runner.train_window == 256);
  CHECK(app.runner.eval_concurrency == 1);
  CHECK(app.runner.seed == 0);
  CHECK(app.runner.task.empty());

  PromptTemplate defaults;
  CHECK(app.runner.tmpl.dialect == ChatDialect::llama);
  CHECK(app.runner.tmpl.system_icl == defaults.system_icl);
  CHECK(app.runner.tmpl.system_icrl == defaults.system_icrl);
  CHECK(app.runner.tmpl.query_prefix == defaults.query_prefix);
  CHECK(app.runner.tmpl.answer_prefix == defaults.answer_prefix);

  CHECK(app.tokenizer == "whitespace");
  CHECK(app.backend.kind == "oracle");
  CHECK(app.backend.epsilon == doctest::Approx(0.05));
  CHECK(app.backend.remote.max_tokens == 16);
  CHECK(app.backend.remote.max_attempts == 3);
  CHECK(app.backend.remote.backoff_seconds == doctest::Approx(0.5));
  CHECK(app.backend.remote.timeout_seconds == 60);
  CHECK_FALSE(app.backend.remote.guided_choice);
  CHECK(app.backend.remote.on_invalid == InvalidCompletionPolicy::resample_once);
}

TEST_CASE("parse_app_config reads every section") {
  json doc = json::parse(R"({
    "dataset": {"path": "banking.csv", "format": "csv",
                "labels_path": "labels.txt", "train_n": 500, "test_n": 100},
    "algorithm": "naive",
    "p_keep": 0.35,
    "k": 4,
    "selection": "exact",
    "downsample": "end_biased",
    "admission": "negative_only",
    "reward": {"kind": "noisy", "p_flip": 0.25},
    "budget": {"window_tokens": 2048, "overhead_tokens": 64},
    "steps": 100,
    "eval_every": 10,
    "train_window": 32,
    "eval_concurrency": 4,
    "seed": 7,
    "task": "banking",
    "tokenizer": "byte",
    "prompt": {"dialect": "phi", "system_icl": "Sys A", "system_icrl": "Sys B",
               "query_prefix": "Q: ", "answer_prefix": "A:"},
    "backend": {"kind": "frequency_learner", "epsilon": 0.25}
  })");
  AppConfig app = parse_app_config(doc);

  CHECK(app.dataset.path == "banking.csv");
  CHECK(app.dataset.format == DatasetFormat::csv);
  CHECK(app.dataset.labels_path == "labels.txt");
  CHECK(app.dataset.train_n == 500);
  CHECK(app.dataset.test_n == 100);
  CHECK(app.runner.algorithm == Algorithm::naive);
  CHECK(app.runner.p_keep == doctest::Approx(0.35));
  CHECK(app.runner.k == 4);
  CHECK(app.runner.selection == SelectionStrategy::exact);
  CHECK(app.runner.downsample == DownsampleStrategy::end_biased);
  REQUIRE(app.runner.admission.has_value());
  CHECK(*app.runner.admission == BufferAdmission::negative_only);
  CHECK(app.runner.reward_mode.kind == RewardKind::noisy);
  CHECK(app.runner.reward_mode.p_flip == doctest::Approx(0.25));
  CHECK(app.runner.budget.window_tokens == 2048);
  CHECK(app.runner.budget.overhead_tokens == 64);
  CHECK(app.runner.steps == 100);
  CHECK(app.runner.eval_every == 10);
  CHECK(app.runner.train_window == 32);
  CHECK(app.runner.eval_concurrency == 4);
  CHECK(app.runner.seed == 7);
  CHECK(app.runner.task == "banking");
  CHECK(app.tokenizer == "byte");
  CHECK(app.runner.tmpl.dialect == ChatDialect::phi);
  CHECK(app.runner.tmpl.system_icl == "Sys A");
  CHECK(app.runner.tmpl.system_icrl == "Sys B");
  CHECK(app.runner.tmpl.query_prefix == "Q: ");
  CHECK(app.runner.tmpl.answer_prefix == "A:");
  CHECK(app.backend.kind == "frequency_learner");
  CHECK(app.backend.epsilon == doctest::Approx(0.25));
}

TEST_CASE("parse_app_config collects every problem into one error") {
  json doc = json::parse(R"({
    "dataset": {"path": 7, "bogus": 1},
    "algorithm": "zigzag",
    "k": -3,
    "reward": {"p_flip": "lots"},
    "tokenizer": "gpt2",
    "frobnicate": true
  })");
  std::string msg = parse_failure(doc);

  CHECK(msg.rfind("configuration invalid:", 0) == 0);
  CHECK(msg.find("  - dataset.path: expected a string") != std::string::npos);
  CHECK(msg.find("  - dataset.path is required") != std::string::npos);
  CHECK(msg.find("  - unknown key 'dataset.bogus'") != std::string::npos);
  CHECK(msg.find("  - algorithm: unknown algorithm 'zigzag'") != std::string::npos);
  CHECK(msg.find("  - k: expected a non-negative integer") != std::string::npos);
  CHECK(msg.find("  - reward.p_flip: expected a number") != std::string::npos);
  CHECK(msg.find("  - tokenizer: expected 'whitespace' or 'byte', got 'gpt2'") !=
        std::string::npos);
  CHECK(msg.find("  - unknown key 'frobnicate'") != std::string::npos);
}

TEST_CASE("parse_app_config enforces per-backend requirements") {
  json doc = minimal_doc();

  SUBCASE("unknown backend kind") {
    doc["backend"] = json{{"kind", "zeus"}};
    CHECK(parse_failure(doc).find("backend.kind: unknown backend 'zeus'") !=
          std::string::npos);
  }

  SUBCASE("constant needs a label") {
    doc["backend"] = json{{"kind", "constant"}};
    CHECK(parse_failure(doc).find(
              "backend.label is required for the constant backend") !=
          std::string::npos);
  }

  SUBCASE("scripted needs at least one script") {
    doc["backend"] = json{{"kind", "scripted"}};
    CHECK(parse_failure(doc).find(
              "backend.train or backend.eval is required for scripted") !=
          std::string::npos);
    doc["backend"]["eval"] = json::array({"a"});
    CHECK_NOTHROW((void)parse_app_config(doc));
  }

  SUBCASE("frequency learner epsilon range") {
    doc["backend"] = json{{"kind", "frequency_learner"}, {"epsilon", 1.5}};
    CHECK(parse_failure(doc).find("backend.epsilon must lie in [0, 1]") !=
          std::string::npos);
  }

  SUBCASE("remote_chat requires endpoint, model, and sane retries") {
    EnvGuard endpoint("ICRL_ENDPOINT", nullptr);
    doc["backend"] = json::parse(R"({"kind": "remote_chat", "max_attempts": 0})");
    std::string msg = parse_failure(doc);
    CHECK(msg.find("backend.endpoint is required for remote_chat (or set "
                   "ICRL_ENDPOINT)") != std::string::npos);
    CHECK(msg.find("backend.model is required for remote_chat") !=
          std::string::npos);
    CHECK(msg.find("backend.max_attempts must be >= 1") != std::string::npos);
  }
}

TEST_CASE("remote_chat falls back to the standard environment variables") {
  json doc = minimal_doc();
  doc["backend"] = json{{"kind", "remote_chat"}, {"model", "m"}};

  SUBCASE("endpoint and api key come from the environment when omitted") {
    EnvGuard endpoint("ICRL_ENDPOINT", "http://env-host:8000");
    EnvGuard key("ICRL_API_KEY", "sk-env");
    AppConfig app = parse_app_config(doc);
    CHECK(app.backend.remote.endpoint == "http://env-host:8000");
    CHECK(app.backend.remote.api_key == "sk-env");
  }

  SUBCASE("explicit values win over the environment") {
    EnvGuard endpoint("ICRL_ENDPOINT", "http://env-host:8000");
    EnvGuard key("ICRL_API_KEY", "sk-env");
    doc["backend"]["endpoint"] = "http://explicit";
    doc["backend"]["api_key"] = "sk-explicit";
    AppConfig app = parse_app_config(doc);
    CHECK(app.backend.remote.endpoint == "http://explicit");
    CHECK(app.backend.remote.api_key == "sk-explicit");
  }

  SUBCASE("a missing api key stays empty rather than erroring") {
    EnvGuard endpoint("ICRL_ENDPOINT", "http://env-host:8000");
    EnvGuard key("ICRL_API_KEY", nullptr);
    AppConfig app = parse_app_config(doc);
    CHECK(app.backend.remote.api_key.empty());
  }
}

TEST_CASE("parse_app_config folds runner validation into the same bullets") {
  json doc = minimal_doc();
  doc["algorithm"] = "approximate";
  doc["p_keep"] = json::parse("1.5");
  doc["k"] = json::parse("0");
  std::string msg = parse_failure(doc);

  CHECK(msg.rfind("configuration invalid:", 0) == 0);
  CHECK(msg.find("  - p_keep must lie in [0, 1]") != std::string::npos);
  CHECK(msg.find("  - K must be >= 1") != std::string::npos);
  // The runner's own bullet-list header must not leak through.
  CHECK(msg.find("invalid run configuration") == std::string::npos);
}

TEST_CASE("parse errors suppress the validation pass") {
  json doc;
  doc["dataset"] = json::object();  // no path
  doc["p_keep"] = 7.0;
  std::string msg = parse_failure(doc);
  CHECK(msg.find("dataset.path is required") != std::string::npos);
  CHECK(msg.find("p_keep must lie in [0, 1]") == std::string::npos);
}

TEST_CASE("load_config reads, overrides, and remembers the effective document") {
  TempDir dir;

  SUBCASE("missing and malformed files") {
    CHECK_THROWS_WITH_AS(
        (void)load_config(dir.str("absent.json"), {}),
        ("cannot open config file: " + dir.str("absent.json")).c_str(),
        ConfigError);
    spit(dir.str("broken.json"), "{not json");
    CHECK_THROWS_WITH_AS(
        (void)load_config(dir.str("broken.json"), {}),
        ("config file is not valid JSON: " + dir.str("broken.json")).c_str(),
        ConfigError);
  }

  SUBCASE("overrides mutate both the parsed config and the effective JSON") {
    json doc = minimal_doc();
    doc["backend"] = json{{"kind", "oracle"}};
    spit(dir.str("run.json"), doc.dump());
    LoadedConfig loaded = load_config(
        dir.str("run.json"), {"seed=42", "backend=constant", "backend.label=a"});
    CHECK(loaded.config.runner.seed == 42);
    CHECK(loaded.config.backend.kind == "constant");
    CHECK(loaded.config.backend.label == "a");
    CHECK(loaded.effective["seed"] == json(42));
    CHECK(loaded.effective["backend"]["kind"] == json("constant"));
    CHECK(loaded.effective["backend"]["label"] == json("a"));
  }

  SUBCASE("effective keeps ${ENV} references while the config interpolates") {
    EnvGuard secret("ICRL_TEST_SECRET", "s3cret-value");
    json doc = minimal_doc();
    doc["backend"] = json{{"kind", "remote_chat"},
                          {"endpoint", "http://h"},
                          {"model", "m"},
                          {"api_key", "${ICRL_TEST_SECRET}"}};
    spit(dir.str("remote.json"), doc.dump());
    LoadedConfig loaded = load_config(dir.str("remote.json"), {});
    CHECK(loaded.config.backend.remote.api_key == "s3cret-value");
    CHECK(loaded.effective["backend"]["api_key"] == json("${ICRL_TEST_SECRET}"));
  }
}

TEST_CASE("snapshot_json renders sorted two-space JSON and redacts secrets") {
  CHECK(std::string(kRedactedMarker) == "<redacted>");

  SUBCASE("exact bytes, literal key redacted") {
    json effective = json::parse(
        R"({"seed": 7, "backend": {"kind": "remote_chat", "api_key": "sk-live-123"}})");
    std::string expected =
        "{\n"
        "  \"backend\": {\n"
        "    \"api_key\": \"<redacted>\",\n"
        "    \"kind\": \"remote_chat\"\n"
        "  },\n"
        "  \"seed\": 7\n"
        "}\n";
    std::string out = snapshot_json(effective);
    CHECK(out == expected);
    CHECK(out.find("sk-live-123") == std::string::npos);
  }

  SUBCASE("environment references are not secrets and stay verbatim") {
    json effective = json::parse(
        R"({"backend": {"api_key": "${ICRL_API_KEY}"}})");
    CHECK(snapshot_json(effective).find("\"${ICRL_API_KEY}\"") !=
          std::string::npos);
  }

  SUBCASE("an empty key and a backend-free document pass through") {
    json with_empty = json::parse(R"({"backend": {"api_key": ""}})");
    CHECK(snapshot_json(with_empty).find("\"api_key\": \"\"") !=
          std::string::npos);
    json bare = json::parse(R"({"seed": 1})");
    CHECK(snapshot_json(bare) == "{\n  \"seed\": 1\n}\n");
  }
}

TEST_CASE("make_backend maps kinds to implementations") {
  BackendConfig cfg;

  cfg.kind = "oracle";
  CHECK(make_backend(cfg)->name() == "oracle");

  cfg.kind = "constant";
  cfg.label = "alarm";
  auto constant = make_backend(cfg);
  CHECK(constant->name() == "constant");
  CHECK_FALSE(constant->is_remote());

  cfg.kind = "parrot_last_positive";
  CHECK(make_backend(cfg)->name() == "parrot_last_positive");

  cfg.kind = "frequency_learner";
  cfg.epsilon = 0.1;
  CHECK(make_backend(cfg)->name() == "frequency_learner");

  cfg.kind = "scripted";
  cfg.train_script = {"a", "b"};
  CHECK(make_backend(cfg)->name() == "scripted");

  cfg.kind = "zeus";
  CHECK_THROWS_WITH_AS((void)make_backend(cfg), "unknown backend kind 'zeus'",
                       ConfigError);
}

TEST_CASE("make_backend routes remote_chat through a supplied transport") {
  BackendConfig cfg;
  cfg.kind = "remote_chat";
  cfg.remote.endpoint = "http://example.invalid";
  cfg.remote.model = "test-model";
  cfg.remote.max_attempts = 1;
  cfg.remote.backoff_seconds = 0.0;

  json body;
  body["choices"] =
      json::array({json{{"message", json{{"content", " alarm"}}}}});
  auto transport = std::make_shared<ScriptedTransport>(
      std::vector<HttpResponse>{{200, body.dump()}});

  auto backend = make_backend(cfg, transport);
  REQUIRE(backend->name() == "remote_chat");
  CHECK(backend->is_remote());

  LabelSpace labels{{"alarm", "calendar"}, "toy"};
  PredictionRequest req;
  req.example.id = "q";
  req.example.query = "wake me up";
  req.example.gold_label = "alarm";
  req.labels = &labels;
  req.step = 1;
  RngStream rng(1);
  PredictionResult r = backend->predict(req, rng);
  CHECK(r.label == "alarm");
  REQUIRE(transport->paths.size() == 1);
  CHECK(transport->paths[0] == "/v1/chat/completions");
}

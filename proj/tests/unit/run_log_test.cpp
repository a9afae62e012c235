#include <doctest.h>

#include <json.hpp>

#include "icrl/errors.hpp"
#include "icrl/run_log.hpp"
#include "support/helpers.hpp"

using namespace icrl;
using icrl::testing::TempDir;
using icrl::testing::slurp;
using icrl::testing::spit;
using nlohmann::json;

namespace {

RunHeader sample_header() {
  RunHeader h;
  h.algorithm = "explorative";
  h.backend = "oracle";
  h.dialect = "llama";
  h.mode = "icrl";
  h.tokenizer = "whitespace";
  h.seed = 42;
  h.window_tokens = 4096;
  h.overhead_tokens = 64;
  h.task = "toy";
  h.train_size = 100;
  h.test_size = 20;
  h.steps_planned = 10;
  h.eval_every = 5;
  h.train_window = 256;
  h.label_space = {"a", "b"};
  return h;
}

StepEvent sample_step() {
  StepEvent e;
  e.t = 3;
  e.example_id = "ex-7";
  e.ctx = {1, 2};
  e.prompt_hash = "0123456789abcdef";
  e.prompt_tokens = 120;
  e.prediction = "a";
  e.raw_text = " a";
  e.completion_tokens = 1;
  e.reward_true = 1;
  e.reward_obs = 1;
  e.reward_observed = true;
  e.admitted = true;
  return e;
}

}  // namespace

TEST_CASE("json lines are canonical and keep conditional fields sparse") {
  // Sorted keys, no whitespace: string equality is byte equality.
  std::string line = to_json_line(sample_header());
  CHECK(line.find(' ') == std::string::npos);
  json h = json::parse(line);
  CHECK(h["schema"] == "icrl.runlog");
  CHECK(h["version"] == 1);
  CHECK(h["label_space"] == json({"a", "b"}));

  StepEvent step = sample_step();
  json full = json::parse(to_json_line(step));
  CHECK(full["type"] == "step");
  CHECK(full["reward_obs"] == 1);
  CHECK_FALSE(full.contains("ctx_index"));
  CHECK_FALSE(full.contains("invalid"));
  CHECK_FALSE(full.contains("resampled"));
  CHECK_FALSE(full.contains("fallback_used"));

  step.ctx_index = 5;
  step.reward_observed = false;
  step.invalid = true;
  step.resampled = true;
  step.fallback_used = true;
  json sparse = json::parse(to_json_line(step));
  CHECK(sparse["ctx_index"] == 5);
  CHECK_FALSE(sparse.contains("reward_obs"));  // only meaningful when observed
  CHECK(sparse["invalid"] == true);
  CHECK(sparse["resampled"] == true);
  CHECK(sparse["fallback_used"] == true);

  EvalEvent ev;
  ev.t = 5;
  ev.accuracy = 0.75;
  ev.predictions = {"a", "b"};
  json clean = json::parse(to_json_line(ev));
  CHECK_FALSE(clean.contains("incomplete"));
  CHECK_FALSE(clean.contains("missing_ids"));
  ev.incomplete = true;
  ev.missing_ids = {"ex-9"};
  json partial = json::parse(to_json_line(ev));
  CHECK(partial["incomplete"] == true);
  CHECK(partial["missing_ids"] == json({"ex-9"}));

  WarningEvent w{7, "window_saturated", "context no longer grows"};
  json warning = json::parse(to_json_line(w));
  CHECK(warning["type"] == "warning");
  CHECK(warning["code"] == "window_saturated");
}

TEST_CASE("writer requires the header and round-trips through the reader") {
  TempDir dir;
  const std::string path = dir.str("runlog.jsonl");

  RunLogWriter writer(path);
  StepEvent step = sample_step();
  CHECK_THROWS_AS(writer.append(step), ContractViolation);

  RunHeader header = sample_header();
  writer.begin(header);
  CHECK_THROWS_AS(writer.begin(header), ContractViolation);

  step.ctx_index = 2;
  writer.append(step);
  EvalEvent ev;
  ev.t = 5;
  ev.accuracy = 0.5;
  ev.predictions = {"a", "b", "a"};
  writer.append(ev);
  WarningEvent warn{6, "code", "message"};
  writer.append(warn);

  RunLog log = read_run_log(path);
  CHECK(to_json_line(log.header) == to_json_line(header));
  REQUIRE(log.steps.size() == 1);
  CHECK(to_json_line(log.steps[0]) == to_json_line(step));
  CHECK(log.steps[0].ctx == std::vector<std::uint64_t>{1, 2});
  CHECK(log.steps[0].ctx_index == 2);
  CHECK(log.steps[0].reward_obs == 1);
  REQUIRE(log.evals.size() == 1);
  CHECK(to_json_line(log.evals[0]) == to_json_line(ev));
  REQUIRE(log.warnings.size() == 1);
  CHECK(log.warnings[0].code == "code");

  // Unwritable location fails up front.
  CHECK_THROWS_AS(RunLogWriter(dir.str("no/such/dir/log.jsonl")), ConfigError);
}

TEST_CASE("reader rejects damaged logs with the line position") {
  TempDir dir;
  const std::string path = dir.str("runlog.jsonl");
  const std::string header_line = to_json_line(sample_header());
  const std::string step_line = to_json_line(sample_step());

  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)read_run_log(dir.str("absent.jsonl")), IntegrityError);
  }
  SUBCASE("empty file") {
    spit(path, "");
    CHECK_THROWS_AS((void)read_run_log(path), IntegrityError);
  }
  SUBCASE("truncated final line") {
    spit(path, header_line + "\n" + step_line.substr(0, step_line.size() / 2));
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("truncated final line"),
                         IntegrityError);
  }
  SUBCASE("invalid json names the line") {
    spit(path, header_line + "\n{nope\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path), doctest::Contains(":2:"),
                         IntegrityError);
  }
  SUBCASE("blank line") {
    spit(path, header_line + "\n\n" + step_line + "\n");
    CHECK_THROWS_AS((void)read_run_log(path), IntegrityError);
  }
  SUBCASE("wrong schema") {
    json j = json::parse(header_line);
    j["schema"] = "other.format";
    spit(path, j.dump() + "\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("unknown schema"), IntegrityError);
  }
  SUBCASE("unsupported version") {
    json j = json::parse(header_line);
    j["version"] = 2;
    spit(path, j.dump() + "\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("unsupported version"), IntegrityError);
  }
  SUBCASE("missing header field") {
    json j = json::parse(header_line);
    j.erase("seed");
    spit(path, j.dump() + "\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("missing field 'seed'"), IntegrityError);
  }
  SUBCASE("field of the wrong type") {
    json j = json::parse(step_line);
    j["prompt_tokens"] = "many";
    spit(path, header_line + "\n" + j.dump() + "\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("bad field 'prompt_tokens'"),
                         IntegrityError);
  }
  SUBCASE("unknown event type") {
    spit(path, header_line + "\n" + R"({"type":"checkpoint","t":1})" + "\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("unknown event type"), IntegrityError);
  }
  SUBCASE("observed reward requires reward_obs") {
    json j = json::parse(step_line);
    j.erase("reward_obs");
    spit(path, header_line + "\n" + j.dump() + "\n");
    CHECK_THROWS_WITH_AS((void)read_run_log(path),
                         doctest::Contains("missing field 'reward_obs'"),
                         IntegrityError);
  }
}

TEST_CASE("interrupted writes leave a readable prefix") {
  TempDir dir;
  const std::string path = dir.str("runlog.jsonl");
  {
    RunLogWriter writer(path);
    writer.begin(sample_header());
    StepEvent step = sample_step();
    for (std::uint64_t t = 1; t <= 3; ++t) {
      step.t = t;
      writer.append(step);
    }
    // Writer goes out of scope mid-run; every line was flushed.
  }
  RunLog log = read_run_log(path);
  CHECK(log.steps.size() == 3);
  CHECK(log.evals.empty());

  // Appending the file manually with half a line breaks it again.
  spit(path, slurp(path) + R"({"type":"step")");
  CHECK_THROWS_AS((void)read_run_log(path), IntegrityError);
}

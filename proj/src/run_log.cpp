#include "icrl/run_log.hpp"

#include <iterator>

#include <json.hpp>

#include "icrl/errors.hpp"

namespace icrl {

namespace {

using nlohmann::json;

// json's object keeps keys sorted, so dump() is already canonical.

json to_json(const RunHeader& h) {
  return json{{"schema", h.schema},
              {"version", h.version},
              {"algorithm", h.algorithm},
              {"backend", h.backend},
              {"dialect", h.dialect},
              {"mode", h.mode},
              {"tokenizer", h.tokenizer},
              {"seed", h.seed},
              {"window_tokens", h.window_tokens},
              {"overhead_tokens", h.overhead_tokens},
              {"task", h.task},
              {"train_size", h.train_size},
              {"test_size", h.test_size},
              {"steps_planned", h.steps_planned},
              {"eval_every", h.eval_every},
              {"train_window", h.train_window},
              {"label_space", h.label_space}};
}

json to_json(const StepEvent& e) {
  json j{{"type", "step"},
         {"t", e.t},
         {"example_id", e.example_id},
         {"ctx", e.ctx},
         {"prompt_hash", e.prompt_hash},
         {"prompt_tokens", e.prompt_tokens},
         {"prediction", e.prediction},
         {"raw_text", e.raw_text},
         {"completion_tokens", e.completion_tokens},
         {"reward_true", e.reward_true},
         {"reward_observed", e.reward_observed},
         {"admitted", e.admitted}};
  if (e.ctx_index.has_value()) j["ctx_index"] = *e.ctx_index;
  if (e.reward_observed) j["reward_obs"] = e.reward_obs;
  if (e.invalid) j["invalid"] = true;
  if (e.resampled) j["resampled"] = true;
  if (e.fallback_used) j["fallback_used"] = true;
  return j;
}

json to_json(const EvalEvent& e) {
  json j{{"type", "eval"},
         {"t", e.t},
         {"accuracy", e.accuracy},
         {"predictions", e.predictions}};
  if (e.incomplete) {
    j["incomplete"] = true;
    j["missing_ids"] = e.missing_ids;
  }
  return j;
}

json to_json(const WarningEvent& e) {
  return json{{"type", "warning"}, {"t", e.t}, {"code", e.code}, {"message", e.message}};
}

template <typename T>
T get_or_throw(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw IntegrityError("run log " + where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IntegrityError("run log " + where + ": bad field '" + key + "': " + e.what());
  }
}

RunHeader header_from_json(const json& j, const std::string& where) {
  RunHeader h;
  h.schema = get_or_throw<std::string>(j, "schema", where);
  h.version = get_or_throw<int>(j, "version", where);
  if (h.schema != "icrl.runlog") {
    throw IntegrityError("run log " + where + ": unknown schema '" + h.schema + "'");
  }
  if (h.version != 1) {
    throw IntegrityError("run log " + where + ": unsupported version " +
                         std::to_string(h.version));
  }
  h.algorithm = get_or_throw<std::string>(j, "algorithm", where);
  h.backend = get_or_throw<std::string>(j, "backend", where);
  h.dialect = get_or_throw<std::string>(j, "dialect", where);
  h.mode = get_or_throw<std::string>(j, "mode", where);
  h.tokenizer = get_or_throw<std::string>(j, "tokenizer", where);
  h.seed = get_or_throw<std::uint64_t>(j, "seed", where);
  h.window_tokens = get_or_throw<std::size_t>(j, "window_tokens", where);
  h.overhead_tokens = get_or_throw<std::size_t>(j, "overhead_tokens", where);
  h.task = get_or_throw<std::string>(j, "task", where);
  h.train_size = get_or_throw<std::size_t>(j, "train_size", where);
  h.test_size = get_or_throw<std::size_t>(j, "test_size", where);
  h.steps_planned = get_or_throw<std::size_t>(j, "steps_planned", where);
  h.eval_every = get_or_throw<std::size_t>(j, "eval_every", where);
  h.train_window = get_or_throw<std::size_t>(j, "train_window", where);
  h.label_space = get_or_throw<std::vector<std::string>>(j, "label_space", where);
  return h;
}

StepEvent step_from_json(const json& j, const std::string& where) {
  StepEvent e;
  e.t = get_or_throw<std::uint64_t>(j, "t", where);
  e.example_id = get_or_throw<std::string>(j, "example_id", where);
  e.ctx = get_or_throw<std::vector<std::uint64_t>>(j, "ctx", where);
  if (j.contains("ctx_index")) e.ctx_index = j.at("ctx_index").get<std::size_t>();
  e.prompt_hash = get_or_throw<std::string>(j, "prompt_hash", where);
  e.prompt_tokens = get_or_throw<std::size_t>(j, "prompt_tokens", where);
  e.prediction = get_or_throw<std::string>(j, "prediction", where);
  e.raw_text = get_or_throw<std::string>(j, "raw_text", where);
  e.completion_tokens = get_or_throw<std::size_t>(j, "completion_tokens", where);
  e.reward_true = get_or_throw<int>(j, "reward_true", where);
  e.reward_observed = get_or_throw<bool>(j, "reward_observed", where);
  if (e.reward_observed) e.reward_obs = get_or_throw<int>(j, "reward_obs", where);
  e.admitted = get_or_throw<bool>(j, "admitted", where);
  e.invalid = j.value("invalid", false);
  e.resampled = j.value("resampled", false);
  e.fallback_used = j.value("fallback_used", false);
  return e;
}

EvalEvent eval_from_json(const json& j, const std::string& where) {
  EvalEvent e;
  e.t = get_or_throw<std::uint64_t>(j, "t", where);
  e.accuracy = get_or_throw<double>(j, "accuracy", where);
  e.predictions = get_or_throw<std::vector<std::string>>(j, "predictions", where);
  e.incomplete = j.value("incomplete", false);
  if (e.incomplete) {
    e.missing_ids = get_or_throw<std::vector<std::string>>(j, "missing_ids", where);
  }
  return e;
}

WarningEvent warning_from_json(const json& j, const std::string& where) {
  WarningEvent e;
  e.t = get_or_throw<std::uint64_t>(j, "t", where);
  e.code = get_or_throw<std::string>(j, "code", where);
  e.message = get_or_throw<std::string>(j, "message", where);
  return e;
}

}  // namespace

std::string to_json_line(const RunHeader& h) { return to_json(h).dump(); }
std::string to_json_line(const StepEvent& e) { return to_json(e).dump(); }
std::string to_json_line(const EvalEvent& e) { return to_json(e).dump(); }
std::string to_json_line(const WarningEvent& e) { return to_json(e).dump(); }

RunLogWriter::RunLogWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) throw ConfigError("cannot open run log for writing: " + path);
}

void RunLogWriter::begin(const RunHeader& header) {
  if (started_) throw ContractViolation("run log already has a header");
  started_ = true;
  write_line(to_json_line(header));
}

void RunLogWriter::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw IntegrityError("short write to run log: " + path_);
}

void RunLogWriter::append(const StepEvent& e) {
  if (!started_) throw ContractViolation("run log header not written yet");
  write_line(to_json_line(e));
}
void RunLogWriter::append(const EvalEvent& e) {
  if (!started_) throw ContractViolation("run log header not written yet");
  write_line(to_json_line(e));
}
void RunLogWriter::append(const WarningEvent& e) {
  if (!started_) throw ContractViolation("run log header not written yet");
  write_line(to_json_line(e));
}

RunLog read_run_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open run log: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (data.empty()) throw IntegrityError("run log " + path + ": no header line");
  if (data.back() != '\n') {
    throw IntegrityError("run log " + path + ": truncated final line");
  }

  RunLog log;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t nl = data.find('\n', pos);
    std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    if (line.empty()) throw IntegrityError("run log " + where + ": empty line");
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw IntegrityError("run log " + where + ": invalid JSON");
    }
    if (!have_header) {
      log.header = header_from_json(j, where);
      have_header = true;
      continue;
    }
    const std::string type = get_or_throw<std::string>(j, "type", where);
    if (type == "step") {
      log.steps.push_back(step_from_json(j, where));
    } else if (type == "eval") {
      log.evals.push_back(eval_from_json(j, where));
    } else if (type == "warning") {
      log.warnings.push_back(warning_from_json(j, where));
    } else {
      throw IntegrityError("run log " + where + ": unknown event type '" + type + "'");
    }
  }
  if (!have_header) throw IntegrityError("run log " + path + ": no header line");
  return log;
}

}  // namespace icrl

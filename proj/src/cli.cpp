#include "icrl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "icrl/capacity.hpp"
#include "icrl/config.hpp"
#include "icrl/dataset.hpp"
#include "icrl/errors.hpp"
#include "icrl/metrics.hpp"
#include "icrl/run_log.hpp"
#include "icrl/runner.hpp"
#include "icrl/tokenizer.hpp"

namespace icrl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

LoadedConfig load_with_seed(const CommonArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  // A --seed flag is sugar for one more override, so it lands in the
  // snapshot like any other setting.
  if (args.seed.has_value()) {
    overrides.push_back("seed=" + std::to_string(*args.seed));
  }
  return load_config(args.config_path, overrides);
}

struct LoadedData {
  DatasetSplit split;
  LabelSpace labels;
};

LoadedData load_data(const AppConfig& app) {
  std::optional<fs::path> labels_path;
  if (app.dataset.labels_path.has_value()) labels_path = *app.dataset.labels_path;
  auto [examples, labels] =
      load_dataset(app.dataset.path, app.dataset.format, labels_path);
  DatasetSplit split = make_split(examples, app.dataset.train_n,
                                  app.dataset.test_n, app.runner.seed);
  return {std::move(split), std::move(labels)};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out << bytes;
  if (!out) throw IntegrityError("short write: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json_file(const fs::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) {
    throw IntegrityError("not valid JSON: " + path.string());
  }
  return doc;
}

// The snapshot is parsed for dataset/prompt/tokenizer settings only; the
// backend is swapped for a mock so analysis never needs endpoint secrets.
AppConfig parse_snapshot_for_analysis(const fs::path& run_dir) {
  json snapshot = read_json_file(run_dir / "config.json");
  snapshot["backend"] = json{{"kind", "oracle"}};
  return parse_app_config(snapshot);
}

void check_label_space(const LabelSpace& labels, const RunHeader& header) {
  if (labels.labels != header.label_space) {
    throw IntegrityError(
        "dataset label space no longer matches the run log header");
  }
}

void write_confusion_csv(const fs::path& path, const Confusion& confusion) {
  std::ostringstream out;
  out << "predicted\\true";
  for (const std::string& label : confusion.labels) out << ',' << label;
  out << '\n';
  for (std::size_t p = 0; p < confusion.labels.size(); ++p) {
    out << confusion.labels[p];
    for (std::size_t g = 0; g < confusion.labels.size(); ++g) {
      out << ',' << confusion.counts[p][g];
    }
    out << '\n';
  }
  write_file(path, out.str());
}

void write_per_context_csv(const fs::path& path,
                           const std::vector<ContextSlotSeries>& slots) {
  std::ostringstream out;
  out << "t,ctx_index,hit_rate,accuracy\n";
  for (const ContextSlotSeries& slot : slots) {
    std::size_t acc_cursor = 0;
    for (const AccuracyPoint& hit : slot.hit_rate) {
      out << hit.t << ',' << slot.ctx_index << ',' << format_double(hit.accuracy)
          << ',';
      if (acc_cursor < slot.accuracy.size() &&
          slot.accuracy[acc_cursor].t == hit.t) {
        out << format_double(slot.accuracy[acc_cursor].accuracy);
        ++acc_cursor;
      }
      out << '\n';
    }
  }
  write_file(path, out.str());
}

// Everything derivable from the log: summary + curve CSVs, shared by run,
// report and replay so the bytes cannot drift between commands.
RunSummary write_analysis(const fs::path& dir, const RunLog& log,
                          const DatasetSplit& split, const LabelSpace& labels,
                          const Tokenizer& tok, const PromptTemplate& tmpl,
                          bool full_report) {
  DatasetIndex index(split);
  TokenAccount tokens = account_tokens(log, index, tok, tmpl);
  RunSummary summary = summarize(log, tokens);

  write_summary_json((dir / "summary.json").string(), summary);
  write_regret_csv((dir / "regret.csv").string(), compute_regret(log.steps));
  const std::size_t window =
      log.header.train_window > 0 ? log.header.train_window : 256;
  write_accuracy_csv((dir / "train_accuracy.csv").string(),
                     running_train_accuracy(log.steps, window));
  write_accuracy_csv((dir / "test_accuracy.csv").string(), summary.eval_accuracy);

  if (full_report) {
    if (!log.steps.empty()) {
      write_confusion_csv(dir / "confusion.csv",
                          train_confusion(log.steps, index, labels));
    }
    if (!summary.per_context.empty()) {
      write_per_context_csv(dir / "per_context.csv", summary.per_context);
    }
  }
  return summary;
}

void print_summary_line(std::ostream& out, const RunSummary& summary) {
  out << summary.algorithm << " x " << summary.backend << " on " << summary.task
      << ": " << summary.steps << " steps, final regret "
      << format_double(summary.final_regret);
  if (summary.final_accuracy.has_value()) {
    out << ", final test accuracy " << format_double(*summary.final_accuracy);
  }
  out << ", processed tokens " << summary.tokens.processed_tokens_total << "\n";
  if (summary.truncated) out << "note: the log is truncated\n";
}

int cmd_run(const CommonArgs& common, const std::string& out_dir,
            std::ostream& out) {
  LoadedConfig loaded = load_with_seed(common);
  const fs::path dir(out_dir);
  if (fs::exists(dir / "runlog.jsonl")) {
    throw ConfigError("output directory already holds " +
                      (dir / "runlog.jsonl").string() +
                      "; use replay to verify or resume it");
  }
  fs::create_directories(dir);
  write_file(dir / "config.json", snapshot_json(loaded.effective));

  LoadedData data = load_data(loaded.config);
  write_split_manifest(data.split, dir / "split.jsonl");

  RunInputs inputs;
  inputs.split = std::move(data.split);
  inputs.labels = std::move(data.labels);
  inputs.tokenizer = make_tokenizer(loaded.config.tokenizer);
  inputs.backend = make_backend(loaded.config.backend);

  // Streams every event to disk as it happens; an abort below still leaves
  // a replayable prefix behind.
  RunLogWriter writer((dir / "runlog.jsonl").string());
  RunLog log = run_experiment(loaded.config.runner, inputs, &writer);

  RunSummary summary = write_analysis(dir, log, inputs.split, inputs.labels,
                                      *inputs.tokenizer,
                                      loaded.config.runner.tmpl, false);
  out << "run written to " << dir.string() << "\n";
  print_summary_line(out, summary);
  return kExitOk;
}

int cmd_capacity(const CommonArgs& common, std::ostream& out) {
  LoadedConfig loaded = load_with_seed(common);
  LoadedData data = load_data(loaded.config);
  auto tok = make_tokenizer(loaded.config.tokenizer);

  CapacityEstimate est = estimate_capacity(
      data.split.train, data.labels, *tok, loaded.config.runner.tmpl,
      loaded.config.runner.prompt_mode(), loaded.config.runner.budget);

  json doc;
  doc["episodes"] = est.episodes;
  doc["prompt_tokens"] = est.prompt_tokens;
  doc["window_tokens"] = est.window_tokens;
  doc["reserved_tokens"] = est.reserved_tokens;
  doc["chrome_tokens"] = est.chrome_tokens;
  doc["worst_episode_tokens"] = est.worst_episode_tokens;
  doc["worst_label"] = est.worst_label;
  doc["query_fits"] = est.query_fits;
  out << doc.dump(2) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& run_dir, std::ostream& out) {
  const fs::path dir(run_dir);
  AppConfig app = parse_snapshot_for_analysis(dir);
  LoadedData data = load_data(app);
  verify_split_manifest(data.split, dir / "split.jsonl");

  RunLog log = read_run_log((dir / "runlog.jsonl").string());
  check_label_space(data.labels, log.header);

  auto tok = make_tokenizer(app.tokenizer);
  RunSummary summary = write_analysis(dir, log, data.split, data.labels, *tok,
                                      app.runner.tmpl, true);
  out << "report written to " << dir.string() << "\n";
  print_summary_line(out, summary);
  return kExitOk;
}

struct CompareRow {
  std::string dir;
  std::string algorithm;
  std::string backend;
  std::optional<double> final_accuracy;
  double final_regret = 0.0;
  std::uint64_t tokens_processed = 0;
  double cache_ratio = 0.0;
};

void print_table(std::ostream& out,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      widths[i] = std::max(widths[i], row[i].size());
    }
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << "  ";
      if (i + 1 == row.size()) {
        out << row[i];  // no trailing padding
      } else {
        out << std::left << std::setw(static_cast<int>(widths[i])) << row[i];
      }
    }
    out << "\n";
  }
}

int cmd_compare(const std::vector<std::string>& dirs, std::ostream& out,
                std::ostream& err) {
  if (dirs.size() < 2) {
    throw ConfigError("compare needs at least two run directories");
  }

  std::vector<RunHeader> headers;
  std::vector<CompareRow> rows;
  for (const std::string& d : dirs) {
    const fs::path dir(d);
    RunLog log = read_run_log((dir / "runlog.jsonl").string());
    json summary = read_json_file(dir / "summary.json");

    CompareRow row;
    row.dir = d;
    row.algorithm = summary.value("algorithm", log.header.algorithm);
    row.backend = summary.value("backend", log.header.backend);
    if (summary.contains("final_accuracy")) {
      row.final_accuracy = summary["final_accuracy"].get<double>();
    }
    row.final_regret = summary.value("final_regret", 0.0);
    row.tokens_processed = summary.value("tokens_processed", std::uint64_t{0});
    if (summary.contains("tokens") && summary["tokens"].contains("cache_ratio")) {
      row.cache_ratio = summary["tokens"]["cache_ratio"].get<double>();
    }
    headers.push_back(std::move(log.header));
    rows.push_back(std::move(row));
  }

  const RunHeader& first = headers.front();
  for (std::size_t i = 1; i < headers.size(); ++i) {
    if (headers[i].label_space != first.label_space) {
      throw ConfigError("label spaces differ between '" + dirs[0] + "' and '" +
                        dirs[i] + "'; these runs are not comparable");
    }
    std::vector<std::string> drift;
    if (headers[i].task != first.task) drift.push_back("task");
    if (headers[i].train_size != first.train_size) drift.push_back("train_size");
    if (headers[i].test_size != first.test_size) drift.push_back("test_size");
    if (headers[i].seed != first.seed) drift.push_back("seed");
    if (!drift.empty()) {
      err << "warning: '" << dirs[i] << "' differs from '" << dirs[0] << "' in";
      for (const std::string& f : drift) err << " " << f;
      err << "; comparison may not be apples to apples\n";
    }
  }

  // Processed-token ratio against the cheapest run in the set.
  std::uint64_t min_processed = 0;
  for (const CompareRow& row : rows) {
    if (row.tokens_processed == 0) continue;
    if (min_processed == 0 || row.tokens_processed < min_processed) {
      min_processed = row.tokens_processed;
    }
  }

  std::vector<std::vector<std::string>> table;
  table.push_back({"dir", "algorithm", "backend", "final_accuracy",
                   "final_regret", "tokens_processed", "token_ratio",
                   "cache_ratio"});
  for (const CompareRow& row : rows) {
    std::string ratio = "-";
    if (min_processed > 0 && row.tokens_processed > 0) {
      ratio = format_double(static_cast<double>(row.tokens_processed) /
                            static_cast<double>(min_processed));
    }
    table.push_back({row.dir, row.algorithm, row.backend,
                     row.final_accuracy.has_value()
                         ? format_double(*row.final_accuracy)
                         : "-",
                     format_double(row.final_regret),
                     std::to_string(row.tokens_processed), ratio,
                     format_double(row.cache_ratio)});
  }
  print_table(out, table);

  const CompareRow* best_regret = &rows.front();
  for (const CompareRow& row : rows) {
    if (row.final_regret < best_regret->final_regret) best_regret = &row;
  }
  out << "lowest final regret: " << best_regret->dir << " ("
      << format_double(best_regret->final_regret) << ")\n";

  const CompareRow* best_accuracy = nullptr;
  for (const CompareRow& row : rows) {
    if (!row.final_accuracy.has_value()) continue;
    if (best_accuracy == nullptr ||
        *row.final_accuracy > *best_accuracy->final_accuracy) {
      best_accuracy = &row;
    }
  }
  if (best_accuracy != nullptr) {
    out << "highest final accuracy: " << best_accuracy->dir << " ("
        << format_double(*best_accuracy->final_accuracy) << ")\n";
  }
  return kExitOk;
}

int cmd_replay(const std::string& run_dir, const std::optional<std::string>& out_dir,
               std::ostream& out) {
  const fs::path src(run_dir);
  const std::string snapshot_bytes = read_file(src / "config.json");
  json snapshot = json::parse(snapshot_bytes, nullptr, false);
  if (snapshot.is_discarded()) {
    throw IntegrityError("not valid JSON: " + (src / "config.json").string());
  }
  // Full parse, backend included: a truncated log resumes live, which may
  // need the real endpoint.
  AppConfig app = parse_app_config(snapshot);

  LoadedData data = load_data(app);
  verify_split_manifest(data.split, src / "split.jsonl");

  RunLog stored = read_run_log((src / "runlog.jsonl").string());
  check_label_space(data.labels, stored.header);

  RunInputs inputs;
  inputs.split = std::move(data.split);
  inputs.labels = std::move(data.labels);
  inputs.tokenizer = make_tokenizer(app.tokenizer);
  inputs.backend = make_backend(app.backend);

  const std::size_t stored_steps = stored.steps.size();
  RunLog fresh;
  fs::path target = src;

  if (out_dir.has_value()) {
    target = fs::path(*out_dir);
    if (fs::exists(target / "runlog.jsonl")) {
      throw ConfigError("output directory already holds " +
                        (target / "runlog.jsonl").string());
    }
    fs::create_directories(target);
    write_file(target / "config.json", snapshot_bytes);
    write_split_manifest(inputs.split, target / "split.jsonl");
    RunLogWriter writer((target / "runlog.jsonl").string());
    fresh = replay_experiment(app.runner, inputs, stored, &writer);
  } else {
    // Regenerate next to the original and swap in only on success, so a
    // failed replay cannot clobber the evidence.
    const fs::path tmp = src / "runlog.jsonl.tmp";
    try {
      RunLogWriter writer(tmp.string());
      fresh = replay_experiment(app.runner, inputs, stored, &writer);
    } catch (...) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
    fs::rename(tmp, src / "runlog.jsonl");
  }

  RunSummary summary = write_analysis(target, fresh, inputs.split, inputs.labels,
                                      *inputs.tokenizer, app.runner.tmpl, false);
  out << "replay verified " << stored_steps << " stored steps";
  if (fresh.steps.size() > stored_steps) {
    out << ", resumed to " << fresh.steps.size();
  }
  out << "\n";
  print_summary_line(out, summary);
  return kExitOk;
}

void add_common_flags(CLI::App* cmd, CommonArgs& common) {
  cmd->add_option("--config", common.config_path, "configuration file (JSON)")
      ->required();
  cmd->add_option("--override", common.overrides,
                  "dotted-path override, e.g. p_keep=0.2 or backend.kind=oracle");
  cmd->add_option("--seed", common.seed, "master seed (overrides the config)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"in-context reinforcement learning experiment harness"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_out;
  CLI::App* run_cmd = app.add_subcommand("run", "execute a configured experiment");
  add_common_flags(run_cmd, run_args);
  run_cmd->add_option("--out", run_out, "artifact directory")->required();

  CommonArgs capacity_args;
  CLI::App* capacity_cmd = app.add_subcommand(
      "capacity", "estimate worst-case episode capacity of the context window");
  add_common_flags(capacity_cmd, capacity_args);

  std::string report_dir;
  CLI::App* report_cmd =
      app.add_subcommand("report", "recompute metrics from a stored run");
  report_cmd->add_option("dir", report_dir, "run directory")->required();

  std::vector<std::string> compare_dirs;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "tabulate two or more stored runs");
  compare_cmd->add_option("dirs", compare_dirs, "run directories");

  std::string replay_dir;
  std::string replay_out;
  CLI::App* replay_cmd = app.add_subcommand(
      "replay", "re-execute a stored run, verifying it event by event");
  replay_cmd->add_option("dir", replay_dir, "run directory")->required();
  replay_cmd->add_option("--out", replay_out,
                         "write the regenerated run here instead of in place");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_args, run_out, out);
    if (capacity_cmd->parsed()) return cmd_capacity(capacity_args, out);
    if (report_cmd->parsed()) return cmd_report(report_dir, out);
    if (compare_cmd->parsed()) return cmd_compare(compare_dirs, out, err);
    if (replay_cmd->parsed()) {
      std::optional<std::string> out_dir;
      if (!replay_out.empty()) out_dir = replay_out;
      return cmd_replay(replay_dir, out_dir, out);
    }
    err << "error: no command given\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace icrl

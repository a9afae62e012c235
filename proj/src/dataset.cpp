#include "icrl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "icrl/errors.hpp"
#include "icrl/rng.hpp"

namespace icrl {

using nlohmann::json;

DatasetFormat dataset_format_from_string(const std::string& s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "csv") return DatasetFormat::csv;
  throw ConfigError("unknown dataset format '" + s + "'");
}

std::string to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::jsonl: return "jsonl";
    case DatasetFormat::csv: return "csv";
  }
  return "?";
}

bool LabelSpace::contains(const std::string& label) const {
  return std::binary_search(labels.begin(), labels.end(), label);
}

std::size_t LabelSpace::index_of(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) {
    throw ContractViolation("label '" + label + "' not in label space of task '" +
                            task_name + "'");
  }
  return static_cast<std::size_t>(it - labels.begin());
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<Example> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      parse_fail(path, lineno, "malformed JSON record");
    }
    Example ex;
    if (rec.contains("id")) {
      if (rec["id"].is_string()) {
        ex.id = rec["id"].get<std::string>();
      } else if (rec["id"].is_number_integer()) {
        ex.id = std::to_string(rec["id"].get<long long>());
      } else {
        parse_fail(path, lineno, "field 'id' must be a string or integer");
      }
    } else {
      ex.id = "line-" + std::to_string(lineno);
    }
    if (!rec.contains("text") || !rec["text"].is_string()) {
      parse_fail(path, lineno, "missing string field 'text'");
    }
    if (!rec.contains("label") || !rec["label"].is_string()) {
      parse_fail(path, lineno, "missing string field 'label'");
    }
    ex.query = rec["text"].get<std::string>();
    ex.gold_label = rec["label"].get<std::string>();
    if (ex.query.empty()) parse_fail(path, lineno, "empty 'text' field");
    if (ex.gold_label.empty()) parse_fail(path, lineno, "empty 'label' field");
    out.push_back(std::move(ex));
  }
  return out;
}

// Minimal RFC-4180 row splitter: quoted fields, doubled quotes, CRLF.
std::vector<std::string> split_csv_row(const std::string& line,
                                       const std::filesystem::path& path,
                                       std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // trailing CR from CRLF files
    } else {
      cur += c;
    }
  }
  if (quoted) parse_fail(path, lineno, "unterminated quoted CSV field");
  fields.push_back(cur);
  return fields;
}

std::vector<Example> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ConfigError("empty dataset: " + path.string());
  ++lineno;
  auto header = split_csv_row(line, path, lineno);
  long id_col = -1, text_col = -1, label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = trim(header[i]);
    if (h == "id") id_col = static_cast<long>(i);
    if (h == "text" || h == "query" || h == "utterance") text_col = static_cast<long>(i);
    if (h == "label" || h == "intent") label_col = static_cast<long>(i);
  }
  if (text_col < 0 || label_col < 0) {
    parse_fail(path, 1, "CSV header must name a text/query and a label/intent column");
  }
  std::vector<Example> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_row(line, path, lineno);
    auto need = static_cast<std::size_t>(std::max({id_col, text_col, label_col}));
    if (fields.size() <= need) parse_fail(path, lineno, "row has too few columns");
    Example ex;
    ex.id = id_col >= 0 ? fields[static_cast<std::size_t>(id_col)]
                        : "line-" + std::to_string(lineno);
    ex.query = fields[static_cast<std::size_t>(text_col)];
    ex.gold_label = fields[static_cast<std::size_t>(label_col)];
    if (ex.query.empty()) parse_fail(path, lineno, "empty text field");
    if (ex.gold_label.empty()) parse_fail(path, lineno, "empty label field");
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

std::pair<std::vector<Example>, LabelSpace> load_dataset(
    const std::filesystem::path& path, DatasetFormat format,
    const std::optional<std::filesystem::path>& labels_path) {
  std::vector<Example> examples =
      format == DatasetFormat::jsonl ? read_jsonl(path) : read_csv(path);
  if (examples.empty()) throw ConfigError("empty dataset: " + path.string());

  std::unordered_set<std::string> seen_ids;
  std::set<std::string> labels;
  for (const auto& ex : examples) {
    if (!seen_ids.insert(ex.id).second) {
      throw ConfigError("duplicate example id '" + ex.id + "' in " + path.string());
    }
    labels.insert(ex.gold_label);
  }
  if (labels_path) {
    std::ifstream in(*labels_path);
    if (!in) throw ConfigError("cannot open label file " + labels_path->string());
    std::string line;
    while (std::getline(in, line)) {
      std::string l = trim(line);
      if (!l.empty()) labels.insert(l);
    }
  }

  LabelSpace space;
  space.labels.assign(labels.begin(), labels.end());
  space.task_name = path.stem().string();
  return {std::move(examples), std::move(space)};
}

DatasetSplit make_split(const std::vector<Example>& examples,
                        std::optional<std::size_t> train_n,
                        std::optional<std::size_t> test_n, std::uint64_t seed) {
  std::size_t tn = test_n.value_or(500);
  std::size_t rn;
  if (train_n) {
    rn = *train_n;
  } else {
    if (examples.size() < tn) {
      throw ConfigError("insufficient examples: have " +
                        std::to_string(examples.size()) + ", need test_n=" +
                        std::to_string(tn));
    }
    std::size_t avail = examples.size() - tn;
    rn = avail >= 10000 ? 10000 : 5000;
  }
  if (rn + tn > examples.size()) {
    throw ConfigError("insufficient examples: have " +
                      std::to_string(examples.size()) + ", need train_n+test_n=" +
                      std::to_string(rn + tn));
  }

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates on our portable draws; a pure function of (examples, seed).
  RngStream rng = SeedSequence(seed).stream(streams::kSplit);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }

  DatasetSplit split;
  split.seed = seed;
  split.test.reserve(tn);
  split.train.reserve(rn);
  for (std::size_t i = 0; i < tn; ++i) split.test.push_back(examples[order[i]]);
  for (std::size_t i = 0; i < rn; ++i) split.train.push_back(examples[order[tn + i]]);
  return split;
}

DatasetIndex::DatasetIndex(const DatasetSplit& split) {
  for (const auto& ex : split.train) map_[ex.id] = &ex;
  for (const auto& ex : split.test) map_[ex.id] = &ex;
}

const Example& DatasetIndex::by_id(const std::string& id) const {
  auto it = map_.find(id);
  if (it == map_.end()) {
    throw IntegrityError("log references unknown example id '" + id + "'");
  }
  return *it->second;
}

void write_split_manifest(const DatasetSplit& split,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write split manifest " + path.string());
  for (const auto& ex : split.train) {
    out << json{{"split", "train"}, {"id", ex.id}}.dump() << "\n";
  }
  for (const auto& ex : split.test) {
    out << json{{"split", "test"}, {"id", ex.id}}.dump() << "\n";
  }
}

void verify_split_manifest(const DatasetSplit& split,
                           const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("missing split manifest " + path.string());
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw IntegrityError("malformed split manifest line");
    rows.emplace_back(rec.at("split").get<std::string>(),
                      rec.at("id").get<std::string>());
  }
  std::size_t want = split.train.size() + split.test.size();
  if (rows.size() != want) {
    throw IntegrityError("split manifest has " + std::to_string(rows.size()) +
                         " rows, expected " + std::to_string(want));
  }
  std::size_t i = 0;
  for (const auto& ex : split.train) {
    if (rows[i].first != "train" || rows[i].second != ex.id) {
      throw IntegrityError("split manifest mismatch at row " + std::to_string(i));
    }
    ++i;
  }
  for (const auto& ex : split.test) {
    if (rows[i].first != "test" || rows[i].second != ex.id) {
      throw IntegrityError("split manifest mismatch at row " + std::to_string(i));
    }
    ++i;
  }
}

}  // namespace icrl

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace icrl {

// One labeled classification instance from a dataset stream.
struct Example {
  std::string id;
  std::string query;
  std::string gold_label;
};

// Fixed, ordered label set of a task. The order never changes during a run:
// confusion-matrix axes and lexicographic tie-breaks depend on it.
struct LabelSpace {
  std::vector<std::string> labels;  // sorted, distinct
  std::string task_name;

  bool contains(const std::string& label) const;
  std::size_t index_of(const std::string& label) const;  // throws if absent
  std::size_t size() const { return labels.size(); }
};

enum class DatasetFormat { jsonl, csv };

DatasetFormat dataset_format_from_string(const std::string& s);
std::string to_string(DatasetFormat f);

// Deterministic train stream + held-out test set.
struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> test;
  std::uint64_t seed = 0;
};

// Reads a dataset file. JSONL records are {"id","text","label"} (id optional,
// synthesized from the line number when absent); CSV needs a header naming
// id/text/label columns. labels_path optionally declares extra labels, one
// per line, merged into the label space.
std::pair<std::vector<Example>, LabelSpace> load_dataset(
    const std::filesystem::path& path, DatasetFormat format,
    const std::optional<std::filesystem::path>& labels_path = std::nullopt);

// Shuffles deterministically under seed, takes test_n examples for test and
// train_n for train. Pass nullopt to get the standard sizes: test 500, train
// 10000 (or 5000 when the dataset is too small for that).
DatasetSplit make_split(const std::vector<Example>& examples,
                        std::optional<std::size_t> train_n,
                        std::optional<std::size_t> test_n, std::uint64_t seed);

// id -> Example lookup over a split, used to reconstruct prompts from logs.
class DatasetIndex {
 public:
  explicit DatasetIndex(const DatasetSplit& split);
  const Example& by_id(const std::string& id) const;  // throws IntegrityError

 private:
  std::unordered_map<std::string, const Example*> map_;
};

// Split manifests: one JSONL object per line, {"split":"train"|"test","id":...}
// in stream order. Enough to verify that a re-run saw the same stream.
void write_split_manifest(const DatasetSplit& split,
                          const std::filesystem::path& path);
void verify_split_manifest(const DatasetSplit& split,
                           const std::filesystem::path& path);

}  // namespace icrl

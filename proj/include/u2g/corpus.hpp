#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace u2g {

struct UrlRecord {
    std::string url;  // raw URL, surrounding whitespace trimmed
    int label = 0;    // in [0, C)
};

struct Dataset {
    std::vector<UrlRecord> records;
    std::vector<std::string> class_names;
    std::string source_id;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

struct SplitSpec {
    double train_frac = 0.8;
    double val_frac = 0.1;
    double test_frac = 0.1;
    std::uint64_t seed = 0;
};

struct ClassStats {
    std::vector<std::int64_t> counts;  // per class
    // majority / minority count; infinity marker when a class is empty
    double imbalance_ratio = 1.0;
    bool imbalance_infinite = false;
    // per class: histogram of URL lengths, bucket width 10 characters
    std::vector<std::vector<std::int64_t>> length_histogram;
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_skipped = 0;
};

// Distinct label strings in the CSV's `label` column, sorted and assigned
// ids 0..C-1. Convenience for callers that have no explicit label map.
std::map<std::string, int> scan_labels(const std::string& path);

// Reads a labeled URL CSV. Header row required with columns `url` and
// `label` (case-insensitive, extra columns ignored). Every label value
// must appear in label_map unless skip_invalid is set, in which case bad
// rows are counted in the report instead of aborting the load.
Dataset load_csv(const std::string& path,
                 const std::map<std::string, int>& label_map,
                 bool skip_invalid = false, LoadReport* report = nullptr);

// Writes records back out as `url,label` rows using the dataset's class
// names as label strings. Inverse of load_csv on (url, label) pairs.
void write_csv(const Dataset& dataset, const std::string& path);

// Stratified split: seeded uniform shuffle, then contiguous per-class
// slicing with floored quotas; flooring remainders go to the train split.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset& dataset,
                                            const SplitSpec& spec);

// Keeps records whose URL length is strictly less than max_len.
Dataset filter_short(const Dataset& dataset, std::size_t max_len);

ClassStats class_stats(const Dataset& dataset);

// JSON rendering of ClassStats: keys `classes`, `imbalance_ratio`,
// `length_histogram`.
std::string stats_to_json(const Dataset& dataset, const ClassStats& stats);

}  // namespace u2g

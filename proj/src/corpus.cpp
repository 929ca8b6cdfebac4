#include "u2g/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "u2g/error.hpp"

namespace u2g {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// RFC-4180 style row parser: double-quote enclosure, doubled quotes
// inside quoted fields. `line` must already have its trailing \r removed.
std::vector<std::string> parse_csv_row(const std::string& line) {
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
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::map<std::string, int> scan_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty dataset: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    auto header = parse_csv_row(line);
    int label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (lower(trim(header[i])) == "label" && label_col < 0)
            label_col = static_cast<int>(i);
    if (label_col < 0)
        throw FormatError("CSV header must contain a `label` column: " + path);
    std::map<std::string, int> labels;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = parse_csv_row(line);
        if (static_cast<std::size_t>(label_col) >= fields.size()) continue;
        labels.emplace(trim(fields[static_cast<std::size_t>(label_col)]), 0);
    }
    int next = 0;
    for (auto& [name, id] : labels) id = next++;  // std::map: sorted order
    return labels;
}

Dataset load_csv(const std::string& path,
                 const std::map<std::string, int>& label_map,
                 bool skip_invalid, LoadReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open CSV file: " + path);

    Dataset ds;
    ds.source_id = path;

    int max_label = -1;
    for (const auto& [name, id] : label_map) {
        if (id < 0) throw SpecError("negative class id for label '" + name + "'");
        max_label = std::max(max_label, id);
    }
    ds.class_names.assign(static_cast<std::size_t>(max_label + 1), "");
    for (const auto& [name, id] : label_map) {
        if (ds.class_names[static_cast<std::size_t>(id)].empty())
            ds.class_names[static_cast<std::size_t>(id)] = name;
    }

    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty dataset: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // strip a UTF-8 BOM if present
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    auto header = parse_csv_row(line);
    int url_col = -1, label_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string h = lower(trim(header[i]));
        if (h == "url" && url_col < 0) url_col = static_cast<int>(i);
        if (h == "label" && label_col < 0) label_col = static_cast<int>(i);
    }
    if (url_col < 0 || label_col < 0)
        throw FormatError("CSV header must contain `url` and `label` columns: " + path);

    LoadReport rep;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++rep.rows_read;
        auto fields = parse_csv_row(line);
        if (static_cast<std::size_t>(std::max(url_col, label_col)) >= fields.size()) {
            if (skip_invalid) { ++rep.rows_skipped; continue; }
            throw FormatError("row " + std::to_string(row_no) + ": too few columns");
        }
        std::string url = trim(fields[static_cast<std::size_t>(url_col)]);
        std::string label = trim(fields[static_cast<std::size_t>(label_col)]);
        if (url.empty()) {
            if (skip_invalid) { ++rep.rows_skipped; continue; }
            throw FormatError("row " + std::to_string(row_no) + ": empty url");
        }
        auto it = label_map.find(label);
        if (it == label_map.end()) {
            if (skip_invalid) { ++rep.rows_skipped; continue; }
            throw LabelError("row " + std::to_string(row_no) + ": unmapped label '" +
                             label + "'");
        }
        ds.records.push_back({std::move(url), it->second});
    }
    if (rep.rows_read == 0) throw FormatError("empty dataset (header only): " + path);
    if (ds.records.empty()) throw FormatError("no valid rows in: " + path);
    if (report) *report = rep;
    return ds;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write CSV file: " + path);
    out << "url,label\n";
    for (const auto& r : dataset.records) {
        const std::string& name = dataset.class_names.at(static_cast<std::size_t>(r.label));
        out << csv_escape(r.url) << ',' << csv_escape(name) << '\n';
    }
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& dataset,
                                            const SplitSpec& spec) {
    if (dataset.empty()) throw SpecError("split: empty dataset");
    double fsum = spec.train_frac + spec.val_frac + spec.test_frac;
    if (spec.train_frac < 0 || spec.val_frac < 0 || spec.test_frac < 0 ||
        fsum > 1.0 + 1e-9)
        throw SpecError("split: fractions must be nonnegative and sum to <= 1");

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    // group shuffled indices by class
    int C = dataset.num_classes();
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(C));
    for (std::size_t idx : order)
        by_class[static_cast<std::size_t>(dataset.records[idx].label)].push_back(idx);

    std::vector<std::size_t> train_idx, val_idx, test_idx;
    for (const auto& cls : by_class) {
        auto n = static_cast<double>(cls.size());
        std::size_t q_train = static_cast<std::size_t>(std::floor(spec.train_frac * n));
        std::size_t q_val = static_cast<std::size_t>(std::floor(spec.val_frac * n));
        std::size_t q_test = static_cast<std::size_t>(std::floor(spec.test_frac * n));
        std::size_t covered =
            static_cast<std::size_t>(std::floor(std::min(fsum, 1.0) * n + 1e-9));
        covered = std::min(covered, cls.size());
        // flooring remainder goes to the train split
        std::size_t rem = covered - std::min(covered, q_train + q_val + q_test);
        q_train += rem;
        std::size_t p = 0;
        for (std::size_t i = 0; i < q_train && p < cls.size(); ++i) train_idx.push_back(cls[p++]);
        for (std::size_t i = 0; i < q_val && p < cls.size(); ++i) val_idx.push_back(cls[p++]);
        for (std::size_t i = 0; i < q_test && p < cls.size(); ++i) test_idx.push_back(cls[p++]);
    }

    auto make = [&](std::vector<std::size_t>& idx, const char* tag) {
        std::sort(idx.begin(), idx.end());
        Dataset d;
        d.class_names = dataset.class_names;
        d.source_id = dataset.source_id + "#" + tag;
        d.records.reserve(idx.size());
        for (std::size_t i : idx) d.records.push_back(dataset.records[i]);
        return d;
    };
    return {make(train_idx, "train"), make(val_idx, "val"), make(test_idx, "test")};
}

Dataset filter_short(const Dataset& dataset, std::size_t max_len) {
    if (max_len < 1) throw SpecError("filter_short: max_len must be >= 1");
    Dataset d;
    d.class_names = dataset.class_names;
    d.source_id = dataset.source_id + "#short";
    for (const auto& r : dataset.records)
        if (r.url.size() < max_len) d.records.push_back(r);
    return d;
}

ClassStats class_stats(const Dataset& dataset) {
    if (dataset.empty()) throw SpecError("class_stats: empty dataset");
    int C = dataset.num_classes();
    ClassStats st;
    st.counts.assign(static_cast<std::size_t>(C), 0);
    st.length_histogram.assign(static_cast<std::size_t>(C), {});
    for (const auto& r : dataset.records) {
        auto c = static_cast<std::size_t>(r.label);
        ++st.counts[c];
        std::size_t bucket = r.url.size() / 10;
        auto& hist = st.length_histogram[c];
        if (hist.size() <= bucket) hist.resize(bucket + 1, 0);
        ++hist[bucket];
    }
    std::int64_t majority = 0;
    std::int64_t minority = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t c : st.counts) {
        majority = std::max(majority, c);
        minority = std::min(minority, c);
    }
    if (minority == 0) {
        st.imbalance_infinite = true;
        st.imbalance_ratio = std::numeric_limits<double>::infinity();
    } else {
        st.imbalance_ratio = static_cast<double>(majority) / static_cast<double>(minority);
    }
    return st;
}

std::string stats_to_json(const Dataset& dataset, const ClassStats& stats) {
    nlohmann::json j;
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t c = 0; c < stats.counts.size(); ++c) {
        std::string name = c < dataset.class_names.size() && !dataset.class_names[c].empty()
                               ? dataset.class_names[c]
                               : "class_" + std::to_string(c);
        classes[name] = stats.counts[c];
    }
    j["classes"] = classes;
    if (stats.imbalance_infinite)
        j["imbalance_ratio"] = "inf";
    else
        j["imbalance_ratio"] = stats.imbalance_ratio;
    nlohmann::json hist = nlohmann::json::object();
    for (std::size_t c = 0; c < stats.length_histogram.size(); ++c) {
        std::string name = c < dataset.class_names.size() && !dataset.class_names[c].empty()
                               ? dataset.class_names[c]
                               : "class_" + std::to_string(c);
        hist[name] = stats.length_histogram[c];
    }
    j["length_histogram"] = hist;
    return j.dump(2);
}

}  // namespace u2g

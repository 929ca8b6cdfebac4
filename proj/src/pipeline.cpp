#include "u2g/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "u2g/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace u2g {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<double> sample_weights(const Dataset& ds, const std::vector<int>& labels) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(ds.num_classes()), 0);
    for (const auto& r : ds.records) ++counts[static_cast<std::size_t>(r.label)];
    auto total = static_cast<double>(ds.size());
    auto C = static_cast<double>(ds.num_classes());
    std::vector<double> w(labels.size(), 1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto c = counts[static_cast<std::size_t>(labels[i])];
        if (c > 0) w[i] = total / (C * static_cast<double>(c));
    }
    return w;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["lr"] = cfg.lr;
    j["seed"] = cfg.seed;
    j["patience"] = cfg.patience;
    j["class_weights"] = cfg.class_weights;
    j["positive_class"] = cfg.positive_class;
    j["theta_word"] = cfg.theta_word;
    j["theta_char"] = cfg.theta_char;
    j["min_pair_count"] = cfg.min_pair_count;
    j["vocab_target_size"] = cfg.vocab_target_size;
    j["vocab_min_freq"] = cfg.vocab_min_freq;
    j["model"] = {
        {"charcnn_embed_dim", cfg.model.charcnn.embed_dim},
        {"charcnn_widths", cfg.model.charcnn.widths},
        {"charcnn_channels", cfg.model.charcnn.channels_per_width},
        {"semantic_dim", cfg.model.semantic.model_dim},
        {"semantic_heads", cfg.model.semantic.heads},
        {"semantic_layers", cfg.model.semantic.layers},
        {"use_positional", cfg.model.semantic.use_positional},
        {"gcn_layers", cfg.model.gcn_layers},
        {"graph_dim", cfg.model.graph_dim},
        {"num_classes", cfg.model.num_classes},
        {"max_subword_len", cfg.model.tokenizer.max_subword_len},
        {"max_char_len", cfg.model.tokenizer.max_char_len},
        {"freeze_semantic", cfg.model.freeze_semantic},
    };
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& json) {
    nlohmann::json j = nlohmann::json::parse(json);
    TrainConfig cfg;
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.patience = j.at("patience").get<int>();
    cfg.class_weights = j.at("class_weights").get<bool>();
    cfg.positive_class = j.at("positive_class").get<int>();
    cfg.theta_word = j.at("theta_word").get<double>();
    cfg.theta_char = j.at("theta_char").get<double>();
    cfg.min_pair_count = j.at("min_pair_count").get<std::int64_t>();
    cfg.vocab_target_size = j.at("vocab_target_size").get<std::size_t>();
    cfg.vocab_min_freq = j.at("vocab_min_freq").get<std::int64_t>();
    const auto& m = j.at("model");
    cfg.model.charcnn.embed_dim = m.at("charcnn_embed_dim").get<std::size_t>();
    cfg.model.charcnn.widths = m.at("charcnn_widths").get<std::vector<std::size_t>>();
    cfg.model.charcnn.channels_per_width = m.at("charcnn_channels").get<std::size_t>();
    cfg.model.semantic.model_dim = m.at("semantic_dim").get<std::size_t>();
    cfg.model.semantic.heads = m.at("semantic_heads").get<std::size_t>();
    cfg.model.semantic.layers = m.at("semantic_layers").get<std::size_t>();
    cfg.model.semantic.use_positional = m.at("use_positional").get<bool>();
    cfg.model.gcn_layers = m.at("gcn_layers").get<std::size_t>();
    cfg.model.graph_dim = m.at("graph_dim").get<std::size_t>();
    cfg.model.num_classes = m.at("num_classes").get<int>();
    cfg.model.tokenizer.max_subword_len = m.at("max_subword_len").get<std::size_t>();
    cfg.model.tokenizer.max_char_len = m.at("max_char_len").get<std::size_t>();
    cfg.model.freeze_semantic = m.at("freeze_semantic").get<bool>();
    return cfg;
}

std::vector<double> score_urls(const std::vector<std::string>& urls,
                               const SubwordVocab& vocab, const GlobalGraph& g_word,
                               const GlobalGraph& g_char, ModelParams& params,
                               int positive_class, int batch_size,
                               std::vector<ForwardTrace>* traces) {
    std::vector<double> scores;
    scores.reserve(urls.size());
    auto C = static_cast<std::size_t>(params.cfg.num_classes);
    if (positive_class < 0 || static_cast<std::size_t>(positive_class) >= C)
        throw SpecError("score_urls: positive class out of range");
    for (std::size_t start = 0; start < urls.size();
         start += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(urls.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<std::string> batch(urls.begin() + static_cast<long>(start),
                                       urls.begin() + static_cast<long>(end));
        Tape tape(/*grad_enabled=*/false);
        ForwardResult fwd = model_forward(tape, batch, vocab, g_word, g_char, params,
                                          traces != nullptr);
        for (std::size_t i = 0; i < batch.size(); ++i)
            scores.push_back(fwd.probs->val[i * C + static_cast<std::size_t>(positive_class)]);
        if (traces)
            traces->insert(traces->end(), fwd.traces.begin(), fwd.traces.end());
    }
    return scores;
}

TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  const SubwordVocab& vocab, const GlobalGraph& g_word,
                  const GlobalGraph& g_char, ModelParams& params,
                  const TrainConfig& cfg) {
    if (train_set.empty()) throw SpecError("train: empty training set");
    if (cfg.batch_size < 1) throw SpecError("train: batch size must be >= 1");

    ParamGroup group = params.group();
    AdamState adam;
    adam.lr = cfg.lr;

    std::vector<std::string> val_urls;
    std::vector<int> val_labels;
    for (const auto& r : val_set.records) {
        val_urls.push_back(r.url);
        val_labels.push_back(r.label);
    }

    TrainResult result;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_values;
    int since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::string> urls;
            std::vector<int> labels;
            for (std::size_t i = start; i < end; ++i) {
                urls.push_back(train_set.records[order[i]].url);
                labels.push_back(train_set.records[order[i]].label);
            }
            Tape tape;
            ForwardResult fwd = model_forward(tape, urls, vocab, g_word, g_char, params);
            std::vector<double> weights;
            if (cfg.class_weights) weights = sample_weights(train_set, labels);
            Tensor& loss = batch_loss(tape, *fwd.probs, labels,
                                      cfg.class_weights ? &weights : nullptr);
            loss_sum += loss.val[0];
            ++batches;
            tape.backward(loss);
            adam_step(group, adam);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
        double metric = -stats.train_loss;
        if (!val_urls.empty()) {
            std::vector<double> scores = score_urls(val_urls, vocab, g_word, g_char,
                                                    params, cfg.positive_class,
                                                    cfg.batch_size);
            stats.val = compute_metrics(scores, val_labels);
            metric = stats.val.auc ? *stats.val.auc : stats.val.accuracy;
        }
        result.history.push_back(stats);

        if (metric > best_metric) {
            best_metric = metric;
            result.best_epoch = epoch;
            since_best = 0;
            best_values.clear();
            for (Param* p : group.params) best_values.push_back(p->value);
        } else if (++since_best > cfg.patience) {
            break;
        }
    }

    if (!best_values.empty())
        for (std::size_t i = 0; i < group.params.size(); ++i)
            group.params[i]->value = best_values[i];
    result.best_val_auc = best_metric;
    return result;
}

Metrics evaluate(const Dataset& test_set, const SubwordVocab& vocab,
                 const GlobalGraph& g_word, const GlobalGraph& g_char,
                 ModelParams& params, const TrainConfig& cfg) {
    if (test_set.empty()) throw SpecError("evaluate: empty test set");
    std::vector<std::string> urls;
    std::vector<int> labels;
    for (const auto& r : test_set.records) {
        urls.push_back(r.url);
        labels.push_back(r.label == cfg.positive_class ? 1 : 0);
    }
    std::vector<double> scores = score_urls(urls, vocab, g_word, g_char, params,
                                            cfg.positive_class, cfg.batch_size);
    return compute_metrics(scores, labels);
}

std::vector<Prediction> predict(const std::vector<std::string>& urls,
                                const SubwordVocab& vocab, const GlobalGraph& g_word,
                                const GlobalGraph& g_char, ModelParams& params,
                                const TrainConfig& cfg) {
    std::vector<ForwardTrace> traces;
    std::vector<double> scores = score_urls(urls, vocab, g_word, g_char, params,
                                            cfg.positive_class, cfg.batch_size,
                                            &traces);
    std::vector<Prediction> out;
    out.reserve(urls.size());
    for (std::size_t i = 0; i < urls.size(); ++i) {
        const auto& probs = traces[i].probs;
        int label = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        out.push_back({scores[i], label, traces[i].alpha[0], traces[i].alpha[1],
                       traces[i].alpha[2]});
    }
    return out;
}

// --- checkpointing ---------------------------------------------------------

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file for digest: " + path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

namespace {

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated checkpoint");
    return v;
}

constexpr char kMagic[5] = {'U', '2', 'G', 'P', 'P'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, ModelParams& params,
                     const TrainConfig& cfg, const ArtifactDigests& digests) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);

    nlohmann::json block;
    block["config"] = nlohmann::json::parse(train_config_to_json(cfg));
    block["vocab_size"] = params.vocab_size;
    block["digests"] = {{"vocab", digests.vocab},
                        {"word_graph", digests.word_graph},
                        {"char_graph", digests.char_graph}};
    std::string json = block.dump();
    write_pod(out, static_cast<std::uint32_t>(json.size()));
    out.write(json.data(), static_cast<std::streamsize>(json.size()));

    ParamGroup group = params.group();
    write_pod(out, static_cast<std::uint32_t>(group.params.size()));
    for (Param* p : group.params) {
        write_pod(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_pod(out, static_cast<std::uint32_t>(p->dims.size()));
        for (std::size_t d : p->dims) write_pod(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const ArtifactDigests* expected,
                                 bool allow_mismatch) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("bad checkpoint magic: " + path);
    auto version = read_pod<std::uint16_t>(in);
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    auto json_len = read_pod<std::uint32_t>(in);
    std::string json(json_len, '\0');
    in.read(json.data(), json_len);
    if (!in) throw FormatError("truncated checkpoint config block");
    nlohmann::json block = nlohmann::json::parse(json);

    TrainConfig cfg = train_config_from_json(block.at("config").dump());
    auto vocab_size = block.at("vocab_size").get<std::size_t>();
    ArtifactDigests digests{block.at("digests").at("vocab").get<std::string>(),
                            block.at("digests").at("word_graph").get<std::string>(),
                            block.at("digests").at("char_graph").get<std::string>()};
    if (expected && !allow_mismatch) {
        if (expected->vocab != digests.vocab ||
            expected->word_graph != digests.word_graph ||
            expected->char_graph != digests.char_graph)
            throw ArtifactError(
                "artifact digests do not match the checkpoint (use the override "
                "flag to load anyway)");
    }

    LoadedCheckpoint loaded{cfg, ModelParams::create(cfg.model, vocab_size, 0),
                            digests};
    ParamGroup group = loaded.params.group();
    std::vector<bool> filled(group.params.size(), false);

    auto count = read_pod<std::uint32_t>(in);
    for (std::uint32_t t = 0; t < count; ++t) {
        auto name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        auto rank = read_pod<std::uint32_t>(in);
        std::vector<std::size_t> dims;
        for (std::uint32_t r = 0; r < rank; ++r)
            dims.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(in)));
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        std::vector<double> values(n);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw FormatError("truncated checkpoint tensor: " + name);

        Param* p = group.find(name);
        if (!p) throw ArtifactError("checkpoint tensor has no parameter slot: " + name);
        if (p->dims != dims)
            throw ArtifactError("checkpoint tensor shape mismatch: " + name);
        p->value = std::move(values);
        for (std::size_t i = 0; i < group.params.size(); ++i)
            if (group.params[i] == p) filled[i] = true;
    }
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i])
            throw ArtifactError("checkpoint missing tensor: " + group.params[i]->name);
    return loaded;
}

// --- adversarial URL generation ---------------------------------------------

PerturbResult perturb_adversarial(const std::string& url, const SubwordVocab& vocab,
                                  const AdversarialSpec& spec) {
    if (spec.ratio <= 0.0 || spec.ratio > 1.0)
        throw SpecError("perturb_adversarial: ratio must be in (0, 1]");

    // host = substring between the scheme separator and the first / ? #
    std::size_t host_start = 0;
    std::size_t scheme = url.find("://");
    if (scheme != std::string::npos) host_start = scheme + 3;
    std::size_t host_end = url.find_first_of("/?#", host_start);
    if (host_end == std::string::npos) host_end = url.size();
    if (host_end <= host_start) return {url, false};
    std::string host = url.substr(host_start, host_end - host_start);

    // registrable domain: the last two dot-separated labels; the TLD label
    // stays untouched, so the insertion target is the second-to-last label
    std::vector<std::pair<std::size_t, std::size_t>> labels;  // (offset, len) in host
    {
        std::size_t pos = 0;
        while (pos <= host.size()) {
            std::size_t dot = host.find('.', pos);
            std::size_t end = dot == std::string::npos ? host.size() : dot;
            labels.emplace_back(pos, end - pos);
            if (dot == std::string::npos) break;
            pos = dot + 1;
        }
    }
    if (labels.size() < 2) return {url, false};
    auto [label_off, label_len] = labels[labels.size() - 2];
    if (label_len < 2) return {url, false};
    std::string label = host.substr(label_off, label_len);

    // subword boundaries inside the label: gaps between consecutive greedy
    // pieces of each delimiter-free run
    std::vector<std::size_t> boundaries;  // insert positions within label
    std::size_t run_start = 0;
    for (std::size_t i = 0; i <= label.size(); ++i) {
        if (i == label.size() || is_delimiter(label[i])) {
            if (i > run_start) {
                std::string run = label.substr(run_start, i - run_start);
                auto pieces = match_fragment(run, vocab);
                for (std::size_t p = 1; p < pieces.size(); ++p)
                    boundaries.push_back(run_start + pieces[p].offset);
            }
            run_start = i + 1;
        }
    }
    if (boundaries.empty()) return {url, false};

    auto k = static_cast<std::size_t>(
        std::ceil(spec.ratio * static_cast<double>(boundaries.size())));
    k = std::min(k, boundaries.size());
    if (k == 0) return {url, false};

    std::mt19937_64 rng(spec.seed);
    std::shuffle(boundaries.begin(), boundaries.end(), rng);
    std::vector<std::size_t> chosen(boundaries.begin(),
                                    boundaries.begin() + static_cast<long>(k));
    std::vector<bool> duplicate(k, spec.mode == AdversarialSpec::Mode::kDuplicate);
    if (spec.mode == AdversarialSpec::Mode::kBoth)
        for (std::size_t i = 0; i < k; ++i) duplicate[i] = (rng() & 1u) != 0;

    // apply right-to-left so earlier offsets stay valid
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return chosen[a] > chosen[b]; });
    std::string mutated = label;
    for (std::size_t i : idx) {
        std::size_t at = chosen[i];
        if (duplicate[i])
            mutated.insert(at, 1, mutated[at - 1]);
        else
            mutated.insert(at, 1, '-');
    }

    std::string out = url.substr(0, host_start + label_off) + mutated +
                      url.substr(host_start + label_off + label_len);
    return {out, true};
}

}  // namespace u2g

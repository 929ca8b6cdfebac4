#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "u2g/corpus.hpp"
#include "u2g/fusion.hpp"
#include "u2g/metrics.hpp"

namespace u2g {

struct TrainConfig {
    int batch_size = 32;
    int epochs = 20;
    double lr = 1e-3;
    std::uint64_t seed = 42;
    int patience = 3;  // epochs without val-AUC improvement before stopping
    bool class_weights = false;
    int positive_class = 1;

    double theta_word = 0.2;
    double theta_char = 0.2;
    std::int64_t min_pair_count = 5;
    std::size_t vocab_target_size = 8000;
    std::int64_t vocab_min_freq = 2;

    ModelConfig model;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& json);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    Metrics val;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double best_val_auc = 0.0;
};

// End-to-end joint optimization: per-epoch seeded shuffle, mini-batches
// (last partial batch kept), Adam steps, per-epoch validation, early
// stopping on val AUC. `params` ends up at the best-epoch snapshot.
TrainResult train(const Dataset& train_set, const Dataset& val_set,
                  const SubwordVocab& vocab, const GlobalGraph& g_word,
                  const GlobalGraph& g_char, ModelParams& params,
                  const TrainConfig& cfg);

// Positive-class probability per URL, batched, gradient-free.
std::vector<double> score_urls(const std::vector<std::string>& urls,
                               const SubwordVocab& vocab, const GlobalGraph& g_word,
                               const GlobalGraph& g_char, ModelParams& params,
                               int positive_class, int batch_size,
                               std::vector<ForwardTrace>* traces = nullptr);

Metrics evaluate(const Dataset& test_set, const SubwordVocab& vocab,
                 const GlobalGraph& g_word, const GlobalGraph& g_char,
                 ModelParams& params, const TrainConfig& cfg);

struct Prediction {
    double score = 0.0;
    int label = 0;
    double alpha_t = 0.0, alpha_word = 0.0, alpha_char = 0.0;
};

std::vector<Prediction> predict(const std::vector<std::string>& urls,
                                const SubwordVocab& vocab, const GlobalGraph& g_word,
                                const GlobalGraph& g_char, ModelParams& params,
                                const TrainConfig& cfg);

// --- checkpointing -------------------------------------------------------

struct ArtifactDigests {
    std::string vocab;
    std::string word_graph;
    std::string char_graph;
};

// FNV-1a 64 over the file bytes, hex encoded.
std::string file_digest(const std::string& path);

void save_checkpoint(const std::string& path, ModelParams& params,
                     const TrainConfig& cfg, const ArtifactDigests& digests);

struct LoadedCheckpoint {
    TrainConfig cfg;
    ModelParams params;
    ArtifactDigests digests;
};

// expected digests, when given, must match unless allow_mismatch is set.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const ArtifactDigests* expected = nullptr,
                                 bool allow_mismatch = false);

// --- adversarial URL generation ------------------------------------------

struct AdversarialSpec {
    enum class Mode { kHyphen, kDuplicate, kBoth };
    Mode mode = Mode::kHyphen;
    double ratio = 0.5;  // fraction of subword boundaries to perturb, (0, 1]
    std::uint64_t seed = 0;
};

struct PerturbResult {
    std::string url;
    bool changed = false;
};

// Inserts evasive characters at subword boundaries inside the registrable
// domain's first label. Scheme, TLD label, path and query stay untouched.
PerturbResult perturb_adversarial(const std::string& url, const SubwordVocab& vocab,
                                  const AdversarialSpec& spec);

}  // namespace u2g

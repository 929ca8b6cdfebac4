#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace u2g {

struct Metrics {
    double accuracy = 0.0;
    std::optional<double> precision;  // absent when TP + FP = 0
    std::optional<double> recall;     // absent when TP + FN = 0
    std::optional<double> f1;
    std::optional<double> auc;        // absent on single-class inputs
    std::map<double, double> tpr_at_fpr;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double threshold = 0.5;
};

inline const std::vector<double> kDefaultFprLevels = {0.1, 0.01, 0.001, 0.0001};

// Rank-statistic AUC with tie-averaged ranks. labels: 1 = positive.
std::optional<double> auc_score(const std::vector<double>& scores,
                                const std::vector<int>& labels);

// For each level: the maximum TPR over all score thresholds whose FPR
// stays at or below that level (step function, no interpolation).
std::map<double, double> tpr_at_fpr(const std::vector<double>& scores,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& levels);

Metrics compute_metrics(const std::vector<double>& scores,
                        const std::vector<int>& labels, double threshold = 0.5,
                        const std::vector<double>& levels = kDefaultFprLevels);

std::string metrics_to_json(const Metrics& m);

}  // namespace u2g

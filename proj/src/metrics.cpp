#include "u2g/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "u2g/error.hpp"

namespace u2g {

std::optional<double> auc_score(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw SpecError("auc_score: scores/labels size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int label : labels) (label == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based tie average
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

std::map<double, double> tpr_at_fpr(const std::vector<double>& scores,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& levels) {
    if (scores.size() != labels.size())
        throw SpecError("tpr_at_fpr: scores/labels size mismatch");
    std::int64_t n_pos = 0, n_neg = 0;
    for (int label : labels) (label == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw SpecError("tpr_at_fpr: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    // operating points: one per distinct threshold, plus the predict-nothing
    // point (FPR 0, TPR 0)
    std::vector<std::pair<double, double>> points{{0.0, 0.0}};  // (fpr, tpr)
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp)++;
            ++j;
        }
        points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos));
        i = j;
    }

    std::map<double, double> result;
    for (double level : levels) {
        double best = 0.0;
        for (const auto& [fpr, tpr] : points)
            if (fpr <= level) best = std::max(best, tpr);
        result[level] = best;
    }
    return result;
}

Metrics compute_metrics(const std::vector<double>& scores,
                        const std::vector<int>& labels, double threshold,
                        const std::vector<double>& levels) {
    if (scores.empty() || scores.size() != labels.size())
        throw SpecError("compute_metrics: bad inputs");
    Metrics m;
    m.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool predicted = scores[i] >= threshold;
        bool actual = labels[i] == 1;
        if (predicted && actual) ++m.tp;
        else if (predicted && !actual) ++m.fp;
        else if (!predicted && !actual) ++m.tn;
        else ++m.fn;
    }
    auto total = static_cast<double>(scores.size());
    m.accuracy = static_cast<double>(m.tp + m.tn) / total;
    if (m.tp + m.fp > 0)
        m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0)
        m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    m.auc = auc_score(scores, labels);
    if (m.auc) m.tpr_at_fpr = tpr_at_fpr(scores, labels, levels);
    return m;
}

std::string metrics_to_json(const Metrics& m) {
    nlohmann::json j;
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision ? nlohmann::json(*m.precision) : nlohmann::json();
    j["recall"] = m.recall ? nlohmann::json(*m.recall) : nlohmann::json();
    j["f1"] = m.f1 ? nlohmann::json(*m.f1) : nlohmann::json();
    j["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json();
    nlohmann::json tpr = nlohmann::json::object();
    for (const auto& [level, value] : m.tpr_at_fpr)
        tpr[std::to_string(level)] = value;
    j["tpr_at_fpr"] = tpr;
    j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    j["threshold"] = m.threshold;
    return j.dump(2);
}

}  // namespace u2g

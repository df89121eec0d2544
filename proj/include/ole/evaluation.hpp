#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ole {

// P(random ID score > random OOD score), ties counted one half.
double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

// Threshold t is the largest value with at least a tpr fraction of ID scores >= t;
// returns the fraction of OOD scores >= t.
double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores, double tpr = 0.95);

// The threshold used by fpr_at_tpr.
double tpr_threshold(const std::vector<double>& id_scores, double tpr = 0.95);

// Uniform bins over [lo, hi]; the last bin is closed on the right and
// out-of-range values land in the end bins.
std::vector<std::uint64_t> score_histogram(const std::vector<double>& scores, int bins, double lo, double hi);

struct HistogramSpec {
    int bins = 50;
    double lo = 0.0;
    double hi = 1.0;
};

struct DatasetResult {
    std::string name;
    double fpr95 = 0.0;
    double auroc = 0.0;
    std::vector<std::uint64_t> id_hist;
    std::vector<std::uint64_t> ood_hist;
};

struct DetectionReport {
    std::vector<DatasetResult> datasets;
    double average_fpr95 = 0.0;
    double average_auroc = 0.0;
    nlohmann::ordered_json config_echo = nlohmann::ordered_json::object();

    // Metrics rounded to 6 decimals, with full-precision copies under *_raw.
    nlohmann::ordered_json to_json() const;
    static DetectionReport from_json(const nlohmann::ordered_json& j);
};

DetectionReport evaluate(const std::vector<double>& id_scores,
                         const std::vector<std::pair<std::string, std::vector<double>>>& ood_sets,
                         const HistogramSpec& histogram = {});

}  // namespace ole

#include "ole/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "ole/errors.hpp"

namespace ole {

namespace {

void require_scores(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw ValidationError(std::string(what) + " score set is empty");
    for (double s : v)
        if (std::isnan(s)) throw ValidationError(std::string(what) + " scores contain NaN");
}

double round6(double v) {
    return std::round(v * 1e6) / 1e6;
}

}  // namespace

double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
    require_scores(id_scores, "ID");
    require_scores(ood_scores, "OOD");
    std::vector<double> id = id_scores;
    std::vector<double> ood = ood_scores;
    std::sort(id.begin(), id.end());
    std::sort(ood.begin(), ood.end());
    // Sweep tie groups in ascending order; counts stay integral (halves), so the sum is exact.
    double wins = 0.0;
    std::size_t i = 0, j = 0;
    while (i < id.size()) {
        const double v = id[i];
        std::size_t id_eq = 0;
        while (i < id.size() && id[i] == v) {
            ++i;
            ++id_eq;
        }
        while (j < ood.size() && ood[j] < v) ++j;
        std::size_t ood_eq = 0;
        while (j + ood_eq < ood.size() && ood[j + ood_eq] == v) ++ood_eq;
        wins += static_cast<double>(id_eq) * (static_cast<double>(j) + 0.5 * static_cast<double>(ood_eq));
    }
    return wins / (static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

double tpr_threshold(const std::vector<double>& id_scores, double tpr) {
    require_scores(id_scores, "ID");
    if (!(tpr > 0.0 && tpr <= 1.0)) throw ValidationError("tpr must lie in (0, 1]");
    std::vector<double> id = id_scores;
    std::sort(id.begin(), id.end(), std::greater<>());
    const double n = static_cast<double>(id.size());
    // Smallest count of ID scores that reaches the target rate; the guard absorbs
    // representation error in tpr * n (0.95 * 20 is 19.000000000000004).
    auto need = static_cast<std::size_t>(std::ceil(tpr * n - 1e-9));
    need = std::clamp<std::size_t>(need, 1, id.size());
    return id[need - 1];
}

double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores, double tpr) {
    require_scores(ood_scores, "OOD");
    const double t = tpr_threshold(id_scores, tpr);
    const auto hits = std::count_if(ood_scores.begin(), ood_scores.end(), [t](double s) { return s >= t; });
    return static_cast<double>(hits) / static_cast<double>(ood_scores.size());
}

std::vector<std::uint64_t> score_histogram(const std::vector<double>& scores, int bins, double lo, double hi) {
    if (bins < 1) throw ValidationError("histogram needs at least one bin");
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ValidationError("histogram range must satisfy lo < hi");
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins), 0);
    const double width = (hi - lo) / bins;
    for (double s : scores) {
        if (std::isnan(s)) throw ValidationError("histogram input contains NaN");
        long idx = 0;
        if (s >= hi) {
            idx = bins - 1;
        } else if (s > lo) {
            idx = static_cast<long>(std::floor((s - lo) / width));
            idx = std::clamp<long>(idx, 0, bins - 1);
        }
        ++counts[static_cast<std::size_t>(idx)];
    }
    return counts;
}

DetectionReport evaluate(const std::vector<double>& id_scores,
                         const std::vector<std::pair<std::string, std::vector<double>>>& ood_sets,
                         const HistogramSpec& histogram) {
    if (ood_sets.empty()) throw ValidationError("evaluation needs at least one OOD score set");
    require_scores(id_scores, "ID");
    DetectionReport report;
    const auto id_hist = score_histogram(id_scores, histogram.bins, histogram.lo, histogram.hi);
    for (const auto& [name, ood] : ood_sets) {
        DatasetResult r;
        r.name = name;
        r.fpr95 = fpr_at_tpr(id_scores, ood, 0.95);
        r.auroc = auroc(id_scores, ood);
        r.id_hist = id_hist;
        r.ood_hist = score_histogram(ood, histogram.bins, histogram.lo, histogram.hi);
        report.datasets.push_back(std::move(r));
    }
    double f = 0.0, a = 0.0;
    for (const auto& r : report.datasets) {
        f += r.fpr95;
        a += r.auroc;
    }
    report.average_fpr95 = f / static_cast<double>(report.datasets.size());
    report.average_auroc = a / static_cast<double>(report.datasets.size());
    return report;
}

nlohmann::ordered_json DetectionReport::to_json() const {
    nlohmann::ordered_json j;
    j["datasets"] = nlohmann::ordered_json::array();
    for (const auto& r : datasets) {
        nlohmann::ordered_json d;
        d["name"] = r.name;
        d["fpr95"] = round6(r.fpr95);
        d["auroc"] = round6(r.auroc);
        d["id_hist"] = r.id_hist;
        d["ood_hist"] = r.ood_hist;
        d["fpr95_raw"] = r.fpr95;
        d["auroc_raw"] = r.auroc;
        j["datasets"].push_back(std::move(d));
    }
    j["average"] = {{"fpr95", round6(average_fpr95)},
                    {"auroc", round6(average_auroc)},
                    {"fpr95_raw", average_fpr95},
                    {"auroc_raw", average_auroc}};
    j["config_echo"] = config_echo;
    return j;
}

DetectionReport DetectionReport::from_json(const nlohmann::ordered_json& j) {
    DetectionReport r;
    try {
        for (const auto& d : j.at("datasets")) {
            DatasetResult x;
            x.name = d.at("name").get<std::string>();
            x.fpr95 = d.contains("fpr95_raw") ? d.at("fpr95_raw").get<double>() : d.at("fpr95").get<double>();
            x.auroc = d.contains("auroc_raw") ? d.at("auroc_raw").get<double>() : d.at("auroc").get<double>();
            x.id_hist = d.at("id_hist").get<std::vector<std::uint64_t>>();
            x.ood_hist = d.at("ood_hist").get<std::vector<std::uint64_t>>();
            r.datasets.push_back(std::move(x));
        }
        const auto& avg = j.at("average");
        r.average_fpr95 = avg.contains("fpr95_raw") ? avg.at("fpr95_raw").get<double>() : avg.at("fpr95").get<double>();
        r.average_auroc = avg.contains("auroc_raw") ? avg.at("auroc_raw").get<double>() : avg.at("auroc").get<double>();
        if (j.contains("config_echo")) r.config_echo = j.at("config_echo");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    return r;
}

}  // namespace ole

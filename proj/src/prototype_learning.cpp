#include "ole/prototype_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ole/errors.hpp"

namespace ole {

std::vector<double> id_alignment_scores(const PrototypeSet& prototypes, const LabeledEmbeddings& id_embeddings) {
    if (id_embeddings.rows() == 0) throw ValidationError("ID embedding set is empty");
    if (prototypes.dim() != id_embeddings.dim())
        throw ValidationError("dimension mismatch: prototypes have " + std::to_string(prototypes.dim()) +
                              ", ID embeddings have " + std::to_string(id_embeddings.dim()));
    if (!id_embeddings.normalized()) throw ValidationError("ID embeddings must be normalized");
    const Matrix sims = prototypes.vectors() * id_embeddings.matrix().transpose();
    std::vector<double> scores(static_cast<std::size_t>(prototypes.size()));
    for (Eigen::Index k = 0; k < sims.rows(); ++k) scores[static_cast<std::size_t>(k)] = sims.row(k).maxCoeff();
    return scores;
}

double percentile_threshold(std::vector<double> scores, double p) {
    if (scores.empty()) throw ValidationError("percentile of an empty score set");
    if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");
    std::sort(scores.begin(), scores.end());
    const double rank = p / 100.0 * static_cast<double>(scores.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return scores[lo] + frac * (scores[hi] - scores[lo]);
}

Eigen::Index retained_count(Eigen::Index g, double p) {
    const auto m = static_cast<Eigen::Index>(std::floor(p * static_cast<double>(g) / 100.0));
    return std::max<Eigen::Index>(1, m);
}

RefineResult refine_prototypes(const PrototypeSet& prototypes, const LabeledEmbeddings& id_embeddings, double p) {
    if (prototypes.is_empty()) throw ValidationError("prototype set is empty");
    if (!(p > 0.0 && p <= 100.0)) throw ValidationError("refine percentile must lie in (0, 100]");
    RefineResult r;
    r.scores = id_alignment_scores(prototypes, id_embeddings);
    r.lambda = percentile_threshold(r.scores, p);
    std::vector<Eigen::Index> order(r.scores.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return r.scores[static_cast<std::size_t>(a)] < r.scores[static_cast<std::size_t>(b)];
    });
    const auto m = retained_count(prototypes.size(), p);
    r.kept.assign(order.begin(), order.begin() + m);
    std::sort(r.kept.begin(), r.kept.end());
    r.prototypes = prototypes.select(r.kept);
    return r;
}

}  // namespace ole

#include "ole/hard_prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ole/errors.hpp"
#include "ole/kmeans.hpp"
#include "ole/rng.hpp"

namespace ole {

namespace {

constexpr int kMixAttempts = 8;

double draw_alpha(Rng& rng, double lo, double hi) {
    for (;;) {
        const double a = lo + (hi - lo) * rng.uniform_open();
        if (a > lo && a < hi) return a;
    }
}

}  // namespace

void FringeConfig::validate() const {
    if (clusters < 1) throw ValidationError("fringe cluster count must be at least 1");
    if (per_cluster < 1) throw ValidationError("fringe per-cluster count must be at least 1");
    if (!(alpha_low >= 0.0 && alpha_low < alpha_high && alpha_high <= 1.0))
        throw ValidationError("alpha bounds must satisfy 0 <= alpha_low < alpha_high <= 1");
}

std::vector<Eigen::Index> cluster_id_classes(const LabeledEmbeddings& id_embeddings, Eigen::Index clusters,
                                             std::uint64_t seed) {
    if (clusters < 1) throw ValidationError("cluster count must be at least 1");
    if (clusters > id_embeddings.rows())
        throw ValidationError("cluster count " + std::to_string(clusters) + " exceeds the " +
                              std::to_string(id_embeddings.rows()) + " ID classes");
    return kmeans(id_embeddings.matrix(), clusters, seed).assignments;
}

std::vector<Eigen::Index> select_fringe(const LabeledEmbeddings& id_embeddings,
                                        const std::vector<Eigen::Index>& assignments, Eigen::Index m) {
    const Eigen::Index n = id_embeddings.rows();
    if (static_cast<Eigen::Index>(assignments.size()) != n)
        throw ValidationError("assignment count does not match ID row count");
    if (m < 1) throw ValidationError("fringe per-cluster count must be at least 1");
    if (!id_embeddings.normalized()) throw ValidationError("ID embeddings must be normalized");
    Eigen::Index clusters = 0;
    for (auto a : assignments) {
        if (a < 0) throw ValidationError("negative cluster assignment");
        clusters = std::max(clusters, a + 1);
    }
    const Matrix sims = id_embeddings.matrix() * id_embeddings.matrix().transpose();
    const Vector mean_sim = sims.rowwise().mean();
    std::vector<Eigen::Index> out;
    for (Eigen::Index c = 0; c < clusters; ++c) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i)
            if (assignments[static_cast<std::size_t>(i)] == c) members.push_back(i);
        std::stable_sort(members.begin(), members.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return mean_sim(a) < mean_sim(b); });
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(m), members.size());
        out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
    return out;
}

Eigen::Index nearest_prototype(const PrototypeSet& prototypes, const Eigen::Ref<const Eigen::RowVectorXd>& e) {
    if (prototypes.is_empty()) throw ValidationError("prototype set is empty");
    Eigen::Index best = 0;
    double best_s = prototypes.vectors().row(0).dot(e);
    for (Eigen::Index k = 1; k < prototypes.size(); ++k) {
        const double s = prototypes.vectors().row(k).dot(e);
        if (s > best_s) {
            best_s = s;
            best = k;
        }
    }
    return best;
}

Eigen::RowVectorXd mix_prototype(const Eigen::Ref<const Eigen::RowVectorXd>& o,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& e, double alpha) {
    if (alpha == 0.0) return o;
    Eigen::RowVectorXd mix = (1.0 - alpha) * o + alpha * e;
    const double norm = mix.norm();
    if (!(norm > 1e-12)) throw NumericError("mixture of prototype and fringe embedding has zero norm");
    return mix / norm;
}

PrototypeSet generate_hard_prototypes(const LabeledEmbeddings& fringe, const PrototypeSet& prototypes,
                                      const FringeConfig& config, const std::vector<Eigen::Index>& fringe_ids) {
    config.validate();
    if (prototypes.is_empty()) throw ValidationError("prototype set is empty");
    if (fringe.dim() != prototypes.dim()) throw ValidationError("dimension mismatch between fringe and prototypes");
    if (!fringe.normalized()) throw ValidationError("fringe embeddings must be normalized");
    if (!fringe_ids.empty() && static_cast<Eigen::Index>(fringe_ids.size()) != fringe.rows())
        throw ValidationError("fringe id count does not match fringe rows");

    Rng rng(config.seed);
    Matrix out(fringe.rows(), fringe.dim());
    std::vector<Provenance> prov;
    for (Eigen::Index j = 0; j < fringe.rows(); ++j) {
        const auto e = fringe.matrix().row(j);
        const auto parent = nearest_prototype(prototypes, e);
        const auto o = prototypes.vectors().row(parent);
        double alpha = 0.0;
        bool done = false;
        for (int attempt = 0; attempt < kMixAttempts && !done; ++attempt) {
            alpha = draw_alpha(rng, config.alpha_low, config.alpha_high);
            try {
                out.row(j) = mix_prototype(o, e, alpha);
                done = true;
            } catch (const NumericError&) {
            }
        }
        if (!done)
            throw NumericError("fringe row " + std::to_string(j) + " produced zero-norm mixes in " +
                               std::to_string(kMixAttempts) + " attempts");
        const Eigen::Index source = fringe_ids.empty() ? j : fringe_ids[static_cast<std::size_t>(j)];
        prov.push_back(Provenance::hard(source, parent, alpha));
    }
    return PrototypeSet(std::move(out), std::move(prov));
}

}  // namespace ole

#pragma once

#include <cstdint>
#include <vector>

#include "ole/embedding_store.hpp"
#include "ole/prototype_set.hpp"

namespace ole {

struct FringeConfig {
    Eigen::Index clusters = 5;            // C
    Eigen::Index per_cluster = 30;        // m
    double alpha_low = 0.0;
    double alpha_high = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

// k-means cluster of every ID row; all clusters non-empty.
std::vector<Eigen::Index> cluster_id_classes(const LabeledEmbeddings& id_embeddings, Eigen::Index clusters,
                                             std::uint64_t seed);

// Per cluster, the m members with the lowest mean inner product to all ID rows.
// Returned in (cluster, rank) order.
std::vector<Eigen::Index> select_fringe(const LabeledEmbeddings& id_embeddings,
                                        const std::vector<Eigen::Index>& assignments, Eigen::Index m);

// Index of the prototype with the largest inner product with e; ties to the smaller index.
Eigen::Index nearest_prototype(const PrototypeSet& prototypes, const Eigen::Ref<const Eigen::RowVectorXd>& e);

// normalize((1 - alpha) o + alpha e). alpha = 0 returns o unchanged.
// Throws NumericError when the mix has zero norm.
Eigen::RowVectorXd mix_prototype(const Eigen::Ref<const Eigen::RowVectorXd>& o,
                                 const Eigen::Ref<const Eigen::RowVectorXd>& e, double alpha);

// One hard prototype per fringe row, mixed with its nearest prototype at a
// random alpha in (alpha_low, alpha_high). fringe_ids names the source row of
// each fringe embedding for provenance; defaults to 0..n-1.
PrototypeSet generate_hard_prototypes(const LabeledEmbeddings& fringe, const PrototypeSet& prototypes,
                                      const FringeConfig& config, const std::vector<Eigen::Index>& fringe_ids = {});

}  // namespace ole

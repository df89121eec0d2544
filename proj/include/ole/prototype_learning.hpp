#pragma once

#include <vector>

#include "ole/embedding_store.hpp"
#include "ole/prototype_set.hpp"

namespace ole {

// Per prototype, the largest inner product with any ID class embedding.
std::vector<double> id_alignment_scores(const PrototypeSet& prototypes, const LabeledEmbeddings& id_embeddings);

// Linear-interpolation percentile: rank p/100 * (n-1) into the sorted scores.
double percentile_threshold(std::vector<double> scores, double p);

// Number of prototypes kept out of g at percentile p: max(1, floor(p*g/100)).
Eigen::Index retained_count(Eigen::Index g, double p);

struct RefineResult {
    PrototypeSet prototypes;
    double lambda = 0.0;                // percentile of the alignment scores, diagnostic only
    std::vector<double> scores;         // alignment score of every input prototype
    std::vector<Eigen::Index> kept;     // retained input indices, ascending
};

// Keeps the retained_count(G, p) prototypes least aligned with the ID classes.
// Ties go to the smaller index; survivors keep their input order.
RefineResult refine_prototypes(const PrototypeSet& prototypes, const LabeledEmbeddings& id_embeddings, double p = 10.0);

}  // namespace ole

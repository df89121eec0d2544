#pragma once

// Slow, direct reference computations used to check the library.

#include <vector>

#include "ole/types.hpp"

namespace oracle {

// Pairwise counting with half credit for ties.
double auroc(const std::vector<double>& id, const std::vector<double>& ood);

// Tries every ID score as a threshold and keeps the largest one whose ID
// acceptance rate reaches tpr; comparisons in extended precision.
// Rate given as the exact fraction num/den.
double fpr_sweep(const std::vector<double>& id, const std::vector<double>& ood, long num, long den);

// Direct density sum, no log-sum-exp shift.
double naive_loglik(const ole::Matrix& data, const ole::Vector& weights, const ole::Matrix& means,
                    const ole::Matrix& variances);

// Best 2-means centers by enumerating every split of the rows. Rows <= 20.
ole::Matrix best_two_partition(const ole::Matrix& data, std::vector<int>* labels = nullptr);

// Softmax evaluated term by term without a shift.
std::vector<double> softmax(const std::vector<double>& logits, const std::vector<double>& extra = {});

}  // namespace oracle

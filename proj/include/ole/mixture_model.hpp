#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ole/embedding_store.hpp"
#include "ole/prototype_set.hpp"

namespace ole {

struct EmConfig {
    int max_iterations = 200;
    double convergence_tolerance = 1e-6;  // absolute change in total log-likelihood
    double variance_floor = 1e-6;
    std::uint64_t seed = 0;

    void validate() const;
};

// Diagonal-covariance Gaussian mixture.
struct GmmModel {
    Matrix means;                      // K x d
    Matrix variances;                  // K x d
    Vector weights;                    // K
    std::vector<double> loglik_trace;  // one entry per E-step, initial parameters first

    Eigen::Index components() const { return means.rows(); }
    Eigen::Index dim() const { return means.cols(); }

    void validate(double variance_floor = 0.0) const;
};

// EM from k-means initial means, uniform weights, and within-cluster variances.
// Stops after max_iterations M-steps or when the log-likelihood changes by less
// than the tolerance. Rows are visited in value order, so row permutations do
// not change the result.
GmmModel fit_gmm(const LabeledEmbeddings& data, Eigen::Index k, const EmConfig& config = {});

double log_likelihood(const GmmModel& model, const LabeledEmbeddings& data);
double log_likelihood(const GmmModel& model, const Matrix& data);

// Component means renormalized to the unit sphere.
PrototypeSet extract_prototypes(const GmmModel& model);

void save_gmm(const GmmModel& model, const std::filesystem::path& path);
GmmModel load_gmm(const std::filesystem::path& path);

}  // namespace ole

#pragma once

#include <cstdint>
#include <vector>

#include "ole/embedding_store.hpp"

namespace ole {

struct KMeansResult {
    Matrix centers;                          // K x d
    std::vector<Eigen::Index> assignments;   // per input row, in input order
    int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations, Euclidean distance.
// Rows are processed in lexicographic value order, so the result depends on
// the seed and the multiset of rows but not on their input order. Every
// cluster ends non-empty: empty clusters are re-seeded from the point farthest
// from its center.
KMeansResult kmeans(const Matrix& data, Eigen::Index k, std::uint64_t seed, int max_iterations = 300);

// Centers only. Requires 1 <= K <= n and normalized data.
Matrix kmeans_init(const LabeledEmbeddings& data, Eigen::Index k, std::uint64_t seed);

// Lexicographic order of rows by value; ties keep input order.
std::vector<Eigen::Index> value_order(const Matrix& data);

}  // namespace ole

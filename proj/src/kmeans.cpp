#include "ole/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "ole/errors.hpp"
#include "ole/rng.hpp"

namespace ole {

namespace {

Eigen::Index nearest(const Matrix& centers, const Eigen::Ref<const Eigen::RowVectorXd>& x, double* dist) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double dd = (centers.row(c) - x).squaredNorm();
        if (dd < best_d) {
            best_d = dd;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

Matrix seed_plus_plus(const Matrix& x, Eigen::Index k, Rng& rng) {
    const Eigen::Index n = x.rows();
    Matrix centers(k, x.cols());
    centers.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (x.row(i) - centers.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (target < acc && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[static_cast<std::size_t>(pick)] == 0.0) --pick;
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centers.row(c) = x.row(pick);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] =
                std::min(d2[static_cast<std::size_t>(i)], (x.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

// Moves points into empty clusters. The donor is the point farthest from its
// center among clusters with more than one member.
bool fill_empty(const Matrix& x, Matrix& centers, std::vector<Eigen::Index>& assign) {
    const Eigen::Index k = centers.rows();
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (auto a : assign) ++counts[static_cast<std::size_t>(a)];
    bool changed = false;
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        Eigen::Index donor = -1;
        double worst = -1.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const auto a = assign[static_cast<std::size_t>(i)];
            if (counts[static_cast<std::size_t>(a)] < 2) continue;
            const double dd = (x.row(i) - centers.row(a)).squaredNorm();
            if (dd > worst) {
                worst = dd;
                donor = i;
            }
        }
        if (donor < 0) break;
        --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(donor)])];
        assign[static_cast<std::size_t>(donor)] = c;
        counts[static_cast<std::size_t>(c)] = 1;
        centers.row(c) = x.row(donor);
        changed = true;
    }
    return changed;
}

void update_centers(const Matrix& x, const std::vector<Eigen::Index>& assign, Matrix& centers) {
    const Eigen::Index k = centers.rows();
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto a = assign[static_cast<std::size_t>(i)];
        sums.row(a) += x.row(i);
        ++counts[static_cast<std::size_t>(a)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0)
            centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
}

}  // namespace

std::vector<Eigen::Index> value_order(const Matrix& data) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            if (data(a, c) < data(b, c)) return true;
            if (data(b, c) < data(a, c)) return false;
        }
        return false;
    });
    return order;
}

KMeansResult kmeans(const Matrix& data, Eigen::Index k, std::uint64_t seed, int max_iterations) {
    const Eigen::Index n = data.rows();
    if (k <= 0) throw ValidationError("k-means needs K >= 1");
    if (k > n) throw ValidationError("k-means needs K <= n (K=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");

    const auto order = value_order(data);
    Matrix x(n, data.cols());
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = data.row(order[static_cast<std::size_t>(i)]);

    Rng rng(seed);
    KMeansResult result;
    result.centers = seed_plus_plus(x, k, rng);
    std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto a = nearest(result.centers, x.row(i), nullptr);
            if (a != assign[static_cast<std::size_t>(i)]) {
                assign[static_cast<std::size_t>(i)] = a;
                changed = true;
            }
        }
        changed = fill_empty(x, result.centers, assign) || changed;
        result.iterations = it + 1;
        if (!changed) break;
        update_centers(x, assign, result.centers);
    }
    fill_empty(x, result.centers, assign);

    result.assignments.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i)
        result.assignments[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = assign[static_cast<std::size_t>(i)];
    return result;
}

Matrix kmeans_init(const LabeledEmbeddings& data, Eigen::Index k, std::uint64_t seed) {
    if (!data.normalized()) throw ValidationError("k-means initialization expects normalized data");
    return kmeans(data.matrix(), k, seed).centers;
}

}  // namespace ole

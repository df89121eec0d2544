#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "ole/errors.hpp"
#include "ole/prototype_learning.hpp"
#include "test_util.hpp"

using namespace ole;

namespace {

PrototypeSet learned_set(const Matrix& m) {
    std::vector<Provenance> prov;
    for (Eigen::Index i = 0; i < m.rows(); ++i) prov.push_back(Provenance::learned(i));
    return PrototypeSet(m, prov);
}

LabeledEmbeddings basis2() {
    Matrix m(2, 2);
    m << 1, 0, 0, 1;
    return LabeledEmbeddings(m, {}, true);
}

// Prototypes in the plane whose alignment with the single ID row (1,0) is scores[i].
PrototypeSet with_scores(const std::vector<double>& scores) {
    Matrix m(static_cast<Eigen::Index>(scores.size()), 2);
    for (std::size_t i = 0; i < scores.size(); ++i) m.row(static_cast<Eigen::Index>(i)) << scores[i], std::sqrt(1 - scores[i] * scores[i]);
    return learned_set(m);
}

LabeledEmbeddings id_x() {
    Matrix m(1, 2);
    m << 1, 0;
    return LabeledEmbeddings(m, {}, true);
}

}  // namespace

TEST(AlignmentScores, Examples) {
    Matrix p(3, 2);
    const double h = std::sqrt(0.5);
    p << 1, 0, h, h, -1, 0;
    const auto s = id_alignment_scores(learned_set(p), basis2());
    EXPECT_DOUBLE_EQ(s[0], 1.0);
    EXPECT_NEAR(s[1], 0.7071, 1e-4);
    const auto anti = id_alignment_scores(learned_set(p.bottomRows(1)), id_x());
    EXPECT_DOUBLE_EQ(anti[0], -1.0);
}

TEST(AlignmentScores, Errors) {
    Matrix p(1, 2);
    p << 1, 0;
    EXPECT_THROW(id_alignment_scores(learned_set(p), LabeledEmbeddings::empty(2)), ValidationError);
    Matrix q(1, 3);
    q << 1, 0, 0;
    EXPECT_THROW(id_alignment_scores(learned_set(q), basis2()), ValidationError);
}

TEST(Percentile, Examples) {
    EXPECT_NEAR(percentile_threshold({0.1, 0.2, 0.3, 0.4}, 50), 0.25, 1e-15);
    EXPECT_EQ(percentile_threshold({0.4, 0.1, 0.3}, 0), 0.1);
    EXPECT_EQ(percentile_threshold({0.4, 0.1, 0.3}, 100), 0.4);
    for (double p : {0.0, 13.0, 50.0, 100.0}) EXPECT_EQ(percentile_threshold({0.5}, p), 0.5);
    EXPECT_THROW(percentile_threshold({}, 10), ValidationError);
    EXPECT_THROW(percentile_threshold({1.0}, 101), ValidationError);
    EXPECT_THROW(percentile_threshold({1.0}, -1), ValidationError);
}

TEST(Refine, KeepsLeastAlignedByRank) {
    std::vector<double> scores;
    for (int i = 0; i < 10; ++i) scores.push_back(i / 10.0);
    const auto r = refine_prototypes(with_scores(scores), id_x(), 10);
    ASSERT_EQ(r.kept, std::vector<Eigen::Index>{0});
    EXPECT_EQ(r.prototypes.size(), 1);
    EXPECT_EQ(r.prototypes.provenance()[0].component, 0);
}

TEST(Refine, FiveHundredToFifty) {
    std::mt19937_64 rng(10);
    const auto protos = learned_set(testutil::random_unit_rows(rng, 500, 16));
    const LabeledEmbeddings id(testutil::random_unit_rows(rng, 20, 16), {}, true);
    EXPECT_EQ(refine_prototypes(protos, id, 10).prototypes.size(), 50);
}

TEST(Refine, TiesGoToSmallerIndex) {
    const auto r = refine_prototypes(with_scores({0.3, 0.3, 0.3, 0.3}), id_x(), 50);
    EXPECT_EQ(r.kept, (std::vector<Eigen::Index>{0, 1}));
}

TEST(Refine, KeepsAtLeastOneAndAllAtHundred) {
    const auto protos = with_scores({0.9, 0.1, 0.5});
    EXPECT_EQ(refine_prototypes(protos, id_x(), 5).kept, std::vector<Eigen::Index>{1});
    EXPECT_EQ(refine_prototypes(protos, id_x(), 100).prototypes.size(), 3);
    EXPECT_THROW(refine_prototypes(PrototypeSet::empty(2), id_x(), 10), ValidationError);
}

TEST(Refine, ReportsPercentileLambda) {
    const auto r = refine_prototypes(with_scores({0.1, 0.2, 0.3, 0.4}), id_x(), 50);
    EXPECT_NEAR(r.lambda, 0.25, 1e-12);
}

TEST(Refine, RandomizedRankProperties) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> gsize(10, 300);
    for (int trial = 0; trial < 40; ++trial) {
        const int g = gsize(rng);
        const auto protos = learned_set(testutil::random_unit_rows(rng, g, 8));
        const LabeledEmbeddings id(testutil::random_unit_rows(rng, 7, 8), {}, true);
        std::set<Eigen::Index> prev;
        for (double p : {5.0, 10.0, 25.0, 50.0}) {
            const auto r = refine_prototypes(protos, id, p);
            const auto m = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(p * g / 100.0)));
            ASSERT_EQ(r.prototypes.size(), m);
            EXPECT_TRUE(std::is_sorted(r.kept.begin(), r.kept.end()));
            std::set<Eigen::Index> kept(r.kept.begin(), r.kept.end());
            double worst_kept = -2, best_removed = 2;
            for (Eigen::Index i = 0; i < g; ++i) {
                const double s = r.scores[static_cast<std::size_t>(i)];
                if (kept.count(i)) worst_kept = std::max(worst_kept, s);
                else best_removed = std::min(best_removed, s);
            }
            EXPECT_LE(worst_kept, best_removed);
            EXPECT_TRUE(std::includes(kept.begin(), kept.end(), prev.begin(), prev.end()));
            prev = kept;
        }
    }
}

TEST(Refine, PermutationMovesSameVectors) {
    std::mt19937_64 rng(31);
    const Matrix m = testutil::random_unit_rows(rng, 60, 6);
    const LabeledEmbeddings id(testutil::random_unit_rows(rng, 5, 6), {}, true);
    std::vector<Eigen::Index> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix p(60, 6);
    for (int i = 0; i < 60; ++i) p.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
    const auto a = refine_prototypes(learned_set(m), id, 25).prototypes.vectors();
    const auto b = refine_prototypes(learned_set(p), id, 25).prototypes.vectors();
    ASSERT_EQ(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        bool found = false;
        for (Eigen::Index j = 0; j < b.rows(); ++j) found = found || a.row(i) == b.row(j);
        EXPECT_TRUE(found);
    }
}

TEST(PrototypeSet, LabelsRoundTrip) {
    testutil::TempDir dir;
    Matrix m(2, 2);
    m << 1, 0, 0, 1;
    const PrototypeSet set(m, {Provenance::learned(7), Provenance::hard(3, 1, 0.25)});
    EXPECT_EQ(set.provenance()[0].label(), "learned:7");
    EXPECT_EQ(set.provenance()[1].label(), "hard:3:1:0.250000");
    save_prototypes(set, dir / "p.emb");
    const auto back = load_prototypes(dir / "p.emb");
    EXPECT_EQ(back.vectors(), set.vectors());
    EXPECT_EQ(back.provenance()[0].component, 7);
    EXPECT_EQ(back.provenance()[1].tag, PrototypeTag::hard);
    EXPECT_EQ(back.provenance()[1].fringe, 3);
    EXPECT_EQ(back.provenance()[1].prototype, 1);
    EXPECT_DOUBLE_EQ(back.provenance()[1].alpha, 0.25);
    EXPECT_THROW(Provenance::parse("hard:1:x:0.1"), ValidationError);
    EXPECT_THROW(Provenance::parse("other"), ValidationError);
}

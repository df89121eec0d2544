#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ole/errors.hpp"
#include "ole/scoring.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ole;

namespace {

const double kE = std::exp(1.0);

PrototypeSet learned_set(const Matrix& m) {
    std::vector<Provenance> prov;
    for (Eigen::Index i = 0; i < m.rows(); ++i) prov.push_back(Provenance::learned(i));
    return PrototypeSet(m, prov);
}

Matrix basis2() {
    Matrix m(2, 2);
    m << 1, 0, 0, 1;
    return m;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST(YesProbabilities, TwoWaySoftmax) {
    const ScoringContext ctx(basis2(), PrototypeSet::empty(2), 1.0);
    const auto p = yes_probabilities(vec2(1, 0), ctx);
    EXPECT_NEAR(p(0), 0.731059, 1e-6);
    EXPECT_NEAR(p(1), 0.268941, 1e-6);
    const auto ref = oracle::softmax({1.0, 0.0});
    EXPECT_NEAR(p(0), ref[0], 1e-15);
}

TEST(YesProbabilities, UniformAndOneHot) {
    const double h = std::sqrt(0.5);
    const ScoringContext ctx(basis2(), PrototypeSet::empty(2), 0.01);
    const auto u = yes_probabilities(vec2(h, h), ctx);
    EXPECT_NEAR(u(0), 0.5, 1e-12);
    const ScoringContext cold(basis2(), PrototypeSet::empty(2), 0.001);
    const auto p = yes_probabilities(vec2(1, 0), cold);
    EXPECT_NEAR(p(0), 1.0, 1e-9);
    EXPECT_NEAR(p(1), 0.0, 1e-9);
    EXPECT_THROW(yes_probabilities(Vector::Zero(3), ctx), ValidationError);
}

TEST(YesProbabilitiesOle, WorkedValues) {
    Matrix e1(1, 2);
    e1 << 1, 0;
    Matrix o1(1, 2);
    o1 << 1, 0;
    const ScoringContext one(e1, learned_set(o1), 1.0);
    EXPECT_NEAR(yes_probabilities_ole(vec2(1, 0), one)(0), 0.5, 1e-12);
    EXPECT_NEAR(yes_probabilities(vec2(1, 0), one)(0), 1.0, 1e-12);

    const ScoringContext two(basis2(), learned_set(o1), 1.0);
    const auto p = yes_probabilities_ole(vec2(1, 0), two);
    EXPECT_NEAR(p(0), kE / (2 * kE + 1), 1e-12);
    EXPECT_NEAR(p(1), 1.0 / (2 * kE + 1), 1e-12);
    const auto ref = oracle::softmax({1.0, 0.0}, {1.0});
    EXPECT_NEAR(p(1), ref[1], 1e-15);
}

TEST(YesProbabilitiesOle, NoPrototypesIsPlainSoftmax) {
    std::mt19937_64 rng(1);
    const Matrix id = testutil::random_unit_rows(rng, 6, 5);
    const ScoringContext ctx(id, PrototypeSet::empty(5), 0.05);
    for (int t = 0; t < 50; ++t) {
        const Vector x = testutil::random_unit_rows(rng, 1, 5).row(0).transpose();
        EXPECT_EQ(yes_probabilities_ole(x, ctx), yes_probabilities(x, ctx));
    }
}

TEST(NoProbabilities, StoredAndDerived) {
    Matrix stored(2, 2);
    stored << 0.2, 0.9, 0.4, 0.1;
    const ScoringContext s(basis2(), PrototypeSet::empty(2), 1.0, NoProbabilities{stored});
    EXPECT_EQ(no_probabilities(vec2(1, 0), s, 0), vec2(0.2, 0.9));
    EXPECT_EQ(no_probabilities(vec2(1, 0), s, 1), vec2(0.4, 0.1));
    EXPECT_THROW(no_probabilities(vec2(1, 0), s, 2), ValidationError);

    Matrix no(2, 2);
    no << 1, 0, 0, 1;
    const ScoringContext same(basis2(), PrototypeSet::empty(2), 1.0, NoEmbeddings{no});
    const auto half = no_probabilities(vec2(0.6, 0.8), same);
    EXPECT_NEAR(half(0), 0.5, 1e-15);
    EXPECT_NEAR(half(1), 0.5, 1e-15);

    Matrix e(1, 2), n(1, 2);
    e << 0, 1;
    n << 1, 0;
    const ScoringContext tilted(e, PrototypeSet::empty(2), 1.0, NoEmbeddings{n});
    EXPECT_NEAR(no_probabilities(vec2(1, 0), tilted)(0), kE / (1 + kE), 1e-12);
    EXPECT_NEAR(no_probabilities(vec2(1, 0), tilted)(0), 0.731059, 1e-6);

    const ScoringContext none(basis2(), PrototypeSet::empty(2), 1.0);
    EXPECT_THROW(no_probabilities(vec2(1, 0), none), ValidationError);
}

TEST(NoProbabilities, RangeValidated) {
    Matrix bad(1, 2);
    bad << 0.5, 1.5;
    EXPECT_THROW(ScoringContext(basis2(), PrototypeSet::empty(2), 1.0, NoProbabilities{bad}), ValidationError);
    EXPECT_THROW(ScoringContext(basis2(), PrototypeSet::empty(2), 0.0), ValidationError);
}

TEST(IdScore, ClipnWorkedValues) {
    Matrix e(1, 2);
    e << 1, 0;
    Matrix half(1, 1);
    half << 0.5;
    const ScoringContext ctx(e, PrototypeSet::empty(2), 1.0, NoProbabilities{half});
    EXPECT_NEAR(id_score(vec2(1, 0), ctx, ScoreMethod::clipn), 0.5, 1e-12);

    Matrix zero(1, 1);
    zero << 0.0;
    Matrix o(1, 2);
    o << 1, 0;
    const ScoringContext ole_ctx(e, learned_set(o), 1.0, NoProbabilities{zero});
    EXPECT_NEAR(id_score(vec2(1, 0), ole_ctx, ScoreMethod::clipn_ole), 0.5, 1e-12);
    EXPECT_NEAR(id_score(vec2(1, 0), ole_ctx, ScoreMethod::clipn), 1.0, 1e-12);
}

TEST(IdScore, ClipnWithoutNoBranchIsDegenerate) {
    std::mt19937_64 rng(2);
    const Matrix id = testutil::random_unit_rows(rng, 4, 3);
    const ScoringContext ctx(id, PrototypeSet::empty(3), 0.1, NoProbabilities{Matrix::Zero(20, 4)});
    for (int i = 0; i < 20; ++i) {
        const Vector x = testutil::random_unit_rows(rng, 1, 3).row(0).transpose();
        EXPECT_NEAR(id_score(x, ctx, ScoreMethod::clipn, i), 1.0, 1e-12);
    }
}

TEST(IdScore, BaselinesAndErrors) {
    const ScoringContext ctx(basis2(), PrototypeSet::empty(2), 0.5);
    const Vector x = vec2(0.6, 0.8);
    EXPECT_DOUBLE_EQ(id_score(x, ctx, ScoreMethod::maxlogit), 0.8);
    EXPECT_NEAR(id_score(x, ctx, ScoreMethod::energy), 0.5 * std::log(std::exp(1.2) + std::exp(1.6)), 1e-12);
    EXPECT_NEAR(id_score(x, ctx, ScoreMethod::mcm), oracle::softmax({1.2, 1.6})[1], 1e-12);
    EXPECT_THROW(id_score(x, ctx, ScoreMethod::clipn), ValidationError);
    EXPECT_THROW(id_score(x, ctx, ScoreMethod::clipn_ole), ValidationError);
    EXPECT_EQ(parse_method("clipn_ole"), ScoreMethod::clipn_ole);
    EXPECT_THROW(parse_method("msp"), ValidationError);
}

TEST(IdScore, PrototypeProperties) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> tau(0.1, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix id = testutil::random_unit_rows(rng, 5, 6);
        const Matrix protos = testutil::random_unit_rows(rng, 4, 6);
        const Matrix no = testutil::random_unit_rows(rng, 5, 6);
        const double t = tau(rng);
        const ScoringContext base(id, PrototypeSet::empty(6), t, NoEmbeddings{no});
        const ScoringContext with(id, learned_set(protos), t, NoEmbeddings{no});
        Matrix reversed = protos.colwise().reverse();
        const ScoringContext permuted(id, learned_set(reversed), t, NoEmbeddings{no});
        const Vector x = testutil::random_unit_rows(rng, 1, 6).row(0).transpose();

        const auto plain = yes_probabilities(x, base);
        const auto ole = yes_probabilities_ole(x, with);
        Eigen::Index a = 0, b = 0;
        plain.maxCoeff(&a);
        ole.maxCoeff(&b);
        EXPECT_EQ(a, b);
        EXPECT_TRUE((ole.array() < plain.array()).all());
        EXPECT_LE(ole.sum(), 1.0);
        EXPECT_NEAR(plain.sum(), 1.0, 1e-9);
        EXPECT_NEAR(id_score(x, with, ScoreMethod::clipn_ole), id_score(x, permuted, ScoreMethod::clipn_ole), 1e-12);
        EXPECT_EQ(id_score(x, with, ScoreMethod::energy), id_score(x, base, ScoreMethod::energy));
        EXPECT_EQ(id_score(x, with, ScoreMethod::maxlogit), id_score(x, base, ScoreMethod::maxlogit));
    }
}

TEST(IdScore, FiniteAtTinyTemperature) {
    std::mt19937_64 rng(4);
    const Matrix id = testutil::random_unit_rows(rng, 10, 8);
    const ScoringContext ctx(id, learned_set(testutil::random_unit_rows(rng, 20, 8)), 1e-4,
                             NoEmbeddings{testutil::random_unit_rows(rng, 10, 8)});
    for (int i = 0; i < 50; ++i) {
        const Vector x = testutil::random_unit_rows(rng, 1, 8).row(0).transpose();
        for (auto m : {ScoreMethod::mcm, ScoreMethod::maxlogit, ScoreMethod::energy, ScoreMethod::clipn,
                       ScoreMethod::mcm_ole, ScoreMethod::clipn_ole})
            EXPECT_TRUE(std::isfinite(id_score(x, ctx, m)));
    }
}

TEST(ScoreBatch, MatchesSingleScoresAndCsvRoundTrips) {
    testutil::TempDir dir;
    std::mt19937_64 rng(5);
    const Matrix id = testutil::random_unit_rows(rng, 4, 5);
    const ScoringContext ctx(id, learned_set(testutil::random_unit_rows(rng, 3, 5)), 0.01,
                             NoEmbeddings{testutil::random_unit_rows(rng, 4, 5)});
    const Matrix imgs = testutil::random_unit_rows(rng, 300, 5);
    std::vector<std::string> labels;
    for (int i = 0; i < 300; ++i) labels.push_back(i % 7 ? "img" + std::to_string(i) : "a,\"b\"");
    const LabeledEmbeddings images(imgs, labels, true);
    const auto s = score_batch(images, ctx, ScoreMethod::clipn_ole);
    for (int i = 0; i < 300; ++i) EXPECT_EQ(s[static_cast<std::size_t>(i)], id_score(imgs.row(i).transpose(), ctx, ScoreMethod::clipn_ole, i));
    write_scores_csv(dir / "s.csv", images, s);
    EXPECT_EQ(read_scores_csv(dir / "s.csv"), s);
}

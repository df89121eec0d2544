#include <cstring>

#include <gtest/gtest.h>

#include "ole/errors.hpp"
#include "ole/synthetic.hpp"
#include "test_util.hpp"

using namespace ole;

TEST(Synthetic, CountsMatchConfig) {
    SynthConfig c;
    const auto w = generate_world(c);
    EXPECT_EQ(w.id_class_embeddings.rows(), c.id_classes);
    EXPECT_EQ(w.outlier_label_embeddings.rows(), c.outlier_labels);
    EXPECT_EQ(w.no_embeddings.rows(), c.id_classes);
    EXPECT_EQ(w.id_test_images.rows(), c.id_classes * c.id_test_per_class);
    EXPECT_EQ(w.ood_test_images.rows(), c.ood_test_count);
    EXPECT_EQ(static_cast<Eigen::Index>(w.id_truth.size()), w.id_test_images.rows());
    EXPECT_EQ(static_cast<Eigen::Index>(w.ood_truth.size()), w.ood_test_images.rows());
    for (const auto* e : {&w.id_class_embeddings, &w.outlier_label_embeddings, &w.no_embeddings, &w.id_test_images,
                          &w.ood_test_images}) {
        EXPECT_TRUE(e->normalized());
        EXPECT_EQ(e->dim(), c.dim);
    }
    Eigen::Index hard = 0;
    for (const auto& t : w.ood_truth) hard += t.source.rfind("hard:", 0) == 0;
    EXPECT_EQ(hard, 150);
}

TEST(Synthetic, SameSeedSameWorld) {
    SynthConfig c;
    c.seed = 3;
    const auto a = generate_world(c);
    const auto b = generate_world(c);
    EXPECT_TRUE(a.outlier_label_embeddings.identical(b.outlier_label_embeddings));
    EXPECT_TRUE(a.ood_test_images.identical(b.ood_test_images));
    EXPECT_TRUE(a.id_test_images.identical(b.id_test_images));
    c.seed = 4;
    EXPECT_FALSE(generate_world(c).ood_test_images.identical(a.ood_test_images));
}

TEST(Synthetic, SynonymsCloserToIdThanCleanLabels) {
    for (std::uint64_t seed : {1, 7, 19}) {
        SynthConfig c;
        c.seed = seed;
        const auto w = generate_world(c);
        const Matrix sims = w.outlier_label_embeddings.matrix() * w.id_directions.transpose();
        const Eigen::Index clean = c.outlier_labels - c.noise_synonyms;
        const double clean_max = sims.topRows(clean).maxCoeff();
        const double synonym_min = sims.bottomRows(c.noise_synonyms).rowwise().maxCoeff().minCoeff();
        EXPECT_GT(synonym_min, clean_max) << "seed " << seed;
    }
}

TEST(Synthetic, OodCloserToOutlierConcepts) {
    for (std::uint64_t seed : {2, 7, 11}) {
        SynthConfig c;
        c.seed = seed;
        const auto w = generate_world(c);
        const auto mean_max = [&](const LabeledEmbeddings& imgs) {
            return (imgs.matrix() * w.concept_directions.transpose()).rowwise().maxCoeff().mean();
        };
        EXPECT_GT(mean_max(w.ood_test_images), mean_max(w.id_test_images)) << "seed " << seed;
    }
}

TEST(Synthetic, DirectionsRespectSeparation) {
    SynthConfig c;
    const auto w = generate_world(c);
    Matrix all(c.id_classes + c.outlier_concepts, c.dim);
    all << w.id_directions, w.concept_directions;
    const Matrix g = all * all.transpose();
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = i + 1; j < g.cols(); ++j) EXPECT_LE(g(i, j), std::cos(2 * c.concept_spread) + 1e-12);
}

TEST(Synthetic, OvercrowdedSphereFails) {
    SynthConfig c;
    c.dim = 3;
    c.concept_spread = 0.8;
    c.id_classes = 20;
    EXPECT_THROW(generate_world(c), ValidationError);
    SynthConfig bad;
    bad.noise_synonyms = bad.outlier_labels + 1;
    EXPECT_THROW(generate_world(bad), ValidationError);
}

TEST(Synthetic, WritesFiles) {
    testutil::TempDir dir;
    SynthConfig c;
    c.id_test_per_class = 2;
    c.ood_test_count = 10;
    const auto w = generate_world(c);
    write_world(w, c, dir.path());
    for (const char* f : {"id_classes.emb", "outlier_labels.emb", "no_embeddings.emb", "id_test.emb", "ood_test.emb",
                          "ground_truth.csv", "world.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    const auto back = load_embeddings(dir / "ood_test.emb", FileFormat::binary);
    EXPECT_TRUE(back.identical(w.ood_test_images));
    const auto truth = testutil::read_bytes(dir / "ground_truth.csv");
    const std::string text(truth.begin(), truth.end());
    EXPECT_EQ(text.rfind("index,split,concept\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 40 + 10);
}

#include "ole/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ole/errors.hpp"
#include "ole/rng.hpp"

namespace ole {

namespace {

constexpr int kPlacementAttempts = 1000;

class Builder {
public:
    explicit Builder(const SynthConfig& c) : cfg_(c), rng_(c.seed), d_(c.dim) {}

    Eigen::RowVectorXd unit(Eigen::RowVectorXd v) const {
        const double n = v.norm();
        if (!(n > 0.0)) throw NumericError("synthetic generator produced a zero vector");
        return v / n;
    }

    // Gaussian direction in the text subspace.
    Eigen::RowVectorXd text_direction() {
        Eigen::RowVectorXd v(d_);
        v(0) = 0.0;
        for (Eigen::Index j = 1; j < d_; ++j) v(j) = rng_.normal();
        return unit(v);
    }

    // Directions with pairwise angle at least min_angle, placed by rejection.
    Matrix separated_directions(Eigen::Index count, double min_angle, std::vector<Eigen::RowVectorXd>& placed) {
        const double max_cos = std::cos(min_angle);
        Matrix out(count, d_);
        for (Eigen::Index i = 0; i < count; ++i) {
            bool ok = false;
            for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
                const auto v = text_direction();
                ok = std::all_of(placed.begin(), placed.end(), [&](const auto& p) { return p.dot(v) <= max_cos; });
                if (ok) {
                    placed.push_back(v);
                    out.row(i) = v;
                }
            }
            if (!ok)
                throw ValidationError("could not place direction " + std::to_string(i) + " with the required separation in " +
                                      std::to_string(kPlacementAttempts) + " attempts; the sphere is overcrowded");
        }
        return out;
    }

    // Perturbation with angular scale s inside the text subspace.
    Eigen::RowVectorXd perturb(const Eigen::RowVectorXd& c, double s) {
        Eigen::RowVectorXd v = c;
        const double scale = s / std::sqrt(static_cast<double>(d_ - 1));
        for (Eigen::Index j = 1; j < d_; ++j) v(j) += rng_.normal() * scale;
        return unit(v);
    }

    Eigen::RowVectorXd image(const Eigen::RowVectorXd& content) {
        Eigen::RowVectorXd v = content;
        const double scale = cfg_.image_noise / std::sqrt(static_cast<double>(d_ - 1));
        for (Eigen::Index j = 0; j < d_; ++j) v(j) += rng_.normal() * scale;
        v(0) = cfg_.modality_gap;
        return unit(v);
    }

    Eigen::Index pick(Eigen::Index n) { return static_cast<Eigen::Index>(rng_.below(static_cast<std::uint64_t>(n))); }

    Eigen::Index dim() const { return d_; }

private:
    const SynthConfig& cfg_;
    Rng rng_;
    Eigen::Index d_;
};

LabeledEmbeddings stored(const std::vector<Eigen::RowVectorXd>& rows, std::vector<std::string> labels, Eigen::Index d) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
    return LabeledEmbeddings(to_storage_precision(m), std::move(labels), true);
}

// Indices of v sorted ascending by value; ties keep index order.
std::vector<Eigen::Index> argsort(const Vector& v) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
    return idx;
}

void write_truth(const SynthWorld& w, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "index,split,concept\n";
    for (std::size_t i = 0; i < w.id_truth.size(); ++i) out << i << ',' << w.id_truth[i].split << ',' << w.id_truth[i].source << '\n';
    for (std::size_t i = 0; i < w.ood_truth.size(); ++i)
        out << i << ',' << w.ood_truth[i].split << ',' << w.ood_truth[i].source << '\n';
}

}  // namespace

void SynthConfig::validate() const {
    auto positive = [](Eigen::Index v, const char* name) {
        if (v < 1) throw ValidationError(std::string(name) + " must be positive");
    };
    if (dim < 3) throw ValidationError("dim must be at least 3");
    positive(id_classes, "id_classes");
    positive(outlier_labels, "outlier_labels");
    positive(noise_synonyms, "noise_synonyms");
    positive(id_test_per_class, "id_test_per_class");
    positive(ood_test_count, "ood_test_count");
    positive(outlier_concepts, "outlier_concepts");
    positive(far_concepts, "far_concepts");
    positive(ood_classes, "ood_classes");
    positive(hard_fringe_classes, "hard_fringe_classes");
    if (noise_synonyms > outlier_labels) throw ValidationError("noise_synonyms cannot exceed outlier_labels");
    if (far_concepts > outlier_concepts) throw ValidationError("far_concepts cannot exceed outlier_concepts");
    if (hard_fringe_classes > id_classes) throw ValidationError("hard_fringe_classes cannot exceed id_classes");
    if (!(concept_spread > 0.0)) throw ValidationError("concept_spread must be positive");
    if (!(hard_ood_fraction >= 0.0 && hard_ood_fraction <= 1.0)) throw ValidationError("hard_ood_fraction must lie in [0, 1]");
    if (!(unrelated_ood_fraction >= 0.0 && unrelated_ood_fraction <= 1.0))
        throw ValidationError("unrelated_ood_fraction must lie in [0, 1]");
    if (!(ood_novelty >= 0.0) || !(image_noise >= 0.0) || !(no_noise >= 0.0))
        throw ValidationError("noise scales must be non-negative");
    if (!std::isfinite(modality_gap) || !std::isfinite(no_bias)) throw ValidationError("offsets must be finite");
}

nlohmann::ordered_json SynthConfig::to_json() const {
    return {{"dim", dim},
            {"id_classes", id_classes},
            {"outlier_labels", outlier_labels},
            {"noise_synonyms", noise_synonyms},
            {"id_test_per_class", id_test_per_class},
            {"ood_test_count", ood_test_count},
            {"hard_ood_fraction", hard_ood_fraction},
            {"concept_spread", concept_spread},
            {"seed", seed},
            {"outlier_concepts", outlier_concepts},
            {"far_concepts", far_concepts},
            {"ood_classes", ood_classes},
            {"ood_novelty", ood_novelty},
            {"unrelated_ood_fraction", unrelated_ood_fraction},
            {"hard_fringe_classes", hard_fringe_classes},
            {"image_noise", image_noise},
            {"modality_gap", modality_gap},
            {"no_noise", no_noise},
            {"no_bias", no_bias}};
}

SynthConfig SynthConfig::from_json(const nlohmann::ordered_json& j) {
    SynthConfig c;
    auto read = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    try {
        read("dim", c.dim);
        read("id_classes", c.id_classes);
        read("outlier_labels", c.outlier_labels);
        read("noise_synonyms", c.noise_synonyms);
        read("id_test_per_class", c.id_test_per_class);
        read("ood_test_count", c.ood_test_count);
        read("hard_ood_fraction", c.hard_ood_fraction);
        read("concept_spread", c.concept_spread);
        read("seed", c.seed);
        read("outlier_concepts", c.outlier_concepts);
        read("far_concepts", c.far_concepts);
        read("ood_classes", c.ood_classes);
        read("ood_novelty", c.ood_novelty);
        read("unrelated_ood_fraction", c.unrelated_ood_fraction);
        read("hard_fringe_classes", c.hard_fringe_classes);
        read("image_noise", c.image_noise);
        read("modality_gap", c.modality_gap);
        read("no_noise", c.no_noise);
        read("no_bias", c.no_bias);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad synthetic config: ") + e.what());
    }
    return c;
}

SynthWorld generate_world(const SynthConfig& config) {
    config.validate();
    Builder b(config);
    const Eigen::Index d = config.dim;
    const Eigen::Index M = config.id_classes;
    const Eigen::Index Q = config.outlier_concepts;

    SynthWorld w;
    std::vector<Eigen::RowVectorXd> placed;
    w.id_directions = b.separated_directions(M, 2.0 * config.concept_spread, placed);
    w.concept_directions = b.separated_directions(Q, 2.0 * config.concept_spread, placed);

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<std::string> labels;
    for (Eigen::Index j = 0; j < M; ++j) {
        rows.push_back(w.id_directions.row(j));
        labels.push_back("class_" + std::to_string(j));
    }
    w.id_class_embeddings = stored(rows, labels, d);

    rows.clear();
    labels.clear();
    const Eigen::Index clean = config.outlier_labels - config.noise_synonyms;
    for (Eigen::Index i = 0; i < clean; ++i) {
        const auto q = b.pick(Q);
        rows.push_back(b.perturb(w.concept_directions.row(q), config.concept_spread));
        labels.push_back("concept_" + std::to_string(q) + "_" + std::to_string(i));
    }
    for (Eigen::Index i = 0; i < config.noise_synonyms; ++i) {
        const auto j = b.pick(M);
        rows.push_back(b.perturb(w.id_directions.row(j), config.concept_spread));
        labels.push_back("synonym_" + std::to_string(j) + "_" + std::to_string(i));
    }
    w.outlier_label_embeddings = stored(rows, labels, d);

    rows.clear();
    labels.clear();
    for (Eigen::Index j = 0; j < M; ++j) {
        Eigen::RowVectorXd v = b.perturb(-w.id_directions.row(j), config.no_noise);
        v(0) = config.no_bias;
        rows.push_back(b.unit(v));
        labels.push_back("no_class_" + std::to_string(j));
    }
    w.no_embeddings = stored(rows, labels, d);

    rows.clear();
    labels.clear();
    for (Eigen::Index j = 0; j < M; ++j) {
        for (Eigen::Index i = 0; i < config.id_test_per_class; ++i) {
            rows.push_back(b.image(w.id_directions.row(j)));
            labels.push_back("id_" + std::to_string(j) + "_" + std::to_string(i));
            w.id_truth.push_back({"id", "class:" + std::to_string(j)});
        }
    }
    w.id_test_images = stored(rows, labels, d);

    // Far concepts: lowest maximum similarity to any ID direction.
    const Vector concept_max = (w.concept_directions * w.id_directions.transpose()).rowwise().maxCoeff();
    auto far = argsort(concept_max);
    far.resize(static_cast<std::size_t>(config.far_concepts));

    const auto hard = static_cast<Eigen::Index>(std::lround(config.hard_ood_fraction * static_cast<double>(config.ood_test_count)));
    const Eigen::Index regular = config.ood_test_count - hard;
    const auto unrelated = static_cast<Eigen::Index>(std::lround(config.unrelated_ood_fraction * static_cast<double>(regular)));

    Matrix ood_class_dirs(config.ood_classes, d);
    std::vector<Eigen::Index> ood_class_source;
    for (Eigen::Index c = 0; c < config.ood_classes; ++c) {
        const auto q = far[static_cast<std::size_t>(b.pick(config.far_concepts))];
        ood_class_source.push_back(q);
        ood_class_dirs.row(c) = b.perturb(w.concept_directions.row(q), config.ood_novelty);
    }
    Matrix unrelated_dirs(config.ood_classes, d);
    for (Eigen::Index c = 0; c < config.ood_classes; ++c) unrelated_dirs.row(c) = b.text_direction();

    rows.clear();
    labels.clear();
    for (Eigen::Index i = 0; i < regular - unrelated; ++i) {
        const auto c = b.pick(config.ood_classes);
        rows.push_back(b.image(ood_class_dirs.row(c)));
        labels.push_back("ood_" + std::to_string(c) + "_" + std::to_string(i));
        w.ood_truth.push_back({"ood", "concept:" + std::to_string(ood_class_source[static_cast<std::size_t>(c)])});
    }
    for (Eigen::Index i = 0; i < unrelated; ++i) {
        const auto c = b.pick(config.ood_classes);
        rows.push_back(b.image(unrelated_dirs.row(c)));
        labels.push_back("unrelated_" + std::to_string(c) + "_" + std::to_string(i));
        w.ood_truth.push_back({"ood", "unrelated:" + std::to_string(c)});
    }

    // Hard OOD sits between a fringe ID class and its nearest far concept.
    const Vector mean_sim = (w.id_directions * w.id_directions.transpose()).rowwise().mean();
    auto fringe = argsort(mean_sim);
    fringe.resize(static_cast<std::size_t>(config.hard_fringe_classes));
    for (Eigen::Index i = 0; i < hard; ++i) {
        const auto j = fringe[static_cast<std::size_t>(b.pick(config.hard_fringe_classes))];
        Eigen::Index nearest = far[0];
        double best = -2.0;
        for (auto q : far) {
            const double s = w.id_directions.row(j).dot(w.concept_directions.row(q));
            if (s > best) {
                best = s;
                nearest = q;
            }
        }
        const auto mid = b.unit(w.id_directions.row(j) + w.concept_directions.row(nearest));
        rows.push_back(b.image(mid));
        labels.push_back("hard_" + std::to_string(j) + "_" + std::to_string(i));
        w.ood_truth.push_back({"ood", "hard:" + std::to_string(j) + "+" + std::to_string(nearest)});
    }
    w.ood_test_images = stored(rows, labels, d);
    return w;
}

void write_world(const SynthWorld& world, const SynthConfig& config, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    save_embeddings(world.id_class_embeddings, dir / "id_classes.emb", FileFormat::binary);
    save_embeddings(world.outlier_label_embeddings, dir / "outlier_labels.emb", FileFormat::binary);
    save_embeddings(world.no_embeddings, dir / "no_embeddings.emb", FileFormat::binary);
    save_embeddings(world.id_test_images, dir / "id_test.emb", FileFormat::binary);
    save_embeddings(world.ood_test_images, dir / "ood_test.emb", FileFormat::binary);
    write_truth(world, dir / "ground_truth.csv");
    std::ofstream out(dir / "world.json", std::ios::trunc);
    if (!out) throw IoError("cannot write world.json");
    out << config.to_json().dump(2) << '\n';
}

}  // namespace ole

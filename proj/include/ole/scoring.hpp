#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ole/embedding_store.hpp"
#include "ole/prototype_set.hpp"

namespace ole {

// Precomputed p(no) per image: row i holds the M-vector for image i.
struct NoProbabilities {
    Matrix values;
};

// "No" text embeddings paired with the ID classes, M x d.
struct NoEmbeddings {
    Matrix vectors;
};

using NoBranch = std::variant<std::monostate, NoProbabilities, NoEmbeddings>;

enum class ScoreMethod { mcm, maxlogit, energy, clipn, mcm_ole, clipn_ole };

ScoreMethod parse_method(const std::string& name);
std::string method_name(ScoreMethod method);
bool needs_no_branch(ScoreMethod method);

class ScoringContext {
public:
    ScoringContext(Matrix id_embeddings, PrototypeSet prototypes, double temperature = 0.01, NoBranch no_branch = {});

    const Matrix& id_embeddings() const { return id_; }
    const PrototypeSet& prototypes() const { return prototypes_; }
    double temperature() const { return tau_; }
    const NoBranch& no_branch() const { return no_; }
    bool has_no_branch() const { return !std::holds_alternative<std::monostate>(no_); }
    Eigen::Index classes() const { return id_.rows(); }
    Eigen::Index dim() const { return id_.cols(); }

    ScoringContext with_prototypes(PrototypeSet prototypes) const;

private:
    Matrix id_;
    PrototypeSet prototypes_;
    double tau_;
    NoBranch no_;
};

// image indexes stored no-probabilities; it is ignored otherwise.
Vector yes_probabilities(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx);
Vector yes_probabilities_ole(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx);
Vector no_probabilities(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx, Eigen::Index image = 0);

// Higher means more in-distribution.
double id_score(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx, ScoreMethod method,
                Eigen::Index image = 0);

// Scores every row of images; result[i] belongs to row i.
std::vector<double> score_batch(const LabeledEmbeddings& images, const ScoringContext& ctx, ScoreMethod method);

// CSV "index,label,score" with round-trip precision.
void write_scores_csv(const std::filesystem::path& path, const LabeledEmbeddings& images,
                      const std::vector<double>& scores);
std::vector<double> read_scores_csv(const std::filesystem::path& path);

}  // namespace ole

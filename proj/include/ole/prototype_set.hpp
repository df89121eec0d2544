#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ole/embedding_store.hpp"

namespace ole {

enum class PrototypeTag { learned, hard };

struct Provenance {
    PrototypeTag tag = PrototypeTag::learned;
    Eigen::Index component = -1;        // learned: mixture component index
    std::optional<double> weight;       // learned: mixing weight, not persisted
    Eigen::Index fringe = -1;           // hard: ID row of the fringe parent
    Eigen::Index prototype = -1;        // hard: index of the prototype parent
    double alpha = 0.0;                 // hard: mixing coefficient

    static Provenance learned(Eigen::Index component, std::optional<double> weight = std::nullopt);
    static Provenance hard(Eigen::Index fringe, Eigen::Index prototype, double alpha);

    // "learned:<component>" or "hard:<fringe>:<proto>:<alpha>" with alpha to 6 decimals.
    std::string label() const;
    static Provenance parse(const std::string& label);
};

// Unit-norm outlier prototypes with per-row provenance.
class PrototypeSet {
public:
    PrototypeSet() = default;
    PrototypeSet(Matrix vectors, std::vector<Provenance> provenance);

    static PrototypeSet empty(Eigen::Index dim);

    Eigen::Index size() const { return vectors_.rows(); }
    Eigen::Index dim() const { return vectors_.cols(); }
    bool is_empty() const { return vectors_.rows() == 0; }
    const Matrix& vectors() const { return vectors_; }
    const std::vector<Provenance>& provenance() const { return provenance_; }
    PrototypeTag tag(Eigen::Index i) const { return provenance_[static_cast<std::size_t>(i)].tag; }

    PrototypeSet select(const std::vector<Eigen::Index>& indices) const;

    // This set followed by other, order preserved.
    PrototypeSet concat(const PrototypeSet& other) const;

    // Vectors rounded to float32 so in-memory and on-disk sets agree exactly.
    PrototypeSet quantized() const;

    LabeledEmbeddings to_embeddings() const;
    static PrototypeSet from_embeddings(const LabeledEmbeddings& data);

private:
    Matrix vectors_;
    std::vector<Provenance> provenance_;
};

void save_prototypes(const PrototypeSet& set, const std::filesystem::path& path);
PrototypeSet load_prototypes(const std::filesystem::path& path);

}  // namespace ole

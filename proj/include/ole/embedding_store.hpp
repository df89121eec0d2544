#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ole/types.hpp"

namespace ole {

enum class FileFormat { binary, csv };

// Tolerance on row norms for data flagged as normalized.
inline constexpr double kUnitTolerance = 1e-6;

// n x d embedding rows with optional labels. Immutable after construction.
class LabeledEmbeddings {
public:
    LabeledEmbeddings() = default;

    // Validates finiteness, label count, and unit rows when normalized is set.
    LabeledEmbeddings(Matrix matrix, std::vector<std::string> labels = {}, bool normalized = false);

    // Empty set with a known dimension.
    static LabeledEmbeddings empty(Eigen::Index dim, bool normalized = true);

    Eigen::Index rows() const { return matrix_.rows(); }
    Eigen::Index dim() const { return matrix_.cols(); }
    const Matrix& matrix() const { return matrix_; }
    const std::vector<std::string>& labels() const { return labels_; }
    bool has_labels() const { return !labels_.empty(); }
    bool normalized() const { return normalized_; }

    // Rows selected by index, labels carried along.
    LabeledEmbeddings select(const std::vector<Eigen::Index>& indices) const;

    // Same shape, flag, labels, and bit-identical entries.
    bool identical(const LabeledEmbeddings& other) const;

private:
    Matrix matrix_;
    std::vector<std::string> labels_;
    bool normalized_ = false;
};

LabeledEmbeddings load_embeddings(const std::filesystem::path& path, FileFormat format);
void save_embeddings(const LabeledEmbeddings& data, const std::filesystem::path& path, FileFormat format);

// Format inferred from the extension: ".csv" is CSV, anything else binary.
FileFormat format_for(const std::filesystem::path& path);

// Loads and normalizes rows when the file is not already flagged normalized.
LabeledEmbeddings load_normalized(const std::filesystem::path& path);

// In-memory OLE-EMB v1 encoding; file save/load go through these. Entries are
// stored as float32, so only float-representable values round-trip exactly.
std::vector<unsigned char> encode_binary(const LabeledEmbeddings& data);
LabeledEmbeddings decode_binary(const std::vector<unsigned char>& bytes);

LabeledEmbeddings normalize_rows(const LabeledEmbeddings& data);

// Rounds every entry to float32, the payload precision of the binary format.
Matrix to_storage_precision(const Matrix& m);

// Inner products of every row of a against every row of b.
Matrix similarity_matrix(const LabeledEmbeddings& a, const LabeledEmbeddings& b);

}  // namespace ole

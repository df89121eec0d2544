#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ole/embedding_store.hpp"

namespace ole {

// Seeded world on the unit sphere. Coordinate 0 is reserved for the image
// modality: text directions have a zero there and image embeddings carry
// modality_gap before renormalization, mimicking the text/image offset of
// contrastive encoders.
struct SynthConfig {
    Eigen::Index dim = 64;
    Eigen::Index id_classes = 20;           // M
    Eigen::Index outlier_labels = 400;      // L, synonyms included
    Eigen::Index noise_synonyms = 40;       // outlier labels sampled near ID classes
    Eigen::Index id_test_per_class = 50;
    Eigen::Index ood_test_count = 500;
    double hard_ood_fraction = 0.3;
    double concept_spread = 0.1;            // angular scale, radians
    std::uint64_t seed = 7;

    Eigen::Index outlier_concepts = 60;     // concept directions behind the clean outlier labels
    Eigen::Index far_concepts = 4;          // concepts least similar to the ID classes; OOD images derive from these
    Eigen::Index ood_classes = 10;          // novel OOD classes perturbed from far concepts
    double ood_novelty = 0.5;               // angular scale of that perturbation
    double unrelated_ood_fraction = 0.4;    // share of non-hard OOD images from unrelated directions
    Eigen::Index hard_fringe_classes = 20;  // ID classes, by lowest mean similarity, that seed hard OOD
    double image_noise = 0.8;
    double modality_gap = 6.0;
    double no_noise = 0.1;
    double no_bias = 0.25;                  // coordinate-0 component of the "no" embeddings

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static SynthConfig from_json(const nlohmann::ordered_json& j);
};

struct GroundTruthRow {
    std::string split;    // "id" or "ood"
    std::string source;   // generating concept, e.g. "class:3", "concept:17", "unrelated:2", "hard:4+17"
};

struct SynthWorld {
    LabeledEmbeddings id_class_embeddings;       // M x d
    LabeledEmbeddings outlier_label_embeddings;  // L x d, clean labels then synonyms
    LabeledEmbeddings no_embeddings;             // M x d
    LabeledEmbeddings id_test_images;
    LabeledEmbeddings ood_test_images;
    Matrix id_directions;                        // M x d
    Matrix concept_directions;                   // outlier_concepts x d
    std::vector<GroundTruthRow> id_truth;
    std::vector<GroundTruthRow> ood_truth;
};

SynthWorld generate_world(const SynthConfig& config);

// Writes the OLE-EMB v1 files, ground_truth.csv, and world.json into dir.
void write_world(const SynthWorld& world, const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace ole

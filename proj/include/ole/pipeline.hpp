#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ole/evaluation.hpp"
#include "ole/hard_prototypes.hpp"
#include "ole/mixture_model.hpp"
#include "ole/prototype_learning.hpp"
#include "ole/scoring.hpp"
#include "ole/synthetic.hpp"

namespace ole {

struct PipelinePaths {
    std::filesystem::path id_labels;
    std::filesystem::path outlier_labels;
    std::filesystem::path id_test;
    std::vector<std::pair<std::string, std::filesystem::path>> ood_tests;
    std::optional<std::filesystem::path> no_embeddings;
    // Per score set ("id" or an OOD name), an n x M file of stored no-probabilities.
    std::map<std::string, std::filesystem::path> no_probabilities;
};

struct PipelineConfig {
    PipelinePaths paths;
    Eigen::Index K = 500;
    double refine_percentile = 10.0;
    FringeConfig fringe;
    double temperature = 0.01;
    ScoreMethod method = ScoreMethod::clipn_ole;
    std::uint64_t seed = 0;
    EmConfig em;
    HistogramSpec histogram;
    SynthConfig synth;

    // Relative paths in j resolve against base_dir. Unknown keys are rejected.
    static PipelineConfig from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& path);

    // Everything needed to rerun, with paths as resolved.
    nlohmann::ordered_json to_json() const;

    // Copies seed into the EM and fringe settings and checks ranges.
    void finalize();
};

// Standard artifact names inside an output directory.
namespace artifacts {
inline constexpr const char* gmm = "gmm.bin";
inline constexpr const char* raw = "prototypes_raw.emb";
inline constexpr const char* refined = "prototypes_refined.emb";
inline constexpr const char* refine_report = "refine.json";
inline constexpr const char* final_set = "prototypes_final.emb";
inline constexpr const char* hard_report = "hard.json";
inline constexpr const char* report = "report.json";
inline constexpr const char* ablation = "ablation.json";
std::string scores(const std::string& set_name);
}  // namespace artifacts

struct FitOutput {
    GmmModel model;
    PrototypeSet prototypes;  // float32-exact
};

struct HardOutput {
    std::vector<Eigen::Index> fringe;
    PrototypeSet hard;
    PrototypeSet augmented;   // refined followed by hard, float32-exact
};

FitOutput stage_fit(const PipelineConfig& config, const LabeledEmbeddings& outlier_labels);
RefineResult stage_refine(const PipelineConfig& config, const PrototypeSet& raw, const LabeledEmbeddings& id_labels);
HardOutput stage_hard(const PipelineConfig& config, const PrototypeSet& refined, const LabeledEmbeddings& id_labels);

// Context for scoring the named set with the configured no-branch.
ScoringContext make_context(const PipelineConfig& config, const LabeledEmbeddings& id_labels,
                            const PrototypeSet& prototypes, const std::string& set_name);

nlohmann::ordered_json refine_report_json(const PipelineConfig& config, const RefineResult& r, Eigen::Index input_count);
nlohmann::ordered_json hard_report_json(const PipelineConfig& config, const HardOutput& h);

// Subcommand bodies. Each reads and writes the standard artifacts in out_dir.
void cmd_fit(const PipelineConfig& config, const std::filesystem::path& out_dir);
void cmd_refine(const PipelineConfig& config, const std::filesystem::path& out_dir,
                const std::optional<std::filesystem::path>& prototypes = std::nullopt);
void cmd_hard(const PipelineConfig& config, const std::filesystem::path& out_dir,
              const std::optional<std::filesystem::path>& prototypes = std::nullopt);
// Without images, scores the configured ID and OOD test sets into scores_<name>.csv.
void cmd_score(const PipelineConfig& config, const std::filesystem::path& out_dir,
               const std::optional<std::filesystem::path>& images = std::nullopt,
               const std::optional<std::filesystem::path>& prototypes = std::nullopt,
               const std::optional<std::filesystem::path>& no_probabilities = std::nullopt,
               const std::optional<std::filesystem::path>& output = std::nullopt);
DetectionReport cmd_eval(const PipelineConfig& config, const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& id_scores = std::nullopt,
                         const std::vector<std::pair<std::string, std::filesystem::path>>& ood_scores = {},
                         const std::optional<std::filesystem::path>& output = std::nullopt);
// Writes the world plus pipeline.json, a ready-to-run config for it.
void cmd_synth(const PipelineConfig& config, const std::filesystem::path& out_dir);

// All stages in one process; writes the same artifacts as the subcommands.
DetectionReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

struct AblationRow {
    std::string name;
    ScoreMethod method;
    Eigen::Index prototypes = 0;
    DetectionReport report;
};

// Baseline / RAW / OPL / OPL+Refine / OPL+Refine+HOPG on identical test scores inputs.
std::vector<AblationRow> run_ablation(const PipelineConfig& config);
nlohmann::ordered_json ablation_json(const PipelineConfig& config, const std::vector<AblationRow>& rows);
std::vector<AblationRow> cmd_ablate(const PipelineConfig& config, const std::filesystem::path& out_dir);

// Pipeline settings used for synthetic worlds: the world has fewer labels than
// the default K, and every ID class is a fringe candidate.
PipelineConfig synthetic_preset(const SynthConfig& synth, const std::filesystem::path& world_dir);

}  // namespace ole

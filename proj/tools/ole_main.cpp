// ole: command-line front end for the outlier label exposure pipeline.
//
//   ole fit|refine|hard|score|eval|synth|ablate|run --config <path> [--seed N] [--out <dir>] ...
//
// Exit codes: 0 success, 2 validation error, 3 numeric failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ole/errors.hpp"
#include "ole/pipeline.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> k;
    std::optional<double> percentile;
    std::optional<long> clusters;
    std::optional<long> per_cluster;
    std::optional<double> temperature;
    std::optional<std::string> method;
};

std::optional<std::filesystem::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

ole::PipelineConfig resolve_config(const std::string& config_path, const Overrides& o, bool synth) {
    ole::PipelineConfig c;
    if (!config_path.empty()) c = ole::PipelineConfig::load(config_path);
    if (o.seed) {
        c.seed = *o.seed;
        if (synth) c.synth.seed = *o.seed;
    }
    if (o.k) c.K = *o.k;
    if (o.percentile) c.refine_percentile = *o.percentile;
    if (o.clusters) c.fringe.clusters = *o.clusters;
    if (o.per_cluster) c.fringe.per_cluster = *o.per_cluster;
    if (o.temperature) c.temperature = *o.temperature;
    if (o.method) c.method = ole::parse_method(*o.method);
    c.finalize();
    return c;
}

void print_report(const ole::DetectionReport& r) {
    for (const auto& d : r.datasets)
        std::cout << d.name << "  FPR95 " << d.fpr95 * 100.0 << "  AUROC " << d.auroc * 100.0 << '\n';
    std::cout << "average  FPR95 " << r.average_fpr95 * 100.0 << "  AUROC " << r.average_auroc * 100.0 << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outlier label exposure for zero-shot OOD detection"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    Overrides o;
    std::string prototypes, images, no_probs, output, id_scores;
    std::vector<std::string> ood_scores;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "JSON pipeline config");
        if (config_required) opt->required();
        sub->add_option("--seed", o.seed, "seed override");
        sub->add_option("--out", out_dir, "output directory");
    };
    auto tuning = [&](CLI::App* sub) {
        sub->add_option("--K", o.k, "mixture components");
        sub->add_option("--percentile", o.percentile, "refine percentile p");
        sub->add_option("--clusters", o.clusters, "fringe clusters C");
        sub->add_option("--per-cluster", o.per_cluster, "fringe rows per cluster m");
        sub->add_option("--temperature", o.temperature, "softmax temperature");
        sub->add_option("--method", o.method, "mcm|maxlogit|energy|clipn|mcm_ole|clipn_ole");
    };

    auto* fit = app.add_subcommand("fit", "fit the mixture and write raw prototypes");
    auto* refine = app.add_subcommand("refine", "drop prototypes aligned with the ID classes");
    auto* hard = app.add_subcommand("hard", "append hard prototypes from fringe ID classes");
    auto* score = app.add_subcommand("score", "score image embeddings");
    auto* eval = app.add_subcommand("eval", "FPR95/AUROC report from score files");
    auto* synth = app.add_subcommand("synth", "generate a synthetic world");
    auto* ablate = app.add_subcommand("ablate", "Baseline/RAW/OPL/Refine/HOPG comparison");
    auto* run = app.add_subcommand("run", "all stages in one process");
    for (auto* sub : {fit, refine, hard, score, eval, ablate, run}) {
        common(sub, true);
        tuning(sub);
    }
    common(synth, false);
    refine->add_option("--prototypes", prototypes, "input prototype file");
    hard->add_option("--prototypes", prototypes, "input prototype file");
    score->add_option("--prototypes", prototypes, "prototype file");
    score->add_option("--images", images, "image embedding file; default scores the configured test sets");
    score->add_option("--no-probs", no_probs, "stored no-probabilities for --images");
    score->add_option("--output", output, "score CSV path");
    eval->add_option("--id-scores", id_scores, "ID score CSV");
    eval->add_option("--ood-scores", ood_scores, "name=path, repeatable");
    eval->add_option("--output", output, "report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        const std::filesystem::path out(out_dir);
        const auto config = resolve_config(config_path, o, synth->parsed());
        if (fit->parsed()) {
            ole::cmd_fit(config, out);
        } else if (refine->parsed()) {
            ole::cmd_refine(config, out, opt_path(prototypes));
        } else if (hard->parsed()) {
            ole::cmd_hard(config, out, opt_path(prototypes));
        } else if (score->parsed()) {
            ole::cmd_score(config, out, opt_path(images), opt_path(prototypes), opt_path(no_probs), opt_path(output));
        } else if (eval->parsed()) {
            std::vector<std::pair<std::string, std::filesystem::path>> named;
            for (const auto& s : ood_scores) {
                const auto eq = s.find('=');
                if (eq == std::string::npos || eq == 0) throw ole::ValidationError("--ood-scores expects name=path, got '" + s + "'");
                named.emplace_back(s.substr(0, eq), s.substr(eq + 1));
            }
            print_report(ole::cmd_eval(config, out, opt_path(id_scores), named, opt_path(output)));
        } else if (synth->parsed()) {
            ole::cmd_synth(config, out);
        } else if (ablate->parsed()) {
            for (const auto& row : ole::cmd_ablate(config, out))
                std::cout << row.name << "  FPR95 " << row.report.average_fpr95 * 100.0 << "  AUROC "
                          << row.report.average_auroc * 100.0 << '\n';
        } else if (run->parsed()) {
            print_report(ole::run_pipeline(config, out));
        }
    } catch (const ole::NumericError& e) {
        std::cerr << "ole: numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const ole::ValidationError& e) {
        std::cerr << "ole: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "ole: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return 0;
}

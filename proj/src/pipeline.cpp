#include "ole/pipeline.hpp"

#include <fstream>
#include <set>

#include "ole/errors.hpp"

namespace ole {

namespace {

using json = nlohmann::ordered_json;

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void require_file(const std::filesystem::path& p, const std::string& what) {
    if (!std::filesystem::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

ScoreMethod baseline_method(ScoreMethod m) {
    if (m == ScoreMethod::clipn_ole) return ScoreMethod::clipn;
    if (m == ScoreMethod::mcm_ole) return ScoreMethod::mcm;
    return m;
}

ScoreMethod exposure_method(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::clipn:
        case ScoreMethod::clipn_ole: return ScoreMethod::clipn_ole;
        case ScoreMethod::mcm:
        case ScoreMethod::mcm_ole: return ScoreMethod::mcm_ole;
        default: throw ValidationError("ablation needs an mcm or clipn family method, got " + method_name(m));
    }
}

bool uses_prototypes(ScoreMethod m) {
    return m == ScoreMethod::mcm_ole || m == ScoreMethod::clipn_ole;
}

struct TestSets {
    LabeledEmbeddings id;
    std::vector<std::pair<std::string, LabeledEmbeddings>> ood;
};

TestSets load_test_sets(const PipelineConfig& c) {
    TestSets t;
    t.id = load_normalized(c.paths.id_test);
    for (const auto& [name, path] : c.paths.ood_tests) t.ood.emplace_back(name, load_normalized(path));
    return t;
}

DetectionReport score_and_evaluate(const PipelineConfig& c, const LabeledEmbeddings& id_labels, const TestSets& tests,
                                   const PrototypeSet& prototypes, ScoreMethod method,
                                   const std::filesystem::path* write_dir) {
    const auto id_ctx = make_context(c, id_labels, prototypes, "id");
    const auto id_scores = score_batch(tests.id, id_ctx, method);
    if (write_dir) write_scores_csv(*write_dir / artifacts::scores("id"), tests.id, id_scores);
    std::vector<std::pair<std::string, std::vector<double>>> ood;
    for (const auto& [name, images] : tests.ood) {
        const auto ctx = make_context(c, id_labels, prototypes, name);
        auto s = score_batch(images, ctx, method);
        if (write_dir) write_scores_csv(*write_dir / artifacts::scores(name), images, s);
        ood.emplace_back(name, std::move(s));
    }
    auto report = evaluate(id_scores, ood, c.histogram);
    report.config_echo = c.to_json();
    return report;
}

}  // namespace

std::string artifacts::scores(const std::string& set_name) {
    return "scores_" + set_name + ".csv";
}

PipelineConfig PipelineConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    try {
        reject_unknown(j,
                       {"id_labels", "outlier_labels", "id_test", "ood_tests", "no_branch", "K", "refine_percentile",
                        "fringe", "temperature", "method", "seed", "em", "histogram", "synth"},
                       "config");
        if (j.contains("id_labels")) c.paths.id_labels = resolve(j.at("id_labels").get<std::string>(), base_dir);
        if (j.contains("outlier_labels"))
            c.paths.outlier_labels = resolve(j.at("outlier_labels").get<std::string>(), base_dir);
        if (j.contains("id_test")) c.paths.id_test = resolve(j.at("id_test").get<std::string>(), base_dir);
        if (j.contains("ood_tests")) {
            const auto& o = j.at("ood_tests");
            if (!o.is_object()) throw ValidationError("ood_tests must map dataset names to paths");
            for (const auto& [name, path] : o.items()) {
                if (name == "id" || name.empty() || name.find_first_of("/\\") != std::string::npos)
                    throw ValidationError("invalid OOD dataset name '" + name + "'");
                c.paths.ood_tests.emplace_back(name, resolve(path.get<std::string>(), base_dir));
            }
        }
        if (j.contains("no_branch")) {
            const auto& nb = j.at("no_branch");
            reject_unknown(nb, {"embeddings", "probabilities"}, "no_branch");
            if (nb.contains("embeddings") && nb.contains("probabilities"))
                throw ValidationError("no_branch takes either embeddings or probabilities, not both");
            if (nb.contains("embeddings")) c.paths.no_embeddings = resolve(nb.at("embeddings").get<std::string>(), base_dir);
            if (nb.contains("probabilities")) {
                for (const auto& [name, path] : nb.at("probabilities").items())
                    c.paths.no_probabilities[name] = resolve(path.get<std::string>(), base_dir);
            }
        }
        read(j, "K", c.K);
        read(j, "refine_percentile", c.refine_percentile);
        if (j.contains("fringe")) {
            const auto& f = j.at("fringe");
            reject_unknown(f, {"clusters", "per_cluster", "alpha_low", "alpha_high"}, "fringe");
            read(f, "clusters", c.fringe.clusters);
            read(f, "per_cluster", c.fringe.per_cluster);
            read(f, "alpha_low", c.fringe.alpha_low);
            read(f, "alpha_high", c.fringe.alpha_high);
        }
        read(j, "temperature", c.temperature);
        if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
        read(j, "seed", c.seed);
        if (j.contains("em")) {
            const auto& e = j.at("em");
            reject_unknown(e, {"max_iterations", "convergence_tolerance", "variance_floor"}, "em");
            read(e, "max_iterations", c.em.max_iterations);
            read(e, "convergence_tolerance", c.em.convergence_tolerance);
            read(e, "variance_floor", c.em.variance_floor);
        }
        if (j.contains("histogram")) {
            const auto& h = j.at("histogram");
            reject_unknown(h, {"bins", "lo", "hi"}, "histogram");
            read(h, "bins", c.histogram.bins);
            read(h, "lo", c.histogram.lo);
            read(h, "hi", c.histogram.hi);
        }
        if (j.contains("synth")) c.synth = SynthConfig::from_json(j.at("synth"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad config: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
    json j;
    j["id_labels"] = paths.id_labels.generic_string();
    j["outlier_labels"] = paths.outlier_labels.generic_string();
    j["id_test"] = paths.id_test.generic_string();
    j["ood_tests"] = json::object();
    for (const auto& [name, path] : paths.ood_tests) j["ood_tests"][name] = path.generic_string();
    if (paths.no_embeddings) {
        j["no_branch"] = {{"embeddings", paths.no_embeddings->generic_string()}};
    } else if (!paths.no_probabilities.empty()) {
        json p = json::object();
        for (const auto& [name, path] : paths.no_probabilities) p[name] = path.generic_string();
        j["no_branch"] = {{"probabilities", p}};
    }
    j["K"] = K;
    j["refine_percentile"] = refine_percentile;
    j["fringe"] = {{"clusters", fringe.clusters},
                   {"per_cluster", fringe.per_cluster},
                   {"alpha_low", fringe.alpha_low},
                   {"alpha_high", fringe.alpha_high}};
    j["temperature"] = temperature;
    j["method"] = method_name(method);
    j["seed"] = seed;
    j["em"] = {{"max_iterations", em.max_iterations},
               {"convergence_tolerance", em.convergence_tolerance},
               {"variance_floor", em.variance_floor}};
    j["histogram"] = {{"bins", histogram.bins}, {"lo", histogram.lo}, {"hi", histogram.hi}};
    j["synth"] = synth.to_json();
    return j;
}

void PipelineConfig::finalize() {
    em.seed = seed;
    fringe.seed = seed;
    if (K < 1) throw ValidationError("K must be at least 1");
    if (!(refine_percentile > 0.0 && refine_percentile <= 100.0))
        throw ValidationError("refine_percentile must lie in (0, 100]");
    if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
    if (histogram.bins < 1 || !(histogram.lo < histogram.hi)) throw ValidationError("histogram needs bins >= 1 and lo < hi");
    fringe.validate();
    em.validate();
}

FitOutput stage_fit(const PipelineConfig& config, const LabeledEmbeddings& outlier_labels) {
    FitOutput out;
    out.model = fit_gmm(outlier_labels, config.K, config.em);
    out.prototypes = extract_prototypes(out.model).quantized();
    return out;
}

RefineResult stage_refine(const PipelineConfig& config, const PrototypeSet& raw, const LabeledEmbeddings& id_labels) {
    auto r = refine_prototypes(raw, id_labels, config.refine_percentile);
    r.prototypes = r.prototypes.quantized();
    return r;
}

HardOutput stage_hard(const PipelineConfig& config, const PrototypeSet& refined, const LabeledEmbeddings& id_labels) {
    if (config.fringe.clusters > id_labels.rows())
        throw ValidationError("fringe cluster count " + std::to_string(config.fringe.clusters) + " exceeds the " +
                              std::to_string(id_labels.rows()) + " ID classes");
    HardOutput out;
    const auto assignments = cluster_id_classes(id_labels, config.fringe.clusters, config.fringe.seed);
    out.fringe = select_fringe(id_labels, assignments, config.fringe.per_cluster);
    out.hard = generate_hard_prototypes(id_labels.select(out.fringe), refined, config.fringe, out.fringe).quantized();
    out.augmented = refined.concat(out.hard);
    return out;
}

ScoringContext make_context(const PipelineConfig& config, const LabeledEmbeddings& id_labels,
                            const PrototypeSet& prototypes, const std::string& set_name) {
    NoBranch nb;
    if (config.paths.no_embeddings) {
        const auto no = load_normalized(*config.paths.no_embeddings);
        nb = NoEmbeddings{no.matrix()};
    } else if (auto it = config.paths.no_probabilities.find(set_name); it != config.paths.no_probabilities.end()) {
        nb = NoProbabilities{load_embeddings(it->second, format_for(it->second)).matrix()};
    }
    PrototypeSet protos = prototypes.is_empty() ? PrototypeSet::empty(id_labels.dim()) : prototypes;
    return ScoringContext(id_labels.matrix(), std::move(protos), config.temperature, std::move(nb));
}

json refine_report_json(const PipelineConfig& config, const RefineResult& r, Eigen::Index input_count) {
    json j;
    j["input_prototypes"] = input_count;
    j["retained"] = r.prototypes.size();
    j["percentile"] = config.refine_percentile;
    j["lambda"] = r.lambda;
    j["kept"] = r.kept;
    j["config_echo"] = config.to_json();
    return j;
}

json hard_report_json(const PipelineConfig& config, const HardOutput& h) {
    json j;
    j["fringe"] = h.fringe;
    j["hard_prototypes"] = h.hard.size();
    j["total_prototypes"] = h.augmented.size();
    json mixes = json::array();
    for (const auto& p : h.hard.provenance())
        mixes.push_back({{"fringe", p.fringe}, {"prototype", p.prototype}, {"alpha", p.alpha}});
    j["mixes"] = std::move(mixes);
    j["config_echo"] = config.to_json();
    return j;
}

void cmd_fit(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    const auto labels = load_normalized(config.paths.outlier_labels);
    const auto fit = stage_fit(config, labels);
    save_gmm(fit.model, out_dir / artifacts::gmm);
    save_prototypes(fit.prototypes, out_dir / artifacts::raw);
}

void cmd_refine(const PipelineConfig& config, const std::filesystem::path& out_dir,
                const std::optional<std::filesystem::path>& prototypes) {
    ensure_dir(out_dir);
    const auto in_path = prototypes.value_or(out_dir / artifacts::raw);
    require_file(in_path, "prototype file");
    const auto raw = load_prototypes(in_path);
    const auto id = load_normalized(config.paths.id_labels);
    const auto r = stage_refine(config, raw, id);
    save_prototypes(r.prototypes, out_dir / artifacts::refined);
    write_json(out_dir / artifacts::refine_report, refine_report_json(config, r, raw.size()));
}

void cmd_hard(const PipelineConfig& config, const std::filesystem::path& out_dir,
              const std::optional<std::filesystem::path>& prototypes) {
    ensure_dir(out_dir);
    const auto in_path = prototypes.value_or(out_dir / artifacts::refined);
    require_file(in_path, "prototype file");
    const auto refined = load_prototypes(in_path);
    const auto id = load_normalized(config.paths.id_labels);
    const auto h = stage_hard(config, refined, id);
    save_prototypes(h.augmented, out_dir / artifacts::final_set);
    write_json(out_dir / artifacts::hard_report, hard_report_json(config, h));
}

void cmd_score(const PipelineConfig& config, const std::filesystem::path& out_dir,
               const std::optional<std::filesystem::path>& images,
               const std::optional<std::filesystem::path>& prototypes,
               const std::optional<std::filesystem::path>& no_probabilities,
               const std::optional<std::filesystem::path>& output) {
    ensure_dir(out_dir);
    const auto id = load_normalized(config.paths.id_labels);
    PrototypeSet protos = PrototypeSet::empty(id.dim());
    if (uses_prototypes(config.method)) {
        const auto p = prototypes.value_or(out_dir / artifacts::final_set);
        require_file(p, "prototype file");
        protos = load_prototypes(p);
    }
    if (!images) {
        if (output || no_probabilities)
            throw ValidationError("--output and --no-probs apply only with --images");
        const auto tests = load_test_sets(config);
        const auto ctx = make_context(config, id, protos, "id");
        write_scores_csv(out_dir / artifacts::scores("id"), tests.id, score_batch(tests.id, ctx, config.method));
        for (const auto& [name, set] : tests.ood) {
            const auto c = make_context(config, id, protos, name);
            write_scores_csv(out_dir / artifacts::scores(name), set, score_batch(set, c, config.method));
        }
        return;
    }
    const auto set = load_normalized(*images);
    const std::string name = images->stem().string();
    PipelineConfig local = config;
    if (no_probabilities) {
        local.paths.no_embeddings.reset();
        local.paths.no_probabilities = {{name, *no_probabilities}};
    }
    const auto ctx = make_context(local, id, protos, name);
    write_scores_csv(output.value_or(out_dir / artifacts::scores(name)), set, score_batch(set, ctx, config.method));
}

DetectionReport cmd_eval(const PipelineConfig& config, const std::filesystem::path& out_dir,
                         const std::optional<std::filesystem::path>& id_scores,
                         const std::vector<std::pair<std::string, std::filesystem::path>>& ood_scores,
                         const std::optional<std::filesystem::path>& output) {
    ensure_dir(out_dir);
    const auto id_path = id_scores.value_or(out_dir / artifacts::scores("id"));
    require_file(id_path, "ID score file");
    const auto id = read_scores_csv(id_path);
    std::vector<std::pair<std::string, std::vector<double>>> ood;
    if (!ood_scores.empty()) {
        for (const auto& [name, path] : ood_scores) ood.emplace_back(name, read_scores_csv(path));
    } else {
        for (const auto& [name, path] : config.paths.ood_tests) {
            const auto p = out_dir / artifacts::scores(name);
            require_file(p, "OOD score file");
            ood.emplace_back(name, read_scores_csv(p));
        }
    }
    auto report = evaluate(id, ood, config.histogram);
    report.config_echo = config.to_json();
    write_json(output.value_or(out_dir / artifacts::report), report.to_json());
    return report;
}

void cmd_synth(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    const auto world = generate_world(config.synth);
    write_world(world, config.synth, out_dir);
    write_json(out_dir / "pipeline.json", synthetic_preset(config.synth, {}).to_json());
}

DetectionReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    const auto id = load_normalized(config.paths.id_labels);
    const auto labels = load_normalized(config.paths.outlier_labels);
    const auto fit = stage_fit(config, labels);
    save_gmm(fit.model, out_dir / artifacts::gmm);
    save_prototypes(fit.prototypes, out_dir / artifacts::raw);
    const auto refined = stage_refine(config, fit.prototypes, id);
    save_prototypes(refined.prototypes, out_dir / artifacts::refined);
    write_json(out_dir / artifacts::refine_report, refine_report_json(config, refined, fit.prototypes.size()));
    const auto hard = stage_hard(config, refined.prototypes, id);
    save_prototypes(hard.augmented, out_dir / artifacts::final_set);
    write_json(out_dir / artifacts::hard_report, hard_report_json(config, hard));
    const auto tests = load_test_sets(config);
    const PrototypeSet used = uses_prototypes(config.method) ? hard.augmented : PrototypeSet::empty(id.dim());
    auto report = score_and_evaluate(config, id, tests, used, config.method, &out_dir);
    write_json(out_dir / artifacts::report, report.to_json());
    return report;
}

std::vector<AblationRow> run_ablation(const PipelineConfig& config) {
    const ScoreMethod base = baseline_method(config.method);
    const ScoreMethod ole = exposure_method(config.method);
    const auto id = load_normalized(config.paths.id_labels);
    const auto labels = load_normalized(config.paths.outlier_labels);
    const auto tests = load_test_sets(config);

    std::vector<Provenance> label_prov;
    for (Eigen::Index i = 0; i < labels.rows(); ++i) label_prov.push_back(Provenance::learned(i));
    const PrototypeSet raw_labels(labels.matrix(), std::move(label_prov));
    const auto fit = stage_fit(config, labels);
    const auto refined = stage_refine(config, fit.prototypes, id);
    const auto hard = stage_hard(config, refined.prototypes, id);

    std::vector<AblationRow> rows;
    auto add = [&](const std::string& name, ScoreMethod method, const PrototypeSet& protos) {
        AblationRow row{name, method, protos.size(), score_and_evaluate(config, id, tests, protos, method, nullptr)};
        rows.push_back(std::move(row));
    };
    add("Baseline", base, PrototypeSet::empty(id.dim()));
    add("RAW", ole, raw_labels);
    add("OPL", ole, fit.prototypes);
    add("OPL+Refine", ole, refined.prototypes);
    add("OPL+Refine+HOPG", ole, hard.augmented);
    return rows;
}

json ablation_json(const PipelineConfig& config, const std::vector<AblationRow>& rows) {
    json j;
    j["rows"] = json::array();
    for (const auto& r : rows) {
        auto report = r.report.to_json();
        json row;
        row["name"] = r.name;
        row["method"] = method_name(r.method);
        row["prototypes"] = r.prototypes;
        row["average"] = report["average"];
        row["datasets"] = report["datasets"];
        j["rows"].push_back(std::move(row));
    }
    j["config_echo"] = config.to_json();
    return j;
}

std::vector<AblationRow> cmd_ablate(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    ensure_dir(out_dir);
    auto rows = run_ablation(config);
    write_json(out_dir / artifacts::ablation, ablation_json(config, rows));
    return rows;
}

PipelineConfig synthetic_preset(const SynthConfig& synth, const std::filesystem::path& world_dir) {
    PipelineConfig c;
    auto at = [&](const char* name) { return world_dir.empty() ? std::filesystem::path(name) : world_dir / name; };
    c.paths.id_labels = at("id_classes.emb");
    c.paths.outlier_labels = at("outlier_labels.emb");
    c.paths.id_test = at("id_test.emb");
    c.paths.ood_tests = {{"synthetic", at("ood_test.emb")}};
    c.paths.no_embeddings = at("no_embeddings.emb");
    c.K = 100;
    c.refine_percentile = 10.0;
    c.fringe.clusters = 5;
    c.fringe.per_cluster = 30;
    c.temperature = 0.01;
    c.method = ScoreMethod::clipn_ole;
    c.seed = synth.seed;
    c.synth = synth;
    c.finalize();
    return c;
}

}  // namespace ole

#include "ole/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ole/errors.hpp"
#include "ole/parallel.hpp"

namespace ole {

namespace {

void check_dim(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx) {
    if (x.size() != ctx.dim())
        throw ValidationError("dimension mismatch: image has " + std::to_string(x.size()) + ", context has " +
                              std::to_string(ctx.dim()));
}

double sum_exp(const Vector& v, double shift) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v(i) - shift);
    return s;
}

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

ScoreMethod parse_method(const std::string& name) {
    if (name == "mcm") return ScoreMethod::mcm;
    if (name == "maxlogit") return ScoreMethod::maxlogit;
    if (name == "energy") return ScoreMethod::energy;
    if (name == "clipn") return ScoreMethod::clipn;
    if (name == "mcm_ole") return ScoreMethod::mcm_ole;
    if (name == "clipn_ole") return ScoreMethod::clipn_ole;
    throw ValidationError("unknown score method '" + name + "'");
}

std::string method_name(ScoreMethod method) {
    switch (method) {
        case ScoreMethod::mcm: return "mcm";
        case ScoreMethod::maxlogit: return "maxlogit";
        case ScoreMethod::energy: return "energy";
        case ScoreMethod::clipn: return "clipn";
        case ScoreMethod::mcm_ole: return "mcm_ole";
        case ScoreMethod::clipn_ole: return "clipn_ole";
    }
    return "?";
}

bool needs_no_branch(ScoreMethod method) {
    return method == ScoreMethod::clipn || method == ScoreMethod::clipn_ole;
}

ScoringContext::ScoringContext(Matrix id_embeddings, PrototypeSet prototypes, double temperature, NoBranch no_branch)
    : id_(std::move(id_embeddings)), prototypes_(std::move(prototypes)), tau_(temperature), no_(std::move(no_branch)) {
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ValidationError("temperature must be positive");
    if (id_.rows() == 0) throw ValidationError("scoring needs at least one ID class");
    if (!prototypes_.is_empty() && prototypes_.dim() != id_.cols())
        throw ValidationError("prototype dimension does not match ID embeddings");
    if (auto* p = std::get_if<NoProbabilities>(&no_)) {
        if (p->values.cols() != id_.rows())
            throw ValidationError("no-probabilities have " + std::to_string(p->values.cols()) + " columns, expected " +
                                  std::to_string(id_.rows()));
        if (!p->values.allFinite() || (p->values.array() < 0.0).any() || (p->values.array() > 1.0).any())
            throw ValidationError("no-probabilities must lie in [0, 1]");
    }
    if (auto* e = std::get_if<NoEmbeddings>(&no_)) {
        if (e->vectors.rows() != id_.rows() || e->vectors.cols() != id_.cols())
            throw ValidationError("no-embeddings must have the same shape as the ID embeddings");
    }
}

ScoringContext ScoringContext::with_prototypes(PrototypeSet prototypes) const {
    return ScoringContext(id_, std::move(prototypes), tau_, no_);
}

Vector yes_probabilities(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx) {
    check_dim(x, ctx);
    const Vector logits = ctx.id_embeddings() * x / ctx.temperature();
    const double shift = logits.maxCoeff();
    const double denom = sum_exp(logits, shift);
    return (logits.array() - shift).exp() / denom;
}

Vector yes_probabilities_ole(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx) {
    check_dim(x, ctx);
    const Vector logits = ctx.id_embeddings() * x / ctx.temperature();
    double shift = logits.maxCoeff();
    Vector outlier;
    if (!ctx.prototypes().is_empty()) {
        outlier = ctx.prototypes().vectors() * x / ctx.temperature();
        shift = std::max(shift, outlier.maxCoeff());
    }
    double denom = sum_exp(logits, shift);
    if (outlier.size() > 0) denom += sum_exp(outlier, shift);
    return (logits.array() - shift).exp() / denom;
}

Vector no_probabilities(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx, Eigen::Index image) {
    check_dim(x, ctx);
    if (auto* p = std::get_if<NoProbabilities>(&ctx.no_branch())) {
        if (image < 0 || image >= p->values.rows())
            throw ValidationError("no stored no-probabilities for image " + std::to_string(image));
        return p->values.row(image).transpose();
    }
    if (auto* e = std::get_if<NoEmbeddings>(&ctx.no_branch())) {
        const Vector yes = ctx.id_embeddings() * x;
        const Vector no = e->vectors * x;
        Vector out(yes.size());
        for (Eigen::Index j = 0; j < yes.size(); ++j) out(j) = stable_sigmoid((no(j) - yes(j)) / ctx.temperature());
        return out;
    }
    throw ValidationError("no-branch data required but not supplied");
}

double id_score(const Eigen::Ref<const Vector>& x, const ScoringContext& ctx, ScoreMethod method, Eigen::Index image) {
    if (needs_no_branch(method) && !ctx.has_no_branch())
        throw ValidationError("method " + method_name(method) + " requires no-branch data");
    switch (method) {
        case ScoreMethod::mcm: return yes_probabilities(x, ctx).maxCoeff();
        case ScoreMethod::mcm_ole: return yes_probabilities_ole(x, ctx).maxCoeff();
        case ScoreMethod::maxlogit: check_dim(x, ctx); return (ctx.id_embeddings() * x).maxCoeff();
        case ScoreMethod::energy: {
            check_dim(x, ctx);
            const Vector logits = ctx.id_embeddings() * x / ctx.temperature();
            const double shift = logits.maxCoeff();
            return ctx.temperature() * (shift + std::log(sum_exp(logits, shift)));
        }
        case ScoreMethod::clipn:
        case ScoreMethod::clipn_ole: {
            const Vector yes = method == ScoreMethod::clipn ? yes_probabilities(x, ctx) : yes_probabilities_ole(x, ctx);
            const Vector no = no_probabilities(x, ctx, image);
            return ((1.0 - no.array()) * yes.array()).sum();
        }
    }
    throw ValidationError("unknown score method");
}

std::vector<double> score_batch(const LabeledEmbeddings& images, const ScoringContext& ctx, ScoreMethod method) {
    if (images.dim() != ctx.dim()) throw ValidationError("image dimension does not match the scoring context");
    if (needs_no_branch(method) && !ctx.has_no_branch())
        throw ValidationError("method " + method_name(method) + " requires no-branch data");
    if (auto* p = std::get_if<NoProbabilities>(&ctx.no_branch()); p && needs_no_branch(method) &&
                                                                   p->values.rows() != images.rows())
        throw ValidationError("no-probabilities row count does not match image count");
    std::vector<double> out(static_cast<std::size_t>(images.rows()));
    parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            out[i] = id_score(images.matrix().row(r).transpose(), ctx, method, r);
        }
    });
    return out;
}

void write_scores_csv(const std::filesystem::path& path, const LabeledEmbeddings& images,
                      const std::vector<double>& scores) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "index,label,score\n";
    char buf[64];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, scores[i]);
        out << i << ',' << csv_field(images.has_labels() ? images.labels()[i] : std::string()) << ','
            << std::string(buf, end) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<double> read_scores_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("index,label,score", 0) != 0)
        throw FormatError(FormatError::Kind::bad_magic, "score file must start with 'index,label,score'", 0);
    std::vector<double> scores;
    std::size_t row = 0;
    std::string pending;
    while (std::getline(in, line)) {
        pending += line;
        // A quoted label may span lines; an odd number of quotes means the record continues.
        if (std::count(pending.begin(), pending.end(), '"') % 2 == 1) {
            pending += '\n';
            continue;
        }
        if (pending.empty()) continue;
        const auto comma = pending.rfind(',');
        if (comma == std::string::npos)
            throw FormatError(FormatError::Kind::csv_syntax, "malformed score row", std::nullopt, row);
        const std::string field = pending.substr(comma + 1);
        double v = 0.0;
        auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || p != field.data() + field.size() || !std::isfinite(v))
            throw FormatError(FormatError::Kind::csv_syntax, "malformed score '" + field + "'", std::nullopt, row);
        scores.push_back(v);
        pending.clear();
        ++row;
    }
    return scores;
}

}  // namespace ole

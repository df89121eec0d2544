#include "ole/prototype_set.hpp"

#include <cmath>
#include <cstdio>

#include "ole/errors.hpp"

namespace ole {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

Eigen::Index parse_index(const std::string& s, const std::string& label) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 0) throw std::invalid_argument(s);
        return static_cast<Eigen::Index>(v);
    } catch (const std::exception&) {
        throw ValidationError("malformed prototype label '" + label + "'");
    }
}

}  // namespace

Provenance Provenance::learned(Eigen::Index component, std::optional<double> weight) {
    Provenance p;
    p.tag = PrototypeTag::learned;
    p.component = component;
    p.weight = weight;
    return p;
}

Provenance Provenance::hard(Eigen::Index fringe, Eigen::Index prototype, double alpha) {
    Provenance p;
    p.tag = PrototypeTag::hard;
    p.fringe = fringe;
    p.prototype = prototype;
    p.alpha = alpha;
    return p;
}

std::string Provenance::label() const {
    if (tag == PrototypeTag::learned) return "learned:" + std::to_string(component);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", alpha);
    return "hard:" + std::to_string(fringe) + ":" + std::to_string(prototype) + ":" + buf;
}

Provenance Provenance::parse(const std::string& label) {
    const auto parts = split(label, ':');
    if (parts.size() == 2 && parts[0] == "learned") return learned(parse_index(parts[1], label));
    if (parts.size() == 4 && parts[0] == "hard") {
        double alpha = 0.0;
        try {
            std::size_t used = 0;
            alpha = std::stod(parts[3], &used);
            if (used != parts[3].size()) throw std::invalid_argument(parts[3]);
        } catch (const std::exception&) {
            throw ValidationError("malformed prototype label '" + label + "'");
        }
        return hard(parse_index(parts[1], label), parse_index(parts[2], label), alpha);
    }
    throw ValidationError("malformed prototype label '" + label + "'");
}

PrototypeSet::PrototypeSet(Matrix vectors, std::vector<Provenance> provenance)
    : vectors_(std::move(vectors)), provenance_(std::move(provenance)) {
    if (static_cast<Eigen::Index>(provenance_.size()) != vectors_.rows())
        throw ValidationError("provenance count does not match prototype count");
    for (Eigen::Index i = 0; i < vectors_.rows(); ++i) {
        const double norm = vectors_.row(i).norm();
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitTolerance)
            throw ValidationError("prototype " + std::to_string(i) + " is not unit-normalized");
    }
}

PrototypeSet PrototypeSet::empty(Eigen::Index dim) {
    return PrototypeSet(Matrix(0, dim), {});
}

PrototypeSet PrototypeSet::select(const std::vector<Eigen::Index>& indices) const {
    Matrix m(static_cast<Eigen::Index>(indices.size()), dim());
    std::vector<Provenance> prov;
    prov.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = vectors_.row(indices[i]);
        prov.push_back(provenance_[static_cast<std::size_t>(indices[i])]);
    }
    return PrototypeSet(std::move(m), std::move(prov));
}

PrototypeSet PrototypeSet::concat(const PrototypeSet& other) const {
    if (dim() != other.dim() && size() > 0 && other.size() > 0)
        throw ValidationError("cannot concatenate prototype sets of different dimension");
    const Eigen::Index d = size() > 0 ? dim() : other.dim();
    Matrix m(size() + other.size(), d);
    if (size() > 0) m.topRows(size()) = vectors_;
    if (other.size() > 0) m.bottomRows(other.size()) = other.vectors_;
    auto prov = provenance_;
    prov.insert(prov.end(), other.provenance_.begin(), other.provenance_.end());
    return PrototypeSet(std::move(m), std::move(prov));
}

PrototypeSet PrototypeSet::quantized() const {
    return PrototypeSet(to_storage_precision(vectors_), provenance_);
}

LabeledEmbeddings PrototypeSet::to_embeddings() const {
    std::vector<std::string> labels;
    labels.reserve(provenance_.size());
    for (const auto& p : provenance_) labels.push_back(p.label());
    return LabeledEmbeddings(vectors_, std::move(labels), true);
}

PrototypeSet PrototypeSet::from_embeddings(const LabeledEmbeddings& data) {
    const auto normalized = data.normalized() ? data : normalize_rows(data);
    std::vector<Provenance> prov;
    prov.reserve(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        prov.push_back(data.has_labels() ? Provenance::parse(data.labels()[static_cast<std::size_t>(i)])
                                         : Provenance::learned(i));
    return PrototypeSet(normalized.matrix(), std::move(prov));
}

void save_prototypes(const PrototypeSet& set, const std::filesystem::path& path) {
    save_embeddings(set.to_embeddings(), path, FileFormat::binary);
}

PrototypeSet load_prototypes(const std::filesystem::path& path) {
    return PrototypeSet::from_embeddings(load_embeddings(path, format_for(path)));
}

}  // namespace ole

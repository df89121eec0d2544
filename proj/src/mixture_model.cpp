#include "ole/mixture_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include "ole/errors.hpp"
#include "ole/kmeans.hpp"
#include "ole/parallel.hpp"

namespace ole {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Neumaier compensated sum.
class Accumulator {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct ComponentTerms {
    Vector log_weight;  // log w_k, -inf for empty components
    Vector log_norm;    // -0.5 * sum_d log(2 pi var)
    Matrix inv_var;
};

ComponentTerms precompute(const GmmModel& m) {
    ComponentTerms t;
    const Eigen::Index k = m.components();
    t.log_weight.resize(k);
    t.log_norm.resize(k);
    t.inv_var = m.variances.cwiseInverse();
    for (Eigen::Index c = 0; c < k; ++c) {
        t.log_weight(c) = m.weights(c) > 0.0 ? std::log(m.weights(c)) : -std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (Eigen::Index j = 0; j < m.dim(); ++j) s += kLog2Pi + std::log(m.variances(c, j));
        t.log_norm(c) = -0.5 * s;
    }
    return t;
}

// Fills row i of log_joint with log w_k + log N(x_i | k) and returns log sum_k.
double row_terms(const GmmModel& m, const ComponentTerms& t, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                 double* log_joint) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < m.components(); ++c) {
        double q = 0.0;
        for (Eigen::Index j = 0; j < m.dim(); ++j) {
            const double diff = x(j) - m.means(c, j);
            q += diff * diff * t.inv_var(c, j);
        }
        const double lj = t.log_weight(c) + t.log_norm(c) - 0.5 * q;
        log_joint[c] = lj;
        if (lj > best) best = lj;
    }
    if (!std::isfinite(best)) return best;
    double s = 0.0;
    for (Eigen::Index c = 0; c < m.components(); ++c) s += std::exp(log_joint[c] - best);
    return best + std::log(s);
}

// E-step: responsibilities into resp (n x K), returns total log-likelihood.
double e_step(const GmmModel& m, const Matrix& x, Matrix& resp) {
    const auto t = precompute(m);
    std::vector<double> row_ll(static_cast<std::size_t>(x.rows()));
    parallel_for(static_cast<std::size_t>(x.rows()), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            double* lj = resp.row(r).data();
            const double ll = row_terms(m, t, x.row(r), lj);
            row_ll[i] = ll;
            if (!std::isfinite(ll)) continue;
            for (Eigen::Index c = 0; c < m.components(); ++c) lj[c] = std::exp(lj[c] - ll);
        }
    });
    Accumulator total;
    for (std::size_t i = 0; i < row_ll.size(); ++i) {
        if (!std::isfinite(row_ll[i]))
            throw NumericError("non-finite log-likelihood at row " + std::to_string(i));
        total.add(row_ll[i]);
    }
    return total.value();
}

void m_step(GmmModel& m, const Matrix& x, const Matrix& resp, double floor) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = m.components();
    Vector mass = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) mass += resp.row(i).transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
        if (!(mass(c) > 0.0)) {
            m.weights(c) = 0.0;
            continue;
        }
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
        for (Eigen::Index i = 0; i < n; ++i) mean += resp(i, c) * x.row(i);
        mean /= mass(c);
        Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(x.cols());
        for (Eigen::Index i = 0; i < n; ++i) var += resp(i, c) * (x.row(i) - mean).array().square().matrix();
        var /= mass(c);
        m.means.row(c) = mean;
        m.variances.row(c) = var.array().max(floor).matrix();
        m.weights(c) = mass(c) / static_cast<double>(n);
    }
    m.weights /= m.weights.sum();
}

GmmModel initial_model(const Matrix& x, Eigen::Index k, const EmConfig& config) {
    const auto km = kmeans(x, k, config.seed);
    GmmModel m;
    m.means = km.centers;
    m.variances = Matrix::Zero(k, x.cols());
    m.weights = Vector::Constant(k, 1.0 / static_cast<double>(k));
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto c = km.assignments[static_cast<std::size_t>(i)];
        m.variances.row(c) += (x.row(i) - m.means.row(c)).array().square().matrix();
        ++counts[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        m.variances.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
        m.variances.row(c) = m.variances.row(c).array().max(config.variance_floor).matrix();
    }
    return m;
}

void put_bytes(std::vector<unsigned char>& out, std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<unsigned char>& out, double v) {
    put_bytes(out, std::bit_cast<std::uint64_t>(v), 8);
}

}  // namespace

void EmConfig::validate() const {
    if (max_iterations <= 0) throw ValidationError("max_iterations must be positive");
    if (!(convergence_tolerance > 0.0)) throw ValidationError("convergence_tolerance must be positive");
    if (!(variance_floor > 0.0)) throw ValidationError("variance_floor must be positive");
}

void GmmModel::validate(double variance_floor) const {
    const Eigen::Index k = components();
    if (k == 0) throw ValidationError("mixture has no components");
    if (variances.rows() != k || variances.cols() != dim() || weights.size() != k)
        throw ValidationError("mixture parameter shapes disagree");
    if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9)
        throw ValidationError("mixture weights must be non-negative and sum to 1");
    if (!means.allFinite() || !variances.allFinite()) throw ValidationError("mixture parameters must be finite");
    if ((variances.array() <= 0.0).any() || (variances.array() < variance_floor).any())
        throw ValidationError("mixture variances must be positive and respect the floor");
}

GmmModel fit_gmm(const LabeledEmbeddings& data, Eigen::Index k, const EmConfig& config) {
    config.validate();
    const Eigen::Index n = data.rows();
    if (n < 2) throw ValidationError("mixture fitting needs at least 2 rows");
    if (k <= 0) throw ValidationError("mixture fitting needs K >= 1");
    if (k > n) throw ValidationError("K=" + std::to_string(k) + " exceeds the " + std::to_string(n) + " available rows");
    if (!data.normalized()) throw ValidationError("mixture fitting expects normalized data");

    const auto order = value_order(data.matrix());
    Matrix x(n, data.dim());
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = data.matrix().row(order[static_cast<std::size_t>(i)]);

    GmmModel m = initial_model(x, k, config);
    Matrix resp(n, k);
    double ll = e_step(m, x, resp);
    m.loglik_trace.push_back(ll);
    for (int it = 0; it < config.max_iterations; ++it) {
        m_step(m, x, resp, config.variance_floor);
        const double next = e_step(m, x, resp);
        m.loglik_trace.push_back(next);
        const bool converged = std::abs(next - ll) < config.convergence_tolerance;
        ll = next;
        if (converged) break;
    }
    return m;
}

double log_likelihood(const GmmModel& model, const Matrix& data) {
    if (data.cols() != model.dim())
        throw ValidationError("dimension mismatch: data has " + std::to_string(data.cols()) + ", model has " +
                              std::to_string(model.dim()));
    const auto t = precompute(model);
    std::vector<double> scratch(static_cast<std::size_t>(model.components()));
    Accumulator total;
    for (Eigen::Index i = 0; i < data.rows(); ++i) total.add(row_terms(model, t, data.row(i), scratch.data()));
    return total.value();
}

double log_likelihood(const GmmModel& model, const LabeledEmbeddings& data) {
    return log_likelihood(model, data.matrix());
}

PrototypeSet extract_prototypes(const GmmModel& model) {
    Matrix v = model.means;
    std::vector<Provenance> prov;
    for (Eigen::Index c = 0; c < v.rows(); ++c) {
        const double norm = v.row(c).norm();
        if (!(norm > 0.0)) throw NumericError("component " + std::to_string(c) + " has a zero-norm mean");
        v.row(c) /= norm;
        prov.push_back(Provenance::learned(c, model.weights(c)));
    }
    return PrototypeSet(std::move(v), std::move(prov));
}

void save_gmm(const GmmModel& model, const std::filesystem::path& path) {
    std::vector<unsigned char> out = {'O', 'L', 'E', 'G'};
    put_bytes(out, 1, 2);
    put_bytes(out, static_cast<std::uint64_t>(model.components()), 4);
    put_bytes(out, static_cast<std::uint64_t>(model.dim()), 4);
    for (Eigen::Index c = 0; c < model.components(); ++c) put_f64(out, model.weights(c));
    for (Eigen::Index c = 0; c < model.components(); ++c)
        for (Eigen::Index j = 0; j < model.dim(); ++j) put_f64(out, model.means(c, j));
    for (Eigen::Index c = 0; c < model.components(); ++c)
        for (Eigen::Index j = 0; j < model.dim(); ++j) put_f64(out, model.variances(c, j));
    put_bytes(out, model.loglik_trace.size(), 4);
    for (double v : model.loglik_trace) put_f64(out, v);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for " + path.string());
}

GmmModel load_gmm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    const std::vector<unsigned char> bytes(std::istreambuf_iterator<char>(f), {});
    std::size_t pos = 0;
    auto need = [&](std::size_t count) {
        if (bytes.size() - pos < count)
            throw FormatError(FormatError::Kind::truncated, "truncated mixture file", pos);
    };
    auto get = [&](int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += static_cast<std::size_t>(width);
        return v;
    };
    auto f64 = [&] { return std::bit_cast<double>(get(8)); };
    need(4);
    if (std::memcmp(bytes.data(), "OLEG", 4) != 0) throw FormatError(FormatError::Kind::bad_magic, "bad magic, expected \"OLEG\"", 0);
    pos = 4;
    const auto version = get(2);
    if (version != 1) throw FormatError(FormatError::Kind::bad_version, "unsupported version " + std::to_string(version), 4);
    const auto k = static_cast<Eigen::Index>(get(4));
    const auto d = static_cast<Eigen::Index>(get(4));
    GmmModel m;
    m.weights.resize(k);
    m.means.resize(k, d);
    m.variances.resize(k, d);
    for (Eigen::Index c = 0; c < k; ++c) m.weights(c) = f64();
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index j = 0; j < d; ++j) m.means(c, j) = f64();
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index j = 0; j < d; ++j) m.variances(c, j) = f64();
    const auto len = get(4);
    for (std::uint64_t i = 0; i < len; ++i) m.loglik_trace.push_back(f64());
    if (pos != bytes.size()) throw FormatError(FormatError::Kind::trailing_data, "trailing bytes in mixture file", pos);
    m.validate();
    return m;
}

}  // namespace ole

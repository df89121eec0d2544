#include "ole/embedding_store.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ole/errors.hpp"

namespace ole {

namespace {

constexpr char kMagic[4] = {'O', 'L', 'E', 'E'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kFlagNormalized = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 2 + 4 + 4;

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    std::uint64_t offset() const { return pos_; }
    std::uint64_t remaining() const { return bytes_.size() - pos_; }

    void need(std::uint64_t count, const char* what) const {
        if (remaining() < count)
            throw FormatError(FormatError::Kind::truncated,
                              std::string("truncated payload while reading ") + what, pos_);
    }

    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    const unsigned char* take(std::uint64_t count, const char* what) {
        need(count, what);
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += count;
        return p;
    }

private:
    const std::vector<unsigned char>& bytes_;
    std::uint64_t pos_ = 0;
};

void check_unit_rows(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (std::abs(norm - 1.0) > kUnitTolerance)
            throw ValidationError("row " + std::to_string(i) + " has norm " + std::to_string(norm) +
                                  " but data is flagged normalized");
    }
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("write failed for " + path.string());
}

// CSV (RFC 4180)

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool quoted = false;
    std::size_t i = 0;
    auto end_record = [&] {
        record.push_back(field);
        records.push_back(std::move(record));
        record.clear();
        field.clear();
        quoted = false;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty() || quoted)
                throw FormatError(FormatError::Kind::csv_syntax, "unexpected quote", i, records.size());
            in_quotes = true;
            quoted = true;
        } else if (c == ',') {
            record.push_back(field);
            field.clear();
            quoted = false;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            end_record();
        } else {
            if (quoted)
                throw FormatError(FormatError::Kind::csv_syntax, "text after closing quote", i, records.size());
            field += c;
        }
        ++i;
    }
    if (in_quotes)
        throw FormatError(FormatError::Kind::csv_syntax, "unterminated quoted field", text.size(), records.size());
    if (!field.empty() || !record.empty() || quoted) end_record();
    return records;
}

LabeledEmbeddings load_csv(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const auto records = parse_csv(std::string(bytes.begin(), bytes.end()));
    if (records.empty() || records[0].empty() || records[0][0] != "label")
        throw FormatError(FormatError::Kind::bad_magic, "CSV header must start with 'label'", 0, 0);
    const auto& header = records[0];
    const std::size_t d = header.size() - 1;
    for (std::size_t c = 0; c < d; ++c) {
        if (header[c + 1] != "e" + std::to_string(c))
            throw FormatError(FormatError::Kind::csv_syntax, "unexpected header column '" + header[c + 1] + "'",
                              std::nullopt, 0);
    }
    const std::size_t n = records.size() - 1;
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = records[r + 1];
        if (rec.size() != d + 1)
            throw FormatError(FormatError::Kind::csv_syntax,
                              "expected " + std::to_string(d + 1) + " fields, found " + std::to_string(rec.size()),
                              std::nullopt, r);
        labels.push_back(rec[0]);
        for (std::size_t c = 0; c < d; ++c) {
            const std::string& f = rec[c + 1];
            double v = 0.0;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || p != f.data() + f.size())
                throw FormatError(FormatError::Kind::csv_syntax, "cannot parse number '" + f + "'", std::nullopt, r);
            if (!std::isfinite(v))
                throw FormatError(FormatError::Kind::non_finite, "non-finite value", std::nullopt, r);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return LabeledEmbeddings(std::move(m), std::move(labels), false);
}

void save_csv(const LabeledEmbeddings& data, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "label";
    for (Eigen::Index c = 0; c < data.dim(); ++c) out << ",e" << c;
    out << "\n";
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        out << csv_field(data.has_labels() ? data.labels()[static_cast<std::size_t>(r)] : std::string());
        for (Eigen::Index c = 0; c < data.dim(); ++c) out << ',' << format_double(data.matrix()(r, c));
        out << "\n";
    }
    const std::string text = out.str();
    write_file(path, text.data(), text.size());
}

}  // namespace

LabeledEmbeddings::LabeledEmbeddings(Matrix matrix, std::vector<std::string> labels, bool normalized)
    : matrix_(std::move(matrix)), labels_(std::move(labels)), normalized_(normalized) {
    if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != matrix_.rows())
        throw ValidationError("label count " + std::to_string(labels_.size()) + " does not match row count " +
                              std::to_string(matrix_.rows()));
    for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
        if (!matrix_.row(i).allFinite()) throw ValidationError("row " + std::to_string(i) + " has a non-finite entry");
    }
    if (normalized_) check_unit_rows(matrix_);
}

LabeledEmbeddings LabeledEmbeddings::empty(Eigen::Index dim, bool normalized) {
    return LabeledEmbeddings(Matrix(0, dim), {}, normalized);
}

LabeledEmbeddings LabeledEmbeddings::select(const std::vector<Eigen::Index>& indices) const {
    Matrix m(static_cast<Eigen::Index>(indices.size()), dim());
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= rows()) throw ValidationError("row index out of range");
        m.row(static_cast<Eigen::Index>(i)) = matrix_.row(indices[i]);
        if (has_labels()) labels.push_back(labels_[static_cast<std::size_t>(indices[i])]);
    }
    return LabeledEmbeddings(std::move(m), std::move(labels), normalized_);
}

bool LabeledEmbeddings::identical(const LabeledEmbeddings& other) const {
    if (normalized_ != other.normalized_ || labels_ != other.labels_) return false;
    if (matrix_.rows() != other.matrix_.rows() || matrix_.cols() != other.matrix_.cols()) return false;
    return matrix_.size() == 0 ||
           std::memcmp(matrix_.data(), other.matrix_.data(), sizeof(double) * static_cast<std::size_t>(matrix_.size())) == 0;
}

std::vector<unsigned char> encode_binary(const LabeledEmbeddings& data) {
    if (data.rows() > UINT32_MAX || data.dim() > UINT32_MAX) throw ValidationError("matrix too large for OLE-EMB v1");
    std::vector<unsigned char> out;
    out.reserve(kHeaderBytes + 4 * static_cast<std::size_t>(data.matrix().size()) + 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    put_u16(out, data.normalized() ? kFlagNormalized : 0);
    put_u32(out, static_cast<std::uint32_t>(data.rows()));
    put_u32(out, static_cast<std::uint32_t>(data.dim()));
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < data.dim(); ++c)
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(data.matrix()(r, c))));
    put_u32(out, static_cast<std::uint32_t>(data.labels().size()));
    for (const auto& label : data.labels()) {
        put_u32(out, static_cast<std::uint32_t>(label.size()));
        out.insert(out.end(), label.begin(), label.end());
    }
    return out;
}

LabeledEmbeddings decode_binary(const std::vector<unsigned char>& bytes) {
    Reader in(bytes);
    const unsigned char* magic = in.take(4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(FormatError::Kind::bad_magic, "bad magic, expected \"OLEE\"", 0);
    const std::uint64_t version_at = in.offset();
    const std::uint16_t version = in.u16("version");
    if (version != kVersion)
        throw FormatError(FormatError::Kind::bad_version, "unsupported version " + std::to_string(version), version_at);
    const std::uint16_t flags = in.u16("flags");
    const std::uint32_t n = in.u32("row count");
    const std::uint32_t d = in.u32("dimension");
    const std::uint64_t payload = std::uint64_t{n} * d * 4;
    in.need(payload, "payload");
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::uint32_t r = 0; r < n; ++r) {
        for (std::uint32_t c = 0; c < d; ++c) {
            const std::uint64_t at = in.offset();
            const float v = std::bit_cast<float>(in.u32("payload"));
            if (!std::isfinite(v))
                throw FormatError(FormatError::Kind::non_finite, "non-finite value", at, r);
            m(r, c) = static_cast<double>(v);
        }
    }
    const std::uint64_t count_at = in.offset();
    const std::uint32_t label_count = in.u32("label count");
    if (label_count != 0 && label_count != n)
        throw FormatError(FormatError::Kind::label_count,
                          "label count " + std::to_string(label_count) + " does not match row count " + std::to_string(n),
                          count_at);
    std::vector<std::string> labels;
    labels.reserve(label_count);
    for (std::uint32_t i = 0; i < label_count; ++i) {
        const std::uint32_t len = in.u32("label length");
        const unsigned char* p = in.take(len, "label bytes");
        labels.emplace_back(reinterpret_cast<const char*>(p), len);
    }
    if (in.remaining() != 0) throw FormatError(FormatError::Kind::trailing_data, "trailing bytes after labels", in.offset());
    return LabeledEmbeddings(std::move(m), std::move(labels), (flags & kFlagNormalized) != 0);
}

LabeledEmbeddings load_embeddings(const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::csv) return load_csv(path);
    return decode_binary(read_file(path));
}

void save_embeddings(const LabeledEmbeddings& data, const std::filesystem::path& path, FileFormat format) {
    if (format == FileFormat::csv) {
        save_csv(data, path);
        return;
    }
    const auto bytes = encode_binary(data);
    write_file(path, bytes.data(), bytes.size());
}

FileFormat format_for(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? FileFormat::csv : FileFormat::binary;
}

LabeledEmbeddings load_normalized(const std::filesystem::path& path) {
    auto data = load_embeddings(path, format_for(path));
    return data.normalized() ? data : normalize_rows(data);
}

LabeledEmbeddings normalize_rows(const LabeledEmbeddings& data) {
    Matrix m = data.matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm == 0.0) throw ValidationError("cannot normalize zero row " + std::to_string(i));
        m.row(i) /= norm;
    }
    return LabeledEmbeddings(std::move(m), data.labels(), true);
}

Matrix to_storage_precision(const Matrix& m) {
    return m.cast<float>().cast<double>();
}

Matrix similarity_matrix(const LabeledEmbeddings& a, const LabeledEmbeddings& b) {
    if (a.dim() != b.dim())
        throw ValidationError("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    if (!a.normalized() || !b.normalized()) throw ValidationError("similarity requires normalized inputs");
    return a.matrix() * b.matrix().transpose();
}

}  // namespace ole

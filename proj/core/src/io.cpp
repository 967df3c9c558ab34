#include "smf/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "smf/errors.hpp"

namespace smf {

Eigen::Index CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<Eigen::Index>(i);
    return -1;
}

namespace {

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& why) {
    throw InputError(std::string(source) + ":" + std::to_string(line) + ": " + why);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_fields(std::string_view line, std::string_view source, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            if (!trim(cur).empty()) parse_fail(source, lineno, "stray quote");
            cur.clear();
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? cur : std::string(trim(cur)));
            cur.clear();
            was_quoted = false;
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) parse_fail(source, lineno, "unterminated quote");
    out.push_back(was_quoted ? cur : std::string(trim(cur)));
    return out;
}

double parse_number(const std::string& field, std::string_view source, std::size_t lineno, std::size_t col) {
    const std::string_view s = trim(field);
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc() || ptr != last)
        parse_fail(source, lineno, "column " + std::to_string(col + 1) + ": '" + field + "' is not a number");
    return v;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace

CsvTable parse_csv(std::string_view text, std::string_view source) {
    CsvTable t;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    bool have_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty() && line.front() == '#') {
            std::string_view c = line.substr(1);
            if (!c.empty() && c.front() == ' ') c.remove_prefix(1);
            t.comments.emplace_back(c);
            continue;
        }
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, source, lineno);
        if (!have_header) {
            t.columns = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.columns.size())
            parse_fail(source, lineno,
                       "expected " + std::to_string(t.columns.size()) + " fields, found " + std::to_string(fields.size()));
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) row[c] = parse_number(fields[c], source, lineno, c);
        rows.push_back(std::move(row));
    }
    if (!have_header) throw InputError(std::string(source) + ": missing header row");
    t.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            t.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(slurp(path), path.string()); }

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string format_csv(std::string_view comment, const std::vector<std::string>& columns, const Eigen::MatrixXd& data) {
    if (static_cast<Eigen::Index>(columns.size()) != data.cols())
        throw InputError("column names do not match the data width");
    std::string out;
    if (!comment.empty()) {
        out += "# ";
        out += comment;
        out += '\n';
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out += ',';
        out += quote_if_needed(columns[c]);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            if (c) out += ',';
            out += format_double(data(r, c));
        }
        out += '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path, std::string_view comment, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& data) {
    spill(path, format_csv(comment, columns, data));
}

void write_sample_matrix_csv(const std::filesystem::path& path, std::string_view comment, const SampleMatrix& m) {
    std::vector<std::string> cols;
    for (Eigen::Index j = 0; j < m.cols(); ++j) cols.push_back("s" + std::to_string(j + 1));
    if (!m.v_draws()) {
        write_csv(path, comment, cols, m.values());
        return;
    }
    cols.emplace_back("v");
    Eigen::MatrixXd all(m.rows(), m.cols() + 1);
    all << m.values(), *m.v_draws();
    write_csv(path, comment, cols, all);
}

SampleMatrix read_sample_matrix_csv(const std::filesystem::path& path, FieldKind kind) {
    CsvTable t = read_csv(path);
    if (t.columns.empty()) throw InputError(path.string() + ": no columns");
    if (t.data.rows() == 0) throw InputError(path.string() + ": no data rows");
    if (t.columns.back() == "v") {
        const Eigen::Index J = t.data.cols() - 1;
        if (J < 1) throw InputError(path.string() + ": no field columns");
        Eigen::VectorXd v = t.data.col(J);
        return SampleMatrix(t.data.leftCols(J), FieldKind::ScaleMixture, std::move(v));
    }
    if (kind == FieldKind::ScaleMixture) throw InputError(path.string() + ": scale-mixture data needs a 'v' column");
    return SampleMatrix(std::move(t.data), kind);
}

namespace {

template <typename T>
void put_le(std::string& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

}  // namespace

void write_smx1(const std::filesystem::path& path, const Eigen::MatrixXd& data) {
    if (data.rows() > 0xffffffffLL || data.cols() > 0xffffffffLL) throw SizeError("matrix too large for SMX1");
    std::string out = "SMX1";
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.cols()));
    out.reserve(out.size() + static_cast<std::size_t>(data.size()) * 8);
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < data.cols(); ++c) put_le<double>(out, data(r, c));
    spill(path, out);
}

Eigen::MatrixXd read_smx1(const std::filesystem::path& path) {
    const std::string in = slurp(path);
    if (in.size() < 12 || in.compare(0, 4, "SMX1") != 0) throw InputError(path.string() + ": not an SMX1 file");
    const auto n = get_le<std::uint32_t>(in.data() + 4);
    const auto J = get_le<std::uint32_t>(in.data() + 8);
    const std::size_t expected = 12 + static_cast<std::size_t>(n) * J * 8;
    if (in.size() != expected)
        throw InputError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                         std::to_string(in.size()));
    Eigen::MatrixXd m(n, J);
    const char* p = in.data() + 12;
    for (std::uint32_t r = 0; r < n; ++r)
        for (std::uint32_t c = 0; c < J; ++c, p += 8) m(r, c) = get_le<double>(p);
    return m;
}

SitesFile read_sites_csv(const std::filesystem::path& path, bool allow_coincident) {
    const CsvTable t = read_csv(path);
    const auto ix = t.column("x"), iy = t.column("y");
    if (ix < 0 || iy < 0) throw InputError(path.string() + ": sites file needs columns x and y");
    if (t.data.rows() == 0) throw InputError(path.string() + ": no sites");
    std::vector<Point2> pts;
    for (Eigen::Index r = 0; r < t.data.rows(); ++r) pts.push_back({t.data(r, ix), t.data(r, iy)});
    std::vector<Eigen::Index> cov_cols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        if (ci == ix || ci == iy) continue;
        cov_cols.push_back(ci);
        names.push_back(t.columns[c]);
    }
    CovariateTable cov(t.data.rows(), static_cast<Eigen::Index>(cov_cols.size()));
    for (std::size_t k = 0; k < cov_cols.size(); ++k) cov.col(static_cast<Eigen::Index>(k)) = t.data.col(cov_cols[k]);
    return {SiteSet(std::move(pts), allow_coincident), std::move(cov), std::move(names)};
}

GammaMixture read_mixture_csv(const std::filesystem::path& path, MeanPolicy policy) {
    const CsvTable t = read_csv(path);
    const auto iw = t.column("weight"), ia = t.column("shape"), ib = t.column("scale");
    if (iw < 0 || ia < 0 || ib < 0) throw InputError(path.string() + ": mixture file needs weight, shape, scale");
    std::vector<GammaComponent> comps;
    for (Eigen::Index r = 0; r < t.data.rows(); ++r) comps.push_back({t.data(r, iw), t.data(r, ia), t.data(r, ib)});
    return GammaMixture(std::move(comps), policy);
}

void write_mixture_csv(const std::filesystem::path& path, std::string_view comment, const GammaMixture& mix) {
    const auto comps = mix.components();
    Eigen::MatrixXd d(static_cast<Eigen::Index>(comps.size()), 3);
    for (std::size_t s = 0; s < comps.size(); ++s)
        d.row(static_cast<Eigen::Index>(s)) << comps[s].weight, comps[s].shape, comps[s].scale;
    write_csv(path, comment, {"weight", "shape", "scale"}, d);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    for (int i = 15; i >= 0; --i, v >>= 4) buf[i] = "0123456789abcdef"[v & 0xf];
    buf[16] = '\0';
    return buf;
}

}  // namespace smf

#pragma once
#include <pdcd/diagnostics.hpp>
#include <json.hpp>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace pdcd {

class IoError : public Error
{
public:
    using Error::Error;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline bool parse_index(std::string_view s, long long& out)
{
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t k = 0;
    while (k < s.size()) {
        while (k < s.size() && (s[k] == ' ' || s[k] == '\t' || s[k] == '\r')) ++k;
        const std::size_t b = k;
        while (k < s.size() && s[k] != ' ' && s[k] != '\t' && s[k] != '\r') ++k;
        if (k > b) out.push_back(s.substr(b, k - b));
    }
    return out;
}

inline std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    return out;
}

} // namespace detail

// -----------------------------------------------------------------------
// libsvm sparse text format
// -----------------------------------------------------------------------

struct LibsvmData
{
    SparseMatrix X; // samples x features
    Vector labels;  // +-1
};

/*
 * Lines "label idx:val idx:val ...", indices 1-based. Labels +1/1 map to +1,
 * -1 and 0 map to -1; anything else is rejected. Blank lines and lines
 * starting with '#' are skipped. The feature count is the largest index
 * seen, or min_features if that is larger.
 */
inline LibsvmData parse_libsvm(std::istream& in, const std::string& source = "<stream>", Index min_features = 0)
{
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<double> labels;
    Index features = min_features;
    std::string line;
    long long lineno = 0;
    auto fail = [&](const std::string& what) -> IoError {
        return IoError(source + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view sv = detail::trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const auto tok = detail::split_ws(sv);
        double lab = 0.0;
        if (!detail::parse_double(tok[0], lab)) throw fail("malformed label '" + std::string(tok[0]) + "'");
        if (lab == 1.0) lab = 1.0;
        else if (lab == -1.0 || lab == 0.0) lab = -1.0;
        else throw fail("label must be +1, -1 or 0");
        const Index row = static_cast<Index>(labels.size());
        labels.push_back(lab);
        std::vector<long long> seen;
        for (std::size_t t = 1; t < tok.size(); ++t) {
            const auto colon = tok[t].find(':');
            if (colon == std::string_view::npos) throw fail("expected idx:val, got '" + std::string(tok[t]) + "'");
            long long idx = 0;
            double val = 0.0;
            if (!detail::parse_index(tok[t].substr(0, colon), idx) || idx < 1) throw fail("bad feature index");
            if (!detail::parse_double(tok[t].substr(colon + 1), val)) throw fail("bad feature value");
            if (!std::isfinite(val)) throw fail("non-finite feature value");
            if (std::find(seen.begin(), seen.end(), idx) != seen.end()) {
                throw fail("feature " + std::to_string(idx) + " repeated");
            }
            seen.push_back(idx);
            features = std::max<Index>(features, static_cast<Index>(idx));
            trips.emplace_back(row, static_cast<Index>(idx - 1), val);
        }
    }
    if (labels.empty()) throw IoError(source + ": no samples");
    LibsvmData d;
    d.X = SparseMatrix(static_cast<Index>(labels.size()), features);
    d.X.setFromTriplets(trips.begin(), trips.end());
    d.X.makeCompressed();
    d.labels = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
    return d;
}

inline LibsvmData read_libsvm(const std::string& path, Index min_features = 0)
{
    auto in = detail::open_in(path);
    return parse_libsvm(in, path, min_features);
}

inline void write_libsvm(std::ostream& out, const SparseMatrix& X, const Vector& labels)
{
    detail::require_shape(X.rows() == labels.size(), "write_libsvm: one label per row is required");
    const Eigen::SparseMatrix<double, Eigen::RowMajor> R(X);
    out << std::setprecision(17);
    for (Index r = 0; r < R.rows(); ++r) {
        out << (labels[r] > 0 ? "+1" : "-1");
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(R, r); it; ++it) {
            out << ' ' << (it.index() + 1) << ':' << it.value();
        }
        out << '\n';
    }
}

inline void write_libsvm(const std::string& path, const SparseMatrix& X, const Vector& labels)
{
    auto out = detail::open_out(path);
    write_libsvm(out, X, labels);
}

// -----------------------------------------------------------------------
// Dense CSV
// -----------------------------------------------------------------------

inline Matrix parse_csv_matrix(std::istream& in, const std::string& source = "<stream>")
{
    std::vector<std::vector<double>> rows;
    std::string line;
    long long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view sv = detail::trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        std::vector<double> row;
        std::size_t b = 0;
        while (true) {
            const std::size_t e = sv.find(',', b);
            const auto cell = sv.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
            double v = 0.0;
            if (!detail::parse_double(cell, v) || !std::isfinite(v)) {
                throw IoError(source + ":" + std::to_string(lineno) + ": bad number '" + std::string(cell) + "'");
            }
            row.push_back(v);
            if (e == std::string_view::npos) break;
            b = e + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw IoError(source + ":" + std::to_string(lineno) + ": row length differs from the first row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(source + ": empty matrix");
    Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index r = 0; r < M.rows(); ++r) {
        for (Index c = 0; c < M.cols(); ++c) M(r, c) = rows[r][c];
    }
    return M;
}

inline Matrix read_csv_matrix(const std::string& path)
{
    auto in = detail::open_in(path);
    return parse_csv_matrix(in, path);
}

/* a single column or a single row of a CSV file */
inline Vector read_csv_vector(const std::string& path)
{
    const Matrix M = read_csv_matrix(path);
    if (M.cols() == 1) return M.col(0);
    if (M.rows() == 1) return M.row(0).transpose();
    throw IoError(path + ": expected a single row or column");
}

// -----------------------------------------------------------------------
// Traces and solutions
// -----------------------------------------------------------------------

inline constexpr const char* trace_csv_header
    = "iteration,epoch,wall_time,objective,residual,duality_gap,distance_to_reference,lyapunov";

namespace detail {
inline void put_opt(std::ostream& out, const std::optional<double>& v)
{
    if (v) out << *v;
}
} // namespace detail

inline void write_trace_csv(std::ostream& out, const Trace& trace)
{
    out << std::setprecision(17) << trace_csv_header << '\n';
    for (const auto& c : trace.checkpoints()) {
        out << c.iteration << ',' << c.epoch << ',';
        detail::put_opt(out, c.wall_time);
        out << ',' << c.objective << ',' << c.residual << ',';
        detail::put_opt(out, c.duality_gap);
        out << ',';
        detail::put_opt(out, c.distance_to_reference);
        out << ',';
        detail::put_opt(out, c.lyapunov);
        out << '\n';
    }
}

namespace detail {
inline nlohmann::json opt_json(const std::optional<double>& v)
{
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}
inline nlohmann::json num_json(double v)
{
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}
} // namespace detail

/*
 * {"columns": [...], "checkpoints": [{"iteration": k, ...}, ...]}.
 * Absent optional values are null; an infinite objective is the string "inf".
 */
inline nlohmann::json trace_to_json(const Trace& trace)
{
    nlohmann::json j;
    j["columns"] = {"iteration", "epoch", "wall_time", "objective", "residual", "duality_gap", "distance_to_reference",
        "lyapunov"};
    j["checkpoints"] = nlohmann::json::array();
    for (const auto& c : trace.checkpoints()) {
        nlohmann::json r;
        r["iteration"] = c.iteration;
        r["epoch"] = c.epoch;
        r["wall_time"] = detail::opt_json(c.wall_time);
        r["objective"] = detail::num_json(c.objective);
        r["residual"] = detail::num_json(c.residual);
        r["duality_gap"] = detail::opt_json(c.duality_gap);
        r["distance_to_reference"] = detail::opt_json(c.distance_to_reference);
        r["lyapunov"] = detail::opt_json(c.lyapunov);
        j["checkpoints"].push_back(std::move(r));
    }
    return j;
}

inline void write_trace(const std::string& path, const Trace& trace, const std::string& format)
{
    auto out = detail::open_out(path);
    if (format == "csv") write_trace_csv(out, trace);
    else if (format == "json") out << trace_to_json(trace).dump(2) << '\n';
    else throw InvalidArgument("unknown trace format '" + format + "' (expected csv or json)");
}

inline void write_solution(const std::string& path, const BlockVector& x, const BlockVector& z, const std::string& format)
{
    auto out = detail::open_out(path);
    if (format == "csv") {
        out << "x\n";
        for (Index k = 0; k < x.size(); ++k) out << x.data()[k] << '\n';
    } else if (format == "json") {
        nlohmann::json j;
        j["x"] = std::vector<double>(x.data().begin(), x.data().end());
        j["y"] = std::vector<double>(z.data().begin(), z.data().end());
        out << j.dump(2) << '\n';
    } else {
        throw InvalidArgument("unknown solution format '" + format + "' (expected csv or json)");
    }
}

} // namespace pdcd

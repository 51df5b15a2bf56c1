#pragma once

// CSV emission and parsing for trajectories and fields. Reals are written in
// the shortest form that round-trips exactly.

#include <charconv>
#include <complex>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qflow/errors.hpp"
#include "qflow/model.hpp"

namespace qflow::io {

inline constexpr std::string_view trajectory_schema = "qflow.trajectories/1";
inline constexpr std::string_view field_schema = "qflow.fields/1";
inline constexpr std::string_view trajectory_header = "t,a,q,qdot,chi";
inline constexpr std::string_view field_header = "t,x,rho,S,v,re_psi,im_psi,mask";

inline std::string real(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_schema(std::ostream& out, std::string_view schema, std::string_view header) {
    out << "# schema: " << schema << '\n' << header << '\n';
}

inline void write_trajectories(std::ostream& out, std::span<const TrajectoryState> history) {
    write_schema(out, trajectory_schema, trajectory_header);
    for (const auto& s : history) {
        const std::string t = real(s.t);
        for (std::size_t i = 0; i < s.q.size(); ++i) {
            out << t << ',' << real(s.labels[i]) << ',' << real(s.q[i]) << ',' << real(s.qdot[i]) << ','
                << real(s.chi[i]) << '\n';
        }
    }
}

/// One output row of a field file; fields are not restricted to uniform grids.
struct FieldRow {
    double t = 0.0;
    double x = 0.0;
    double rho = 0.0;
    double S = 0.0;
    double v = 0.0;
    cplx psi{0.0, 0.0};
    int mask = 0;
};

inline void write_field_rows(std::ostream& out, std::span<const FieldRow> rows) {
    write_schema(out, field_schema, field_header);
    for (const auto& r : rows) {
        out << real(r.t) << ',' << real(r.x) << ',' << real(r.rho) << ',' << real(r.S) << ',' << real(r.v) << ','
            << real(r.psi.real()) << ',' << real(r.psi.imag()) << ',' << r.mask << '\n';
    }
}

/// Masked-out entries are written as zeros with mask 0.
inline std::vector<FieldRow> field_rows(const EulerianField& f) {
    std::vector<FieldRow> rows(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto& r = rows[i];
        r.t = f.t;
        r.x = f.x[i];
        r.mask = f.mask.empty() ? 1 : f.mask[i];
        if (!r.mask) continue;
        if (f.has_rho_S) {
            r.rho = f.rho[i];
            r.S = f.S[i];
        }
        if (f.has_v) r.v = f.v[i];
        if (f.has_psi) r.psi = f.psi[i];
    }
    return rows;
}

inline void write_fields(std::ostream& out, std::span<const EulerianField> fields) {
    std::vector<FieldRow> rows;
    for (const auto& f : fields) {
        auto r = field_rows(f);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    write_field_rows(out, rows);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) return out;
        start = comma + 1;
    }
}

inline double parse_real(std::string_view s, const std::string& where) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError(where + ": cannot parse '" + std::string(s) + "' as a number");
    }
    return v;
}

}  // namespace detail

inline std::vector<FieldRow> read_field_rows(std::istream& in, const std::string& origin = "fields") {
    std::string line;
    if (!std::getline(in, line) || line != "# schema: " + std::string(field_schema)) {
        throw ValidationError(origin + ": missing or unsupported schema line");
    }
    if (!std::getline(in, line) || line != field_header) {
        throw ValidationError(origin + ": unexpected header");
    }
    std::vector<FieldRow> rows;
    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cols = detail::split(line);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (cols.size() != 8) throw ValidationError(where + ": expected 8 columns");
        FieldRow r;
        r.t = detail::parse_real(cols[0], where);
        r.x = detail::parse_real(cols[1], where);
        r.rho = detail::parse_real(cols[2], where);
        r.S = detail::parse_real(cols[3], where);
        r.v = detail::parse_real(cols[4], where);
        r.psi = {detail::parse_real(cols[5], where), detail::parse_real(cols[6], where)};
        r.mask = detail::parse_real(cols[7], where) != 0.0 ? 1 : 0;
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<FieldRow> read_field_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path);
    return read_field_rows(in, path);
}

/// Rows belonging to the latest time level in the file.
inline std::vector<FieldRow> last_time_level(const std::vector<FieldRow>& rows) {
    if (rows.empty()) throw ValidationError("field file has no rows");
    const double t = rows.back().t;
    std::vector<FieldRow> out;
    for (const auto& r : rows) {
        if (r.t == t) out.push_back(r);
    }
    return out;
}

}  // namespace qflow::io

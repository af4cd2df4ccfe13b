#pragma once
// File formats: numeric CSV matrices, 1-based label files, penalty grids and
// model specs as JSON, and the diagnostics / solution sidecars.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "atc/adapt.hpp"
#include "atc/core.hpp"
#include "atc/models.hpp"
#include "atc/tc.hpp"

namespace atc::io {

using json = nlohmann::json;

// Shortest round-trip decimal form; independent of the C locale.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV matrices
// ---------------------------------------------------------------------------

// Rows of numbers separated by commas; a first line that does not parse is
// treated as a header.
inline Eigen::MatrixXd parse_csv_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, ',');
        std::vector<double> row(fields.size());
        bool ok = true;
        for (std::size_t j = 0; j < fields.size() && ok; ++j) ok = detail::parse_double(fields[j], row[j]);
        if (!ok) {
            if (first) {
                first = false;
                continue;
            }
            throw DataError("CSV line " + std::to_string(line_no) + ": non-numeric field");
        }
        first = false;
        for (double v : row)
            if (!std::isfinite(v)) throw DataError("CSV line " + std::to_string(line_no) + ": non-finite value");
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError("CSV line " + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("CSV: no data rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

inline FeatureMatrix read_feature_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return FeatureMatrix{parse_csv_matrix(in)};
}

inline AdjacencyMatrix adjacency_from_matrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw DataError("adjacency CSV must be square");
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<std::uint8_t> bits(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (v != 0.0 && v != 1.0) throw DataError("adjacency CSV entries must be 0 or 1");
            bits[i * n + j] = v == 1.0 ? 1 : 0;
        }
    try {
        return AdjacencyMatrix(n, std::move(bits));
    } catch (const InvalidArgument& e) {
        throw DataError(e.what());
    }
}

inline AdjacencyMatrix read_adjacency_csv(const std::string& path) {
    auto in = detail::open_in(path);
    return adjacency_from_matrix(parse_csv_matrix(in));
}

// Feature or adjacency data, according to the family that models it.
inline Dataset read_dataset(const std::string& path, ModelFamily family) {
    if (family == ModelFamily::sbm) return read_adjacency_csv(path);
    return read_feature_csv(path);
}

inline void write_csv_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

inline void write_dataset(const std::string& path, const Dataset& data) {
    auto out = detail::open_out(path);
    if (const auto* f = std::get_if<FeatureMatrix>(&data)) {
        write_csv_matrix(out, f->values);
        return;
    }
    const auto& a = std::get<AdjacencyMatrix>(data);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) out << (j ? "," : "") << (a.edge(i, j) ? '1' : '0');
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// labels: one 1-based integer per line
// ---------------------------------------------------------------------------

inline std::vector<int> parse_label_lines(std::istream& in) {
    std::vector<int> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        int v = 0;
        const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
        if (res.ec != std::errc() || res.ptr != t.data() + t.size() || v < 1)
            throw DataError("label file line " + std::to_string(line_no) + ": expected a positive integer");
        out.push_back(v);
    }
    if (out.empty()) throw DataError("label file is empty");
    return out;
}

// k = 0 infers the cluster count from the largest label (at least 2).
inline LabelVector read_labels(const std::string& path, int k = 0) {
    auto in = detail::open_in(path);
    const auto raw = parse_label_lines(in);
    const int max_label = *std::max_element(raw.begin(), raw.end());
    if (k == 0) k = std::max(2, max_label);
    if (max_label > k) throw DataError("label exceeds the cluster count");
    return LabelVector::from_one_based(raw, k);
}

inline void write_labels(std::ostream& out, const LabelVector& z) {
    for (int v : z.one_based()) out << v << '\n';
}

inline void write_labels(const std::string& path, const LabelVector& z) {
    auto out = detail::open_out(path);
    write_labels(out, z);
}

// ---------------------------------------------------------------------------
// penalties and grids
// ---------------------------------------------------------------------------

inline json penalty_to_json(Penalty p) { return p.is_infinite() ? json("inf") : json(p.value()); }

inline Penalty penalty_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return Penalty::infinity();
        throw DataError("penalty: the only string allowed is \"inf\"");
    }
    if (!j.is_number()) throw DataError("penalty: expected a number or \"inf\"");
    try {
        return Penalty(j.get<double>());
    } catch (const InvalidArgument& e) {
        throw DataError(e.what());
    }
}

inline json grid_to_json(const PenaltyGrid& g) {
    json arr = json::array();
    for (const auto& p : g.points()) arr.push_back(penalty_to_json(p));
    return arr;
}

inline PenaltyGrid grid_from_json(const json& j) {
    if (!j.is_array()) throw DataError("grid: expected a JSON array");
    std::vector<double> values;
    bool inf = false;
    for (const auto& e : j) {
        const Penalty p = penalty_from_json(e);
        if (p.is_infinite()) {
            inf = true;
            continue;
        }
        if (inf) throw DataError("grid: \"inf\" must be the last entry");
        values.push_back(p.value());
    }
    try {
        return PenaltyGrid(std::move(values), inf);
    } catch (const InvalidArgument& e) {
        throw DataError(e.what());
    }
}

inline json read_json(const std::string& path) {
    auto in = detail::open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_json(const std::string& path, const json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// model specs
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::VectorXd to_vector(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json from_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::MatrixXd to_matrix(const json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw DataError("matrix: no rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw DataError("matrix: ragged rows");
        for (std::size_t c = 0; c < rows[i].size(); ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    }
    return m;
}

inline json from_matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) r[static_cast<std::size_t>(c)] = m(i, c);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace detail

inline json model_to_json(const ModelSpec& spec) {
    json params;
    switch (spec.family()) {
        case ModelFamily::sym_gmm2: {
            const auto& p = spec.as<SymGmm2Params>();
            params = {{"mu", detail::from_vector(p.mu)}, {"sigma", p.sigma}};
            break;
        }
        case ModelFamily::gmm_k: {
            const auto& p = spec.as<GmmKParams>();
            json means = json::array(), covs = json::array();
            for (const auto& m : p.means) means.push_back(detail::from_vector(m));
            for (const auto& s : p.covariances) covs.push_back(detail::from_matrix(s));
            params = {{"weights", detail::from_vector(p.weights)}, {"means", means}, {"covariances", covs}};
            break;
        }
        case ModelFamily::lcm: {
            const auto& p = spec.as<LcmParams>();
            params = {{"weights", detail::from_vector(p.weights)}, {"item_probs", detail::from_matrix(p.item_probs)}};
            break;
        }
        case ModelFamily::sbm: {
            const auto& p = spec.as<SbmParams>();
            params = {{"weights", detail::from_vector(p.weights)}, {"link", detail::from_matrix(p.link)}};
            break;
        }
    }
    return {{"family", std::string(family_name(spec.family()))}, {"params", params}};
}

inline ModelSpec model_from_json(const json& j) {
    try {
        const ModelFamily family = parse_family(j.at("family").get<std::string>());
        const json& p = j.at("params");
        switch (family) {
            case ModelFamily::sym_gmm2:
                return ModelSpec(make_sym_gmm2(detail::to_vector(p.at("mu")), p.at("sigma").get<double>()));
            case ModelFamily::gmm_k: {
                std::vector<Eigen::VectorXd> means;
                std::vector<Eigen::MatrixXd> covs;
                for (const auto& m : p.at("means")) means.push_back(detail::to_vector(m));
                for (const auto& s : p.at("covariances")) covs.push_back(detail::to_matrix(s));
                return ModelSpec(make_gmm_k(detail::to_vector(p.at("weights")), std::move(means), std::move(covs)));
            }
            case ModelFamily::lcm:
                return ModelSpec(make_lcm(detail::to_vector(p.at("weights")), detail::to_matrix(p.at("item_probs"))));
            case ModelFamily::sbm:
                return ModelSpec(make_sbm(detail::to_vector(p.at("weights")), detail::to_matrix(p.at("link"))));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("model spec: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw DataError(std::string("model spec: ") + e.what());
    }
    throw DataError("model spec: unknown family");
}

// ---------------------------------------------------------------------------
// sidecars
// ---------------------------------------------------------------------------

inline json solution_sidecar(Penalty lambda, const TcSolution& s) {
    return {{"lambda", penalty_to_json(lambda)},
            {"objective", s.objective},
            {"disagreement", s.disagreement},
            {"sweeps", s.sweeps}};
}

inline json psi_to_json(const PsiEnvelope& psi, std::uint64_t seed) {
    return {{"grid", grid_to_json(psi.grid)},
            {"psi", psi.values},
            {"zeta", psi.zeta},
            {"b_reps", psi.b_reps},
            {"inflation", psi.inflation},
            {"seed", seed}};
}

inline json diagnostics_to_json(const AtcResult& r, std::uint64_t seed) {
    return {{"lambda_hat", penalty_to_json(r.selection.lambda_hat)},
            {"grid", grid_to_json(r.selection.grid)},
            {"psi", r.psi.values},
            {"phi", r.selection.phi},
            {"objective", r.selection.objective},
            {"epsilon_hat_naive", r.epsilon_hat_naive},
            {"b_reps", r.psi.b_reps},
            {"zeta", r.psi.zeta},
            {"seed", seed},
            {"lambda_hat_tie", r.selection.tie},
            {"source_permutation", r.source_permutation}};
}

}  // namespace atc::io

#pragma once

// JSON model/config loading and the CSV / manifest artifacts the batch CLI
// emits.  Numbers are printed with %.17g so identical runs produce
// byte-identical files.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrs/experiments.hpp"
#include "qrs/model.hpp"

namespace qrs {

using nlohmann::json;

namespace detail {

inline Complex parse_complex(const json& j) {
    if (j.is_number()) return Complex(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2) return Complex(j[0].get<double>(), j[1].get<double>());
    throw InvalidInputError("config: complex entries must be a number or [re, im]");
}

// Accepts two row forms: nested rows [[a,b],[c,d]] with entries that are
// numbers or [re,im] pairs, or a flat row-major list of four [re,im] pairs.
inline Matrix2 parse_matrix2(const json& j, const std::string& name) {
    Matrix2 m;
    if (j.is_array() && j.size() == 4) {
        for (int k = 0; k < 4; ++k) m(k / 2, k % 2) = parse_complex(j[k]);
        return m;
    }
    if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2 ||
        !j[1].is_array() || j[1].size() != 2)
        throw InvalidInputError("config: " + name + " must be a 2x2 matrix");
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) m(r, c) = parse_complex(j[r][c]);
    return m;
}

inline json dump_complex(const Complex& z) { return json::array({z.real(), z.imag()}); }

inline json dump_matrix2(const Matrix2& m) {
    json rows = json::array();
    for (int r = 0; r < 2; ++r) {
        json row = json::array();
        for (int c = 0; c < 2; ++c) row.push_back(dump_complex(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// Model document:
//   { "model": "dispersive" | "spontaneous" | "custom",
//     "lambda2": real,
//     "param_values": [...], "true_weights": [...], "nominal_weights": [...],
//     "true_system": [[..],[..]], "nominal_system": [[..],[..]],
//     "L1"/"L2"/"L3": 2x2 (custom only; the parameter p scales L2 to p * L2,
//     matching how the named models couple through their parameter) }
inline UncertainModel model_from_json(const json& j, double lambda2) {
    std::string kind_str = j.value("model", "dispersive");
    ModelKind kind;
    if (kind_str == "dispersive") kind = ModelKind::dispersive;
    else if (kind_str == "spontaneous") kind = ModelKind::spontaneous;
    else if (kind_str == "custom") kind = ModelKind::custom;
    else throw InvalidInputError("config: unknown model '" + kind_str + "'");

    if (!j.contains("param_values"))
        throw InvalidInputError("config: param_values is required");
    std::vector<double> values = j["param_values"].get<std::vector<double>>();
    std::vector<double> true_w = j.at("true_weights").get<std::vector<double>>();
    std::vector<double> nom_w = j.at("nominal_weights").get<std::vector<double>>();
    if (true_w.size() != values.size() || nom_w.size() != values.size())
        throw InvalidInputError("config: weight vectors must match param_values in length");

    Matrix2 true_sys = detail::parse_matrix2(j.at("true_system"), "true_system");
    Matrix2 nom_sys = detail::parse_matrix2(j.at("nominal_system"), "nominal_system");

    UncertainModel m;
    const double lambda = std::sqrt(lambda2);
    if (kind == ModelKind::custom) {
        Matrix2 l1 = j.contains("L1") ? detail::parse_matrix2(j["L1"], "L1") : Matrix2::Zero();
        Matrix2 l2 = detail::parse_matrix2(j.at("L2"), "L2");
        Matrix2 l3 = j.contains("L3") ? detail::parse_matrix2(j["L3"], "L3") : Matrix2::Zero();
        ParameterEnsemble ens;
        ens.values = values;
        for (double p : values) {
            HamiltonianSpec s;
            s.L1 = l1;
            s.L2 = p * l2;
            s.L3 = l3;
            s.lambda = lambda;
            ens.coeffs.push_back(build_interaction_coeffs(s));
        }
        ens.validate();
        m.ensemble = std::move(ens);
    } else {
        m.ensemble = make_ensemble(kind, values, lambda);
    }
    m.true_state = block_density(true_w, true_sys);
    m.nominal_state = block_density(nom_w, nom_sys);
    return m;
}

inline json model_to_json(const UncertainModel& m, ModelKind kind, double lambda2) {
    json j;
    j["model"] = kind == ModelKind::dispersive ? "dispersive"
                 : kind == ModelKind::spontaneous ? "spontaneous"
                                                  : "custom";
    j["lambda2"] = lambda2;
    j["param_values"] = m.ensemble.values;
    std::vector<double> tw, nw;
    for (const auto& b : m.true_state.blocks) tw.push_back(b.trace().real());
    for (const auto& b : m.nominal_state.blocks) nw.push_back(b.trace().real());
    j["true_weights"] = tw;
    j["nominal_weights"] = nw;
    const double t0 = m.true_state.total_trace();
    const double n0 = m.nominal_state.total_trace();
    // emit the normalized system block of the heaviest component
    int ti = 0, ni = 0;
    for (int i = 0; i < m.true_state.size(); ++i)
        if (tw[i] > tw[ti]) ti = i;
    for (int i = 0; i < m.nominal_state.size(); ++i)
        if (nw[i] > nw[ni]) ni = i;
    j["true_system"] = detail::dump_matrix2(m.true_state.blocks[ti] / (tw[ti] > 0 ? tw[ti] : t0));
    j["nominal_system"] =
        detail::dump_matrix2(m.nominal_state.blocks[ni] / (nw[ni] > 0 ? nw[ni] : n0));
    return j;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open config file: " + path);
    json j;
    in >> j;
    return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

// (a) per-path metrics: path_id, delta_rn, delta_rs
inline void write_metrics_csv(const std::string& path, const std::vector<ErrorMetrics>& ms) {
    std::ostringstream os;
    os << "path_id,delta_rn,delta_rs\n";
    for (std::size_t k = 0; k < ms.size(); ++k)
        os << k << ',' << detail::fmt(ms[k].delta_rn) << ',' << detail::fmt(ms[k].delta_rs)
           << '\n';
    write_text_file(path, os.str());
}

// (b) per-step trace: step, eps, eps_prime, estimate_true, estimate_rn, estimate_rs
inline void write_trace_csv(const std::string& path, const TripleResult& r) {
    std::ostringstream os;
    os << "step,eps,eps_prime,estimate_true,estimate_rn,estimate_rs\n";
    for (std::size_t l = 0; l < r.est_true.size(); ++l) {
        const double eps = l < r.metrics.eps_series.size() ? r.metrics.eps_series[l] : 0.0;
        const double epsp =
            l < r.metrics.eps_prime_series.size() ? r.metrics.eps_prime_series[l] : 0.0;
        os << (l + 1) << ',' << detail::fmt(eps) << ',' << detail::fmt(epsp) << ','
           << detail::fmt(r.est_true[l]) << ',' << detail::fmt(r.est_rn[l]) << ','
           << detail::fmt(r.est_rs[l]) << '\n';
    }
    write_text_file(path, os.str());
}

// trajectory dump: step, dy, p_plus, estimate_true, estimate_nominal_rn, estimate_nominal_rs
inline void write_trajectory_csv(const std::string& path, const TripleResult& r) {
    std::ostringstream os;
    os << "step,dy,p_plus,estimate_true,estimate_nominal_rn,estimate_nominal_rs\n";
    for (std::size_t l = 0; l < r.est_true.size(); ++l) {
        os << (l + 1) << ',' << detail::fmt(r.record.dy(static_cast<int>(l))) << ','
           << detail::fmt(r.p_plus[l]) << ',' << detail::fmt(r.est_true[l]) << ','
           << detail::fmt(r.est_rn[l]) << ',' << detail::fmt(r.est_rs[l]) << '\n';
    }
    write_text_file(path, os.str());
}

// (c) beta sweep: beta, mean_rn, mean_rs
inline void write_beta_csv(const std::string& path, const std::vector<BetaSweepRow>& rows) {
    std::ostringstream os;
    os << "beta,mean_rn,mean_rs\n";
    for (const auto& r : rows)
        os << detail::fmt(r.beta) << ',' << detail::fmt(r.mean_rn) << ','
           << detail::fmt(r.mean_rs) << '\n';
    write_text_file(path, os.str());
}

inline void write_histogram_csv(const std::string& path, const std::vector<HistogramBin>& rn,
                                const std::vector<HistogramBin>& rs) {
    std::ostringstream os;
    os << "bin_lo,bin_hi,count_rn,count_rs\n";
    for (std::size_t b = 0; b < rn.size(); ++b)
        os << detail::fmt(rn[b].lo) << ',' << detail::fmt(rn[b].hi) << ',' << rn[b].count << ','
           << rs[b].count << '\n';
    write_text_file(path, os.str());
}

inline void write_mu1_csv(const std::string& path, const Mu1Comparison& cmp) {
    std::ostringstream os;
    os << "step,mean_eps_mu_a,mean_eps_mu_b\n";
    for (std::size_t l = 0; l < cmp.mean_eps_a.size(); ++l)
        os << (l + 1) << ',' << detail::fmt(cmp.mean_eps_a[l]) << ','
           << detail::fmt(cmp.mean_eps_b[l]) << '\n';
    write_text_file(path, os.str());
}

// Every run writes a manifest sufficient to reproduce itself.
inline void write_manifest(const std::string& path, const std::string& verb,
                           const ExperimentConfig& cfg, const json& extras = json::object()) {
    json j;
    j["verb"] = verb;
    j["seed"] = cfg.master_seed;
    j["steps"] = cfg.steps;
    j["paths"] = cfg.paths;
    j["lambda2"] = cfg.lambda2;
    j["mu1"] = cfg.risk.mu1;
    j["mu2"] = cfg.risk.mu2;
    j["observable"] = detail::dump_matrix2(cfg.x_e);
    j["model"] = model_to_json(cfg.model, cfg.kind, cfg.lambda2);
    for (auto it = extras.begin(); it != extras.end(); ++it) j[it.key()] = it.value();
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace qrs

#pragma once

#include <cstdio>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "timecoord/engine.hpp"

namespace timecoord {

using nlohmann::json;

namespace detail {

inline bool expect(bool ok, const std::string& path, const std::string& what,
                   std::vector<std::string>& errors) {
    if (!ok) errors.push_back(path + ": " + what);
    return ok;
}

inline std::optional<double> number_at(const json& j, const std::string& key,
                                       const std::string& path, std::vector<std::string>& errors,
                                       bool required = true) {
    if (!j.contains(key)) {
        if (required) errors.push_back(path + "/" + key + ": missing");
        return std::nullopt;
    }
    if (!j.at(key).is_number()) {
        errors.push_back(path + "/" + key + ": must be a number");
        return std::nullopt;
    }
    return j.at(key).get<double>();
}

inline std::optional<Eigen::Vector3d> vec3_at(const json& j, const std::string& path,
                                              std::vector<std::string>& errors) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number()) {
        errors.push_back(path + ": must be an array of three numbers");
        return std::nullopt;
    }
    return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", x);
    return buf;
}

}  // namespace detail

/// Parses a scenario document, reporting every schema violation with its
/// JSON path. Domain-level validation (gain signs, dwell/dt ratio, ...) is
/// performed again by validate_scenario / run.
inline Scenario scenario_from_json(const json& j) {
    std::vector<std::string> errors;
    using detail::expect;
    using detail::number_at;
    using detail::vec3_at;

    Scenario sc;
    if (j.contains("name") && j.at("name").is_string()) sc.name = j.at("name").get<std::string>();

    const auto t_f = number_at(j, "t_f", "", errors);
    if (t_f) expect(*t_f > 0.0, "/t_f", "must be > 0", errors);

    // trajectories
    std::vector<BezierTrajectory> trs;
    if (expect(j.contains("trajectories") && j.at("trajectories").is_array() &&
                   !j.at("trajectories").empty(),
               "/trajectories", "must be a non-empty array", errors) &&
        t_f && *t_f > 0.0) {
        const auto& arr = j.at("trajectories");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "/trajectories/" + std::to_string(i);
            if (!expect(arr[i].is_object() && arr[i].contains("control_points") &&
                            arr[i].at("control_points").is_array() &&
                            arr[i].at("control_points").size() >= 2,
                        path + "/control_points", "must be an array of at least two points",
                        errors))
                continue;
            std::vector<Eigen::Vector3d> cps;
            const auto& cp = arr[i].at("control_points");
            bool ok = true;
            for (std::size_t k = 0; k < cp.size(); ++k) {
                auto v = vec3_at(cp[k], path + "/control_points/" + std::to_string(k), errors);
                if (!v) { ok = false; break; }
                cps.push_back(*v);
            }
            if (ok) trs.emplace_back(std::move(cps), *t_f);
        }
    }

    // schedule
    if (expect(j.contains("schedule") && j.at("schedule").is_object(), "/schedule",
               "must be an object", errors)) {
        const auto& sch = j.at("schedule");
        sc.schedule.cycle = sch.value("cycle", false);
        if (expect(sch.contains("segments") && sch.at("segments").is_array() &&
                       !sch.at("segments").empty(),
                   "/schedule/segments", "must be a non-empty array", errors)) {
            const auto& segs = sch.at("segments");
            int n_nodes = -1;
            for (std::size_t k = 0; k < segs.size(); ++k) {
                const std::string path = "/schedule/segments/" + std::to_string(k);
                const auto dwell = number_at(segs[k], "dwell", path, errors);
                if (dwell) expect(*dwell > 0.0, path + "/dwell", "must be > 0", errors);
                if (!expect(segs[k].contains("edges") && segs[k].at("edges").is_array(),
                            path + "/edges", "must be an array of [i, j] pairs", errors))
                    continue;
                std::vector<std::pair<int, int>> edges;
                int max_index = -1;
                bool ok = true;
                for (std::size_t e = 0; e < segs[k].at("edges").size(); ++e) {
                    const auto& ej = segs[k].at("edges")[e];
                    const std::string epath = path + "/edges/" + std::to_string(e);
                    if (!expect(ej.is_array() && ej.size() == 2 &&
                                    ej[0].is_number_integer() && ej[1].is_number_integer(),
                                epath, "must be a pair of node indices", errors)) {
                        ok = false;
                        continue;
                    }
                    const int a = ej[0].get<int>(), b = ej[1].get<int>();
                    if (!expect(a >= 0 && b >= 0 && a != b, epath,
                                "indices must be distinct and >= 0", errors)) {
                        ok = false;
                        continue;
                    }
                    edges.emplace_back(a, b);
                    max_index = std::max({max_index, a, b});
                }
                if (n_nodes < 0 && j.contains("vehicles") && j.at("vehicles").is_array())
                    n_nodes = static_cast<int>(j.at("vehicles").size());
                n_nodes = std::max(n_nodes, max_index + 1);
                if (ok && dwell && *dwell > 0.0 && n_nodes >= 1)
                    sc.schedule.segments.push_back({Digraph(n_nodes, edges), *dwell});
            }
            // re-broadcast to a common node count
            int n_final = 0;
            for (const auto& s : sc.schedule.segments) n_final = std::max(n_final, s.graph.n);
            for (auto& s : sc.schedule.segments) {
                if (s.graph.n != n_final) {
                    Digraph g(n_final);
                    g.adjacency.topLeftCorner(s.graph.n, s.graph.n) = s.graph.adjacency;
                    s.graph = std::move(g);
                }
            }
        }
    }

    // gains
    if (expect(j.contains("gains") && j.at("gains").is_object(), "/gains", "must be an object",
               errors)) {
        const auto a = number_at(j.at("gains"), "a", "/gains", errors);
        const auto b = number_at(j.at("gains"), "b", "/gains", errors);
        const auto eps = number_at(j.at("gains"), "epsilon", "/gains", errors);
        if (a) sc.gains.a = *a;
        if (b) sc.gains.b = *b;
        if (eps) sc.gains.epsilon = *eps;
    }

    // vehicles
    if (expect(j.contains("vehicles") && j.at("vehicles").is_array() && !j.at("vehicles").empty(),
               "/vehicles", "must be a non-empty array", errors)) {
        const auto& arr = j.at("vehicles");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "/vehicles/" + std::to_string(i);
            VehicleSpec v;
            if (!expect(arr[i].is_object(), path, "must be an object", errors)) {
                sc.vehicles.push_back(v);
                continue;
            }
            if (arr[i].contains("initial_pf_error")) {
                auto e = vec3_at(arr[i].at("initial_pf_error"), path + "/initial_pf_error",
                                 errors);
                if (e) v.initial_pf_error = *e;
            }
            if (arr[i].contains("k_pf")) {
                auto k = number_at(arr[i], "k_pf", path, errors);
                if (k) {
                    expect(*k > 0.0, path + "/k_pf", "must be > 0", errors);
                    v.k_pf = *k;
                }
            }
            if (arr[i].contains("disturbance") && !arr[i].at("disturbance").is_null()) {
                const auto& dj = arr[i].at("disturbance");
                const std::string dpath = path + "/disturbance";
                if (!expect(dj.is_object(), dpath, "must be an object", errors)) {
                    sc.vehicles.push_back(std::move(v));
                    continue;
                }
                const std::string kind = dj.value("kind", "none");
                if (kind == "none") {
                    v.disturbance.kind = DisturbanceProfile::Kind::None;
                } else if (kind == "constant-bias" || kind == "windowed-gust") {
                    v.disturbance.kind = kind == "constant-bias"
                                             ? DisturbanceProfile::Kind::ConstantBias
                                             : DisturbanceProfile::Kind::WindowedGust;
                    if (dj.contains("vector")) {
                        auto d = vec3_at(dj.at("vector"), dpath + "/vector", errors);
                        if (d) v.disturbance.vector = *d;
                    } else {
                        errors.push_back(dpath + "/vector: missing");
                    }
                    if (kind == "windowed-gust") {
                        if (expect(dj.contains("window") && dj.at("window").is_array() &&
                                       dj.at("window").size() == 2,
                                   dpath + "/window", "must be [t_start, t_end]", errors)) {
                            const double w0 = dj.at("window")[0].get<double>();
                            const double w1 = dj.at("window")[1].get<double>();
                            expect(w0 < w1, dpath + "/window", "must be ordered", errors);
                            v.disturbance.window = {w0, w1};
                        }
                    }
                } else {
                    errors.push_back(dpath + "/kind: unknown kind '" + kind + "'");
                }
            }
            sc.vehicles.push_back(std::move(v));
        }
    }

    const int n = static_cast<int>(sc.vehicles.size());
    sc.gamma0 = Eigen::VectorXd::Zero(n);
    sc.gamma_dot0 = Eigen::VectorXd::Ones(n);
    for (const char* key : {"gamma0", "gamma_dot0"}) {
        if (!j.contains(key)) continue;
        const std::string path = std::string("/") + key;
        if (!expect(j.at(key).is_array() && static_cast<int>(j.at(key).size()) == n, path,
                    "must be an array with one entry per vehicle", errors))
            continue;
        Eigen::VectorXd v(n);
        bool ok = true;
        for (int i = 0; i < n; ++i) {
            if (!j.at(key)[i].is_number()) {
                errors.push_back(path + "/" + std::to_string(i) + ": must be a number");
                ok = false;
                break;
            }
            v(i) = j.at(key)[i].get<double>();
        }
        if (ok) (std::string(key) == "gamma0" ? sc.gamma0 : sc.gamma_dot0) = v;
    }

    if (j.contains("gamma_dot_d")) {
        if (expect(j.at("gamma_dot_d").is_array() && !j.at("gamma_dot_d").empty(), "/gamma_dot_d",
                   "must be a non-empty array", errors)) {
            sc.pace.pieces.clear();
            const auto& arr = j.at("gamma_dot_d");
            for (std::size_t k = 0; k < arr.size(); ++k) {
                const std::string path = "/gamma_dot_d/" + std::to_string(k);
                const auto ts = number_at(arr[k], "t_start", path, errors);
                const auto rate = number_at(arr[k], "rate", path, errors);
                if (ts && rate) sc.pace.pieces.push_back({*ts, *rate});
            }
        }
    }

    const auto dt = number_at(j, "dt", "", errors);
    if (dt) sc.dt = *dt;
    const auto t_end = number_at(j, "t_end", "", errors);
    if (t_end) sc.t_end = *t_end;
    if (j.contains("seed")) {
        if (j.at("seed").is_number_integer())
            sc.seed = j.at("seed").get<long>();
        else
            errors.push_back("/seed: must be an integer");
    }

    if (expect(j.contains("qos") && j.at("qos").is_object(), "/qos", "must be an object",
               errors)) {
        const auto T = number_at(j.at("qos"), "T", "/qos", errors);
        const auto delta = number_at(j.at("qos"), "delta", "/qos", errors);
        if (T) sc.qos.window = *T;
        if (delta) sc.qos.delta = *delta;
    }

    if (!errors.empty()) throw ScenarioValidationError(std::move(errors));
    sc.trajectories = TrajectorySet(std::move(trs));
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioValidationError({"cannot open scenario file: " + path});
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ScenarioValidationError({std::string("JSON parse error: ") + e.what()});
    }
    return scenario_from_json(j);
}

inline json scenario_to_json(const Scenario& sc) {
    json j;
    if (!sc.name.empty()) j["name"] = sc.name;
    j["t_f"] = sc.trajectories.t_f();
    j["trajectories"] = json::array();
    for (const auto& tr : sc.trajectories.trajectories) {
        json cps = json::array();
        for (const auto& p : tr.control_points()) cps.push_back({p.x(), p.y(), p.z()});
        j["trajectories"].push_back({{"control_points", cps}});
    }
    j["schedule"] = {{"cycle", sc.schedule.cycle}, {"segments", json::array()}};
    for (const auto& seg : sc.schedule.segments) {
        json edges = json::array();
        for (int r = 0; r < seg.graph.n; ++r)
            for (int c = 0; c < seg.graph.n; ++c)
                if (seg.graph.adjacency(r, c) == 1) edges.push_back({r, c});
        j["schedule"]["segments"].push_back({{"edges", edges}, {"dwell", seg.dwell}});
    }
    j["gains"] = {{"a", sc.gains.a}, {"b", sc.gains.b}, {"epsilon", sc.gains.epsilon}};
    j["vehicles"] = json::array();
    for (const auto& v : sc.vehicles) {
        json vj;
        vj["initial_pf_error"] = {v.initial_pf_error.x(), v.initial_pf_error.y(),
                                  v.initial_pf_error.z()};
        vj["k_pf"] = v.k_pf;
        switch (v.disturbance.kind) {
            case DisturbanceProfile::Kind::None:
                vj["disturbance"] = {{"kind", "none"}};
                break;
            case DisturbanceProfile::Kind::ConstantBias:
                vj["disturbance"] = {{"kind", "constant-bias"},
                                     {"vector",
                                      {v.disturbance.vector.x(), v.disturbance.vector.y(),
                                       v.disturbance.vector.z()}}};
                break;
            case DisturbanceProfile::Kind::WindowedGust:
                vj["disturbance"] = {{"kind", "windowed-gust"},
                                     {"vector",
                                      {v.disturbance.vector.x(), v.disturbance.vector.y(),
                                       v.disturbance.vector.z()}},
                                     {"window",
                                      {v.disturbance.window->first,
                                       v.disturbance.window->second}}};
                break;
        }
        j["vehicles"].push_back(std::move(vj));
    }
    j["gamma0"] = std::vector<double>(sc.gamma0.data(), sc.gamma0.data() + sc.gamma0.size());
    j["gamma_dot0"] =
        std::vector<double>(sc.gamma_dot0.data(), sc.gamma_dot0.data() + sc.gamma_dot0.size());
    j["gamma_dot_d"] = json::array();
    for (const auto& p : sc.pace.pieces)
        j["gamma_dot_d"].push_back({{"t_start", p.t_start}, {"rate", p.rate}});
    j["dt"] = sc.dt;
    j["t_end"] = sc.t_end;
    j["seed"] = sc.seed;
    j["qos"] = {{"T", sc.qos.window}, {"delta", sc.qos.delta}};
    return j;
}

/// CSV export with the fixed column layout
/// t,gamma_0..,gammadot_0..,epf_0..,xi_tc_norm,segment.
inline void write_log_csv(const SimLog& log, std::ostream& out) {
    out << "t";
    for (int i = 0; i < log.n; ++i) out << ",gamma_" << i;
    for (int i = 0; i < log.n; ++i) out << ",gammadot_" << i;
    for (int i = 0; i < log.n; ++i) out << ",epf_" << i;
    out << ",xi_tc_norm,segment\n";
    for (std::size_t k = 0; k < log.records(); ++k) {
        out << detail::fmt(log.t[k]);
        for (int i = 0; i < log.n; ++i) out << ',' << detail::fmt(log.gamma[k](i));
        for (int i = 0; i < log.n; ++i) out << ',' << detail::fmt(log.gamma_dot[k](i));
        for (int i = 0; i < log.n; ++i) out << ',' << detail::fmt(log.epf_norm[k](i));
        out << ',' << detail::fmt(log.xi_norm[k]) << ',' << log.segment[k] << '\n';
    }
}

inline const char* event_kind_name(SimEvent::Kind k) {
    switch (k) {
        case SimEvent::Kind::RateClamp: return "rate_clamp";
        case SimEvent::Kind::Saturation: return "saturation";
        case SimEvent::Kind::PaceStep: return "pace_step";
    }
    return "?";
}

inline json metrics_to_json(const CoordinationMetrics& m, const SimLog& log) {
    json j;
    j["n"] = log.n;
    j["dt"] = log.dt;
    j["records"] = log.records();
    j["fitted_decay_rate"] = m.fitted_decay_rate;
    j["sup_stacked_pf_error"] = sup_stacked_pf_error(log);
    j["final_window"] = {{"max_pairwise_gamma_gap", m.final_max_pairwise_gap},
                         {"max_rate_dev", m.final_max_rate_dev},
                         {"max_xi_norm", m.final_max_xi_norm}};
    j["series"] = {{"t", m.t},
                   {"max_pairwise_gamma_gap", m.max_pairwise_gap},
                   {"max_rate_dev", m.max_rate_dev},
                   {"xi_norm", m.xi_norm}};
    j["events"] = json::array();
    for (const auto& e : log.events) {
        json ev{{"kind", event_kind_name(e.kind)}, {"t", e.t}};
        if (e.agent >= 0) ev["agent"] = e.agent;
        if (e.kind == SimEvent::Kind::PaceStep) ev["rate"] = e.value;
        j["events"].push_back(std::move(ev));
    }
    return j;
}

inline json bounds_to_json(const ConvergenceConstants& c, const QoS& qos,
                           const CoordinationGains& gains) {
    json j;
    j["inputs"] = {{"n", c.n},         {"T", qos.window}, {"delta", qos.delta},
                   {"a", gains.a},     {"b", gains.b},    {"epsilon", gains.epsilon},
                   {"c3", c.c3},       {"beta", c.beta}};
    j["delta_prime"] = c.delta_prime;
    j["k"] = c.k;
    j["lambda"] = c.lambda;
    j["k_phi"] = c.k_phi;
    j["lambda_tc_max"] = c.lambda_tc_max;
    j["lambda_tc"] = c.lambda_tc;
    j["c1"] = c.c1;
    j["c2"] = c.c2;
    j["kappa1"] = c.kappa1;
    j["kappa2"] = c.kappa2;
    j["s_norm"] = c.s_norm;
    j["s_inv_norm"] = c.s_inv_norm;
    j["warnings"] = json::array();
    if (c.degenerate)
        j["warnings"].push_back(
            "bound degenerate: delta_prime^n is numerically negligible, so k ~ 1 and "
            "lambda ~ 0; the envelope is vacuous over practical horizons");
    return j;
}

/// Cartesian sweep over gain/dwell/seed values. Missing axes fall back to
/// the base scenario's values.
struct SweepGrid {
    std::vector<double> a, b, epsilon, dwell;
    std::vector<long> seed;
};

inline SweepGrid load_sweep_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioValidationError({"cannot open sweep grid file: " + path});
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ScenarioValidationError({std::string("JSON parse error: ") + e.what()});
    }
    std::vector<std::string> errors;
    SweepGrid g;
    const auto load_axis = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_array()) {
            errors.push_back(std::string("/") + key + ": must be an array");
            return;
        }
        for (const auto& v : j.at(key)) {
            if (!v.is_number()) {
                errors.push_back(std::string("/") + key + ": entries must be numbers");
                return;
            }
            out.push_back(v.get<typename std::decay_t<decltype(out)>::value_type>());
        }
    };
    load_axis("a", g.a);
    load_axis("b", g.b);
    load_axis("epsilon", g.epsilon);
    load_axis("dwell", g.dwell);
    load_axis("seed", g.seed);
    if (!errors.empty()) throw ScenarioValidationError(std::move(errors));
    return g;
}

struct SweepRow {
    double a = 0, b = 0, epsilon = 0, dwell = 0;
    long seed = 0;
    std::string status;  // "ok" or "rejected: ..."
    double final_max_pairwise_gap = 0;
    double final_max_rate_dev = 0;
    double fitted_decay_rate = 0;
};

/// Runs every grid cell (in deterministic axis order) and collects one
/// summary row per cell. Cells run concurrently; rejected cells carry the
/// first validation message.
inline std::vector<SweepRow> run_sweep(const Scenario& base, const SweepGrid& grid,
                                       const RunOptions& opts = {}) {
    const std::vector<double> as = grid.a.empty() ? std::vector<double>{base.gains.a} : grid.a;
    const std::vector<double> bs = grid.b.empty() ? std::vector<double>{base.gains.b} : grid.b;
    const std::vector<double> es =
        grid.epsilon.empty() ? std::vector<double>{base.gains.epsilon} : grid.epsilon;
    const std::vector<double> ds =
        grid.dwell.empty() ? std::vector<double>{base.schedule.segments.front().dwell}
                           : grid.dwell;
    const std::vector<long> seeds = grid.seed.empty() ? std::vector<long>{base.seed} : grid.seed;

    std::vector<SweepRow> rows;
    std::vector<std::future<SweepRow>> futures;
    for (const double a : as)
        for (const double b : bs)
            for (const double eps : es)
                for (const double dwell : ds)
                    for (const long seed : seeds) {
                        futures.push_back(std::async(std::launch::async, [=, &base, &opts]() {
                            SweepRow row{a, b, eps, dwell, seed, "", 0, 0, 0};
                            Scenario sc = base;
                            sc.gains = {a, b, eps};
                            sc.seed = seed;
                            for (auto& seg : sc.schedule.segments) seg.dwell = dwell;
                            try {
                                const SimLog log = run(sc, opts);
                                const QMatrix q = sc.agent_count() >= 2
                                                      ? build_q(sc.agent_count())
                                                      : QMatrix{1, Eigen::MatrixXd(0, 1)};
                                const auto m = extract_metrics(log, q, sc.pace);
                                row.status = "ok";
                                row.final_max_pairwise_gap = m.final_max_pairwise_gap;
                                row.final_max_rate_dev = m.final_max_rate_dev;
                                row.fitted_decay_rate = m.fitted_decay_rate;
                            } catch (const ScenarioValidationError& e) {
                                row.status = "rejected: " +
                                             (e.errors().empty() ? std::string("invalid")
                                                                 : e.errors().front());
                            }
                            return row;
                        }));
                    }
    rows.reserve(futures.size());
    for (auto& f : futures) rows.push_back(f.get());
    return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "a,b,epsilon,dwell,seed,status,final_max_pairwise_gap,final_max_rate_dev,"
           "fitted_decay_rate\n";
    for (const auto& r : rows) {
        std::string status = r.status;
        for (auto& ch : status)
            if (ch == ',') ch = ';';
        out << detail::fmt(r.a) << ',' << detail::fmt(r.b) << ',' << detail::fmt(r.epsilon) << ','
            << detail::fmt(r.dwell) << ',' << r.seed << ",\"" << status << "\","
            << detail::fmt(r.final_max_pairwise_gap) << ',' << detail::fmt(r.final_max_rate_dev)
            << ',' << detail::fmt(r.fitted_decay_rate) << '\n';
    }
}

}  // namespace timecoord

#pragma once

// Sweep execution: per-(flow, direction) groups run on a worker pool, results
// are collected in config order and written by a single sink.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kppflow/config.hpp"
#include "kppflow/criterion.hpp"
#include "kppflow/frontspeed.hpp"
#include "kppflow/homogenize.hpp"
#include "kppflow/pde_oracle.hpp"
#include "kppflow/svg.hpp"

namespace kppflow {

struct SweepRecord {
    std::string flow_id;
    std::size_t direction_index = 0;
    std::vector<double> e;
    double A = 0.0;
    double f_prime0 = NAN;
    double D_e = NAN;
    double D_e_energy = NAN;
    double c_star = NAN;
    double ratio = NAN;             ///< c* / sqrt(D_e)
    double ratio_normalized = NAN;  ///< ratio / (2 sqrt(f'(0)))
    double lambda_star = NAN;
    double mu_star = NAN;
    double form_agreement = NAN;
    bool above_kpp = true;
    bool inverse_bound = true;
    bool mu_monotone = true;
    std::string verdict = "-";
    std::optional<double> oracle_speed;
    double cell_residual = NAN;
    int cell_iterations = 0;
    bool cell_converged = true;
    std::string resolution;
    std::vector<std::string> flags;
    std::string error;  ///< hard failure message, empty when none
    std::vector<std::array<double, 3>> mu_curve;  ///< (lambda, kappa, mu) evaluated by the speed search
};

struct OracleRecord {
    std::string flow_id;
    std::vector<double> e;
    double A = 0.0;
    double f_prime0 = 1.0;
    double speed = NAN;
    double speed_stderr = NAN;
    double c_star = NAN;
    double rel_diff = NAN;
    std::vector<std::string> flags;
    std::string error;
    FrontTrajectory trajectory;
};

struct RunResult {
    std::string mode;
    std::string source;
    std::vector<std::pair<FlowConfig, std::optional<ValidationReport>>> flows;
    std::vector<SweepRecord> records;
    std::vector<DirectionClassification> classifications;
    std::vector<OracleRecord> oracles;
    std::vector<std::string> hard_failures;
    std::vector<std::string> files;
    std::string summary;

    int exit_code() const { return hard_failures.empty() ? 0 : 1; }
};

namespace detail {

inline std::string csv_num(double v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string o = "\"";
    for (char c : s)
        o += c == '"' ? std::string("\"\"") : std::string(1, c);
    return o + "\"";
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string o;
    for (std::size_t i = 0; i < v.size(); ++i)
        o += (i ? sep : "") + v[i];
    return o;
}

inline std::string vec_str(const std::vector<double>& e) {
    std::vector<std::string> p;
    for (double x : e)
        p.push_back(csv_num(x));
    return join(p, ";");
}

inline std::string safe_name(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
            c = '_';
    return s;
}

struct GroupResult {
    std::vector<SweepRecord> records;
    std::optional<DirectionClassification> classification;
    std::vector<OracleRecord> oracles;
    std::vector<std::string> errors;
};

inline bool along_e1(const std::vector<double>& e) {
    if (e.empty() || !(e[0] > 0.0))
        return false;
    for (std::size_t a = 1; a < e.size(); ++a)
        if (e[a] != 0.0)
            return false;
    return true;
}

inline GroupResult run_group(const SweepConfig& cfg, const FlowConfig& fc, const FlowField& flow,
                             std::size_t ei) {
    GroupResult g;
    const auto e = unit_direction(fc.directions[ei], fc.dim, "sweep");
    const std::string where = fc.id + " e=(" + vec_str(e) + ")";
    const bool want_d = cfg.mode == "diffusivity" || cfg.mode == "speed" || cfg.mode == "sweep";
    const bool want_c = cfg.mode == "speed" || cfg.mode == "sweep";

    if (want_d) {
        std::vector<double> As = cfg.amplitudes;
        std::sort(As.begin(), As.end());
        As.erase(std::unique(As.begin(), As.end()), As.end());
        std::map<double, DirectionalDiffusivity> D;
        std::string derr;
        try {
            for (auto& d : diffusivity_sweep(flow, As, e, cfg.cell))
                D.emplace(d.A, std::move(d));
        } catch (const std::exception& ex) {
            derr = ex.what();
        }
        for (double A : cfg.amplitudes)
            for (double fp : cfg.f_prime0) {
                SweepRecord r;
                r.flow_id = fc.id;
                r.direction_index = ei;
                r.e = e;
                r.A = A;
                r.f_prime0 = fp;
                r.resolution = flow.grid().describe();
                const std::string tag = where + " A=" + csv_num(A) + " f'(0)=" + csv_num(fp);
                const auto it = D.find(A);
                if (it == D.end()) {
                    r.error = "diffusivity: " + (derr.empty() ? std::string("missing result") : derr);
                } else {
                    const auto& d = it->second;
                    r.D_e = d.D_e;
                    r.D_e_energy = d.D_e_energy;
                    r.cell_residual = d.cell.residual;
                    r.cell_iterations = d.cell.iterations;
                    r.cell_converged = d.cell.converged;
                    if (!d.cell.converged)
                        r.flags.push_back("cell problem did not converge");
                    if (std::abs(d.D_e - d.D_e_energy) > 1e-8 * d.D_e)
                        r.flags.push_back("D_e energy cross-check above 1e-8");
                }
                if (want_c && r.error.empty()) {
                    try {
                        const auto s = minimal_speed(flow, A, e, fp, cfg.speed);
                        r.c_star = s.c_star;
                        r.lambda_star = s.lambda_star;
                        r.mu_star = s.mu_star;
                        r.form_agreement = s.form_agreement;
                        r.above_kpp = s.above_kpp;
                        r.inverse_bound = s.inverse_bound;
                        for (const auto& f : s.flags)
                            r.flags.push_back(f);
                        double mmax = 0.0;
                        for (const auto& p : s.curve) {
                            r.mu_curve.push_back({p.lambda, p.kappa, p.mu});
                            mmax = std::max(mmax, std::abs(p.mu));
                        }
                        for (std::size_t i = 1; i < r.mu_curve.size(); ++i)
                            if (r.mu_curve[i][2] < r.mu_curve[i - 1][2] - 1e-6 * mmax)
                                r.mu_monotone = false;
                        if (!r.mu_monotone)
                            r.flags.push_back("mu samples not monotone in lambda");
                        r.ratio = r.c_star / std::sqrt(r.D_e);
                        r.ratio_normalized = r.ratio / (2.0 * std::sqrt(fp));
                    } catch (const std::exception& ex) {
                        r.error = std::string("minimal_speed: ") + ex.what();
                    }
                }
                if (!r.error.empty())
                    g.errors.push_back(tag + ": " + r.error);
                g.records.push_back(std::move(r));
            }
    }

    if (cfg.mode == "classify" || (cfg.mode == "sweep" && cfg.classify)) {
        try {
            g.classification = classify_direction(flow, e, cfg.classify_amplitudes, cfg.thresholds, cfg.cell,
                                                  cfg.criterion);
            for (auto& r : g.records)
                r.verdict = to_string(g.classification->verdict);
        } catch (const std::exception& ex) {
            g.errors.push_back(where + ": classify_direction: " + ex.what());
        }
    }

    if (cfg.mode == "simulate" || (cfg.mode == "sweep" && cfg.oracle)) {
        const auto& As = cfg.mode == "simulate" ? cfg.simulate_amplitudes : cfg.amplitudes;
        for (double A : As)
            for (double fp : cfg.f_prime0) {
                OracleRecord o;
                o.flow_id = fc.id;
                o.e = e;
                o.A = A;
                o.f_prime0 = fp;
                if (fc.dim != 2 || !along_e1(e)) {
                    o.flags.push_back("oracle runs 2D strips along e1 only; skipped");
                } else if (A > 8.0) {
                    o.flags.push_back("oracle scope is A <= 8; skipped");
                } else {
                    try {
                        EvolveOptions eo;
                        eo.level = cfg.level;
                        o.trajectory = evolve(flow, A, KppNonlinearity::fisher(fp), cfg.strip_periods, cfg.t_end,
                                              cfg.dt, eo);
                        o.speed = o.trajectory.speed;
                        o.speed_stderr = o.trajectory.speed_stderr;
                        o.flags = o.trajectory.flags;
                        double c = NAN;
                        for (const auto& r : g.records)
                            if (r.A == A && r.f_prime0 == fp)
                                c = r.c_star;
                        if (!std::isfinite(c))
                            c = minimal_speed(flow, A, e, fp, cfg.speed).c_star;
                        o.c_star = c;
                        o.rel_diff = std::abs(o.speed - c) / c;
                    } catch (const std::exception& ex) {
                        o.error = ex.what();
                        g.errors.push_back(where + " A=" + csv_num(A) + ": evolve: " + o.error);
                    }
                }
                for (auto& r : g.records)
                    if (r.A == A && r.f_prime0 == fp && std::isfinite(o.speed))
                        r.oracle_speed = o.speed;
                g.oracles.push_back(std::move(o));
            }
    }
    return g;
}

inline void write_text(const std::filesystem::path& p, const std::string& s, std::vector<std::string>& files,
                       const std::filesystem::path& root) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os)
        throw InputError("cannot write " + p.string());
    os << s;
    files.push_back(std::filesystem::relative(p, root).generic_string());
}

}  // namespace detail

inline const char* kRecordHeader =
    "flow,e,A,f_prime0,D_e,c_star,ratio,ratio_normalized,verdict,oracle_speed,lambda_star,cell_residual,"
    "cell_iterations,resolution,flags";

inline std::string records_csv(const std::vector<SweepRecord>& recs) {
    using detail::csv_num;
    std::ostringstream os;
    os << kRecordHeader << "\n";
    for (const auto& r : recs) {
        std::vector<std::string> flags = r.flags;
        if (!r.error.empty())
            flags.insert(flags.begin(), "ERROR: " + r.error);
        os << detail::csv_field(r.flow_id) << ',' << detail::vec_str(r.e) << ',' << csv_num(r.A) << ','
           << csv_num(r.f_prime0) << ',' << csv_num(r.D_e) << ',' << csv_num(r.c_star) << ',' << csv_num(r.ratio)
           << ',' << csv_num(r.ratio_normalized) << ',' << r.verdict << ','
           << (r.oracle_speed ? csv_num(*r.oracle_speed) : std::string()) << ',' << csv_num(r.lambda_star) << ','
           << csv_num(r.cell_residual) << ',' << r.cell_iterations << ',' << detail::csv_field(r.resolution) << ','
           << detail::csv_field(detail::join(flags, " | ")) << "\n";
    }
    return os.str();
}

/// Build every flow, run all (flow, direction) groups on `jobs` workers and
/// write artifacts under cfg.output (nothing is written when output is empty).
inline RunResult run_sweep(const SweepConfig& cfg, int jobs = 0) {
    namespace fs = std::filesystem;
    RunResult res;
    res.mode = cfg.mode;
    res.source = cfg.source;
    if (jobs <= 0)
        jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();

    std::vector<std::optional<FlowField>> built(cfg.flows.size());
    for (std::size_t i = 0; i < cfg.flows.size(); ++i) {
        const auto& fc = cfg.flows[i];
        try {
            built[i] = fc.build();
            res.flows.emplace_back(fc, built[i]->validation());
        } catch (const std::exception& ex) {
            res.flows.emplace_back(fc, std::nullopt);
            res.hard_failures.push_back("flow " + fc.id + ": " + ex.what());
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    if (cfg.mode != "validate")
        for (std::size_t i = 0; i < cfg.flows.size(); ++i)
            if (built[i])
                for (std::size_t k = 0; k < cfg.flows[i].directions.size(); ++k)
                    tasks.emplace_back(i, k);
    std::vector<detail::GroupResult> out(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
            const auto [fi, ei] = tasks[t];
            try {
                out[t] = detail::run_group(cfg, cfg.flows[fi], *built[fi], ei);
            } catch (const std::exception& ex) {
                out[t].errors.push_back(cfg.flows[fi].id + ": " + ex.what());
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    for (auto& g : out) {
        for (auto& r : g.records)
            res.records.push_back(std::move(r));
        if (g.classification)
            res.classifications.push_back(std::move(*g.classification));
        for (auto& o : g.oracles)
            res.oracles.push_back(std::move(o));
        for (auto& e : g.errors)
            res.hard_failures.push_back(std::move(e));
    }

    // summary
    std::ostringstream sm;
    sm << "kppflow " << cfg.mode << " summary\n";
    sm << "config: " << cfg.source << "\n\nflows:\n";
    for (const auto& [fc, rep] : res.flows) {
        sm << "  " << fc.id << " (" << flow_kind(fc.spec) << ", " << TorusGrid(fc.resolution, fc.periods).describe()
           << "): " << (rep ? rep->summary() : std::string("BUILD FAILED")) << "\n";
    }
    auto check = [&](const std::string& name, auto pred, auto applies) {
        int n = 0, ok = 0;
        for (const auto& r : res.records)
            if (r.error.empty() && applies(r)) {
                ++n;
                ok += pred(r) ? 1 : 0;
            }
        if (n > 0)
            sm << "  [" << (ok == n ? "PASS" : "FAIL") << "] " << name << " (" << ok << "/" << n << ")\n";
    };
    auto always = [](const SweepRecord&) { return true; };
    auto has_c = [](const SweepRecord& r) { return std::isfinite(r.c_star); };
    if (!res.records.empty()) {
        sm << "\nproperty checks:\n";
        check("D_e >= 1", [](const SweepRecord& r) { return r.D_e >= 1.0 - 1e-12; }, always);
        check("D_e forms agree to 1e-8", [](const SweepRecord& r) {
            return std::abs(r.D_e - r.D_e_energy) <= 1e-8 * r.D_e; }, always);
        check("cell solves converged", [](const SweepRecord& r) { return r.cell_converged; }, always);
        check("c* >= 2 sqrt(f'(0))", [](const SweepRecord& r) { return r.above_kpp; }, has_c);
        check("lambda and mu forms of c* agree to 1e-6", [](const SweepRecord& r) {
            return !std::isfinite(r.form_agreement) || r.form_agreement <= 1e-6; }, has_c);
        check("lambda_e(mu*) <= sqrt(mu*)", [](const SweepRecord& r) { return r.inverse_bound; }, has_c);
        check("mu nondecreasing along evaluated lambdas", [](const SweepRecord& r) { return r.mu_monotone; }, has_c);
        check("ratio fields consistent to 1e-10", [](const SweepRecord& r) {
            const double a = r.c_star / std::sqrt(r.D_e), b = a / (2.0 * std::sqrt(r.f_prime0));
            return std::abs(a - r.ratio) <= 1e-10 * a && std::abs(b - r.ratio_normalized) <= 1e-10 * b; }, has_c);
    }
    if (!res.oracles.empty()) {
        int n = 0, ok = 0;
        for (const auto& o : res.oracles)
            if (std::isfinite(o.rel_diff)) {
                ++n;
                ok += o.rel_diff <= 0.10 ? 1 : 0;
            }
        sm << "\noracle:\n";
        if (n > 0)
            sm << "  [" << (ok == n ? "PASS" : "FAIL") << "] oracle speed within 10% of c* (" << ok << "/" << n
               << ")\n";
        for (const auto& o : res.oracles)
            sm << "  " << o.flow_id << " A=" << detail::csv_num(o.A) << " f'(0)=" << detail::csv_num(o.f_prime0)
               << ": oracle " << detail::csv_num(o.speed) << " +- " << detail::csv_num(o.speed_stderr) << ", c* "
               << detail::csv_num(o.c_star) << (o.flags.empty() ? "" : "  [" + detail::join(o.flags, " | ") + "]")
               << "\n";
    }
    if (!res.classifications.empty()) {
        sm << "\nclassification (growth threshold " << 1.0 + cfg.thresholds.growth << " per factor 4, collapse "
           << cfg.thresholds.collapse_factor << "x):\n";
        for (const auto& c : res.classifications)
            sm << "  " << c.flow_id << " e=(" << detail::vec_str(c.e) << "): " << to_string(c.verdict)
               << "  growth " << detail::csv_num(c.growth_4) << ", slope " << detail::csv_num(c.slope)
               << ", residual reduction " << detail::csv_num(c.criterion.trend.reduction) << "\n";
    }
    std::vector<std::string> flagged;
    for (const auto& r : res.records)
        if (!r.flags.empty())
            flagged.push_back(r.flow_id + " e=(" + detail::vec_str(r.e) + ") A=" + detail::csv_num(r.A) +
                              " f'(0)=" + detail::csv_num(r.f_prime0) + ": " + detail::join(r.flags, " | "));
    for (const auto& c : res.classifications)
        if (c.verdict == Verdict::Inconclusive)
            flagged.push_back(c.flow_id + " e=(" + detail::vec_str(c.e) + "): classification inconclusive: " +
                              detail::join(c.reasons, "; "));
    sm << "\nflagged records: " << flagged.size() << "\n";
    for (const auto& f : flagged)
        sm << "  " << f << "\n";
    sm << "\nhard failures: " << res.hard_failures.size() << "\n";
    for (const auto& f : res.hard_failures)
        sm << "  " << f << "\n";
    res.summary = sm.str();

    if (cfg.output.empty())
        return res;
    const fs::path root = fs::path(cfg.output);
    fs::create_directories(root);
    auto& files = res.files;
    using detail::csv_num;

    if (!res.records.empty()) {
        detail::write_text(root / "records.csv", records_csv(res.records), files, root);
        for (std::size_t fi = 0; fi < cfg.flows.size(); ++fi) {
            const auto& fc = cfg.flows[fi];
            const std::string fid = detail::safe_name(fc.id);
            std::ostringstream dcsv;
            dcsv << "e,A,D_e\n";
            std::vector<ChartSeries> dser;
            std::map<std::pair<std::size_t, double>, std::vector<const SweepRecord*>> by_ef;
            for (std::size_t ei = 0; ei < fc.directions.size(); ++ei) {
                ChartSeries s;
                s.label = "e=(" + detail::vec_str(detail::unit_direction(fc.directions[ei], fc.dim, "sweep")) + ")";
                std::vector<std::pair<double, double>> pts;
                for (const auto& r : res.records)
                    if (r.flow_id == fc.id && r.direction_index == ei && r.f_prime0 == cfg.f_prime0.front() &&
                        std::isfinite(r.D_e))
                        pts.emplace_back(r.A, r.D_e);
                std::sort(pts.begin(), pts.end());
                for (const auto& [A, D] : pts) {
                    dcsv << detail::vec_str(detail::unit_direction(fc.directions[ei], fc.dim, "sweep")) << ','
                         << csv_num(A) << ',' << csv_num(D) << "\n";
                    s.x.push_back(A);
                    s.y.push_back(D);
                }
                dser.push_back(std::move(s));
                for (const auto& r : res.records)
                    if (r.flow_id == fc.id && r.direction_index == ei)
                        by_ef[{ei, r.f_prime0}].push_back(&r);
            }
            detail::write_text(root / "curves" / ("D_" + fid + ".csv"), dcsv.str(), files, root);
            detail::write_text(root / "plots" / ("D_" + fid + ".svg"),
                               line_chart_svg(dser, {"D_e(A), " + fc.id, "A", "D_e", true, true}), files, root);
            if (cfg.mode == "diffusivity")
                continue;
            std::ostringstream ccsv;
            ccsv << "e,f_prime0,A,c_star,ratio,ratio_normalized\n";
            for (std::size_t k = 0; k < cfg.f_prime0.size(); ++k) {
                std::vector<ChartSeries> cser;
                for (std::size_t ei = 0; ei < fc.directions.size(); ++ei) {
                    auto recs = by_ef[{ei, cfg.f_prime0[k]}];
                    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->A < b->A; });
                    ChartSeries s;
                    ChartSeries ms;
                    std::vector<ChartSeries> mser;
                    s.label = "e=(" + detail::vec_str(recs.empty() ? std::vector<double>{} : recs.front()->e) + ")";
                    for (std::size_t j = 0; j < recs.size(); ++j) {
                        const auto* r = recs[j];
                        ccsv << detail::vec_str(r->e) << ',' << csv_num(r->f_prime0) << ',' << csv_num(r->A) << ','
                             << csv_num(r->c_star) << ',' << csv_num(r->ratio) << ','
                             << csv_num(r->ratio_normalized) << "\n";
                        s.x.push_back(r->A);
                        s.y.push_back(r->c_star);
                        std::ostringstream mcsv;
                        mcsv << "lambda,kappa,mu\n";
                        ChartSeries m;
                        m.label = "A=" + csv_num(r->A);
                        for (const auto& p : r->mu_curve) {
                            mcsv << csv_num(p[0]) << ',' << csv_num(p[1]) << ',' << csv_num(p[2]) << "\n";
                            m.x.push_back(p[0]);
                            m.y.push_back(p[2]);
                        }
                        mser.push_back(std::move(m));
                        detail::write_text(root / "curves" /
                                               ("mu_" + fid + "_e" + std::to_string(ei) + "_f" + std::to_string(k) +
                                                "_A" + std::to_string(j) + ".csv"),
                                           mcsv.str(), files, root);
                    }
                    detail::write_text(
                        root / "plots" /
                            ("mu_" + fid + "_e" + std::to_string(ei) + "_f" + std::to_string(k) + ".svg"),
                        line_chart_svg(mser, {"mu_e(lambda), " + fc.id + ", f'(0)=" + csv_num(cfg.f_prime0[k]),
                                              "lambda", "mu", false, false}),
                        files, root);
                    cser.push_back(std::move(s));
                }
                detail::write_text(root / "plots" / ("cstar_" + fid + "_f" + std::to_string(k) + ".svg"),
                                   line_chart_svg(cser, {"c*(A), " + fc.id + ", f'(0)=" + csv_num(cfg.f_prime0[k]),
                                                         "A", "c*", true, true}),
                                   files, root);
            }
            detail::write_text(root / "curves" / ("cstar_" + fid + ".csv"), ccsv.str(), files, root);
        }
    }
    if (!res.classifications.empty()) {
        nlohmann::json j = nlohmann::json::array();
        std::ostringstream cc;
        cc << "flow,e,verdict,slope,growth_per_factor_4,residual_reduction,grad_growth,collapsed\n";
        for (const auto& c : res.classifications) {
            j.push_back(to_json(c));
            cc << detail::csv_field(c.flow_id) << ',' << detail::vec_str(c.e) << ',' << to_string(c.verdict) << ','
               << csv_num(c.slope) << ',' << csv_num(c.growth_4) << ',' << csv_num(c.criterion.trend.reduction)
               << ',' << csv_num(c.criterion.trend.grad_growth) << ',' << (c.criterion.trend.collapsed ? 1 : 0)
               << "\n";
        }
        detail::write_text(root / "classification.json", j.dump(2) + "\n", files, root);
        detail::write_text(root / "classification.csv", cc.str(), files, root);
    }
    if (!res.oracles.empty()) {
        std::ostringstream oc;
        oc << "flow,e,A,f_prime0,oracle_speed,oracle_stderr,c_star,rel_diff,flags\n";
        for (std::size_t i = 0; i < res.oracles.size(); ++i) {
            const auto& o = res.oracles[i];
            std::vector<std::string> flags = o.flags;
            if (!o.error.empty())
                flags.insert(flags.begin(), "ERROR: " + o.error);
            oc << detail::csv_field(o.flow_id) << ',' << detail::vec_str(o.e) << ',' << csv_num(o.A) << ','
               << csv_num(o.f_prime0) << ',' << csv_num(o.speed) << ',' << csv_num(o.speed_stderr) << ','
               << csv_num(o.c_star) << ',' << csv_num(o.rel_diff) << ','
               << detail::csv_field(detail::join(flags, " | ")) << "\n";
            if (!o.trajectory.times.empty())
                detail::write_text(root / "trajectories" /
                                       ("front_" + detail::safe_name(o.flow_id) + "_" + std::to_string(i) + ".csv"),
                                   trajectory_csv(o.trajectory), files, root);
        }
        detail::write_text(root / "oracle.csv", oc.str(), files, root);
    }
    files.push_back("summary.txt");
    std::ofstream(root / "summary.txt", std::ios::binary) << res.summary;
    return res;
}

}  // namespace kppflow

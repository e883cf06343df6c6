#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "spinglass/chaos.hpp"
#include "spinglass/config.hpp"
#include "spinglass/gg.hpp"
#include "spinglass/guerra.hpp"
#include "spinglass/minimize.hpp"
#include "spinglass/parisi.hpp"
#include "spinglass/report.hpp"
#include "spinglass/sim.hpp"

namespace spinglass::cli {

struct RunOptions {
    bool stamp = false;
};

namespace detail {

inline std::string with_meta(const std::string& body, bool stamp) {
    return stamp ? timestamp_line() + body : body;
}

inline json triplet_json(const OrderParameterTriplet& t) {
    return json{{"k", t.k}, {"m", t.m}, {"q", t.q}};
}

struct SolvedPair {
    MinimizeResult r1, r2;
    ParisiSolution sol1, sol2;
    double c1, c2;
};

inline SolvedPair solve_both(const ExperimentConfig& cfg) {
    MinimizeOptions opt;
    opt.restarts = cfg.parisi.restarts;
    opt.seed = cfg.seed;
    opt.final.quad_n = cfg.quad_n;
    auto r1 = minimize_functional(cfg.model.spec1(), cfg.model.field1(), cfg.parisi.k, opt);
    auto r2 = minimize_functional(cfg.model.spec2(), cfg.model.field2(), cfg.parisi.k, opt);
    EvalSettings st;
    st.quad_n = cfg.quad_n;
    SolvedPair sp{r1,
                  r2,
                  evaluate_functional(cfg.model.spec1(), cfg.model.field1(), r1.triplet, st),
                  evaluate_functional(cfg.model.spec2(), cfg.model.field2(), r2.triplet, st),
                  0.0,
                  0.0};
    sp.c1 = support_min(r1.triplet);
    sp.c2 = support_min(r2.triplet);
    // phi needs a positive evaluation point; clamp the degenerate h = 0 case
    sp.c1 = std::min(0.999999, std::max(sp.c1, 1e-3));
    sp.c2 = std::min(0.999999, std::max(sp.c2, 1e-3));
    return sp;
}

} // namespace detail

// Executes one subcommand, writing its artifacts under cfg.out_dir.
// Artifacts embed the config hash and seed; bodies are byte-stable unless a
// timestamp is requested.
inline int run(const std::string& command, const ExperimentConfig& cfg,
               const RunOptions& opt = {}) {
    namespace fs = std::filesystem;
    const std::uint64_t hash = config_hash(cfg);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    auto write_json = [&](const fs::path& name, json j) {
        char meta[40];
        std::snprintf(meta, sizeof(meta), "%016" PRIx64, hash);
        j["config_hash"] = meta;
        j["seed"] = cfg.seed;
        write_atomic(out / name, detail::with_meta(j.dump(2) + "\n", opt.stamp));
    };
    auto write_csv = [&](const fs::path& name, const CsvTable& t) {
        write_atomic(out / name, detail::with_meta(t.body(hash, cfg.seed), opt.stamp));
    };

    if (command == "mixture-info") {
        json j;
        j["xi1_at_1"] = cfg.model.spec1().xi(1.0);
        j["xi1p_at_1"] = cfg.model.spec1().xi(1.0, 1);
        j["xi2_at_1"] = cfg.model.spec2().xi(1.0);
        j["xi2p_at_1"] = cfg.model.spec2().xi(1.0, 1);
        j["cross_xi_at_1"] = cfg.model.cross_xi(1.0);
        double min_gap = 1e300;
        for (int i = 1; i <= 20; ++i)
            for (int k = 1; k <= 20; ++k)
                min_gap = std::min(min_gap, cauchy_schwarz_gap(cfg.model, i / 20.0, k / 20.0));
        j["min_cauchy_schwarz_gap"] = min_gap;
        const auto rep = diagnose_conditions(cfg.model);
        json jr;
        jr["shared_support"] = rep.shared_support;
        jr["proportional_set"] = rep.proportional_set;
        if (rep.proportionality_nu) jr["proportionality_nu"] = *rep.proportionality_nu;
        if (rep.deviating_index) jr["deviating_index"] = *rep.deviating_index;
        jr["density_verifiable"] = rep.density_verifiable;
        jr["notes"] = rep.notes;
        j["conditions"] = jr;
        j["warning"] =
            "finite truncation: (C_1)/(C_2) density requirements cannot be certified";
        write_json("mixture_info.json", j);
        return 0;
    }

    if (command == "parisi") {
        const bool sys1 = cfg.parisi.system == 1;
        const MixtureSpec& spec = sys1 ? cfg.model.spec1() : cfg.model.spec2();
        const FieldMarginal field = sys1 ? cfg.model.field1() : cfg.model.field2();
        MinimizeOptions mopt;
        mopt.restarts = cfg.parisi.restarts;
        mopt.seed = cfg.seed;
        mopt.final.quad_n = cfg.quad_n;
        const auto res = minimize_functional(spec, field, cfg.parisi.k, mopt);
        EvalSettings st;
        st.quad_n = cfg.quad_n;
        const auto sol = evaluate_functional(spec, field, res.triplet, st);

        json j;
        j["value"] = res.value;
        j["x0"] = sol.x0;
        j["triplet"] = detail::triplet_json(res.triplet);
        j["support_min"] = support_min(res.triplet);
        const double c = rs_fixed_point(spec, field);
        j["rs_fixed_point"] = c;
        j["at_index"] = at_index(spec, field, std::min(c, 0.999999));
        j["converged"] = res.converged;
        write_json("parisi.json", j);

        CsvTable atoms({"q_p", "m_p"});
        for (const auto& a : res.triplet.atoms()) atoms.add_row({a.first, a.second});
        write_csv("parisi_atoms.csv", atoms);

        CsvTable phi({"x", "phi", "d1", "d2", "d3"});
        const auto gf = sol.phi_at(0.0);
        for (int i = 0; i < gf.grid.n; i += 8)
            phi.add_row({gf.grid.at(i), gf.d0[i], gf.d1[i], gf.d2[i], gf.d3[i]});
        write_csv("parisi_phi.csv", phi);
        return 0;
    }

    if (command == "fixed-point") {
        const auto sp = detail::solve_both(cfg);
        const auto res = find_uf(cfg.model, sp.sol1, sp.sol2, sp.c1, sp.c2, cfg.fixed_point.tol);
        json j;
        j["u_f"] = res.u_f;
        j["residual"] = res.residual;
        j["max_abs_derivative"] = res.max_abs_derivative;
        j["c1"] = sp.c1;
        j["c2"] = sp.c2;
        j["iterations"] = res.iterations;
        j["contraction_ok"] = res.contraction_ok;
        if (cfg.model.field_law().std1 == 0.0 || cfg.model.field_law().std2 == 0.0)
            j["caveat"] = "constant external field: chaos in temperature is not established here";
        write_json("fixed_point.json", j);
        return 0;
    }

    if (command == "bound" || command == "chaos-scan") {
        const auto sp = detail::solve_both(cfg);
        const double v1 = cfg.bound.v1 > 0.0 ? cfg.bound.v1 : std::min(sp.c1, 0.999);
        const double v2 = cfg.bound.v2 > 0.0 ? cfg.bound.v2 : std::min(sp.c2, 0.999);
        ChaosBandBound band(cfg.model, sp.sol1, sp.sol2, sp.c1, sp.c2, v1, v2);
        const double B = std::sqrt(v1 * v2);
        CsvTable t({"u", "bound", "P1", "P2", "penalty", "positive_parts"});
        for (int i = 0; i < cfg.bound.u_grid; ++i) {
            const double u = -B + 2.0 * B * i / (cfg.bound.u_grid - 1);
            const double d = band.phi(u) - u;
            t.add_row({u, band(u), sp.sol1.value, sp.sol2.value, 0.5 * d * d,
                       band.positive_parts()});
        }
        write_csv("bound.csv", t);
        if (command == "bound") return 0;

        // chaos-scan: fixed point + band grid + simulated histogram
        const auto fp = find_uf(cfg.model, sp.sol1, sp.sol2, sp.c1, sp.c2, cfg.fixed_point.tol);
        const auto rep = overlap_statistics(cfg.model, cfg.simulate.N, cfg.simulate.M, cfg.seed,
                                            scheme_from_string(cfg.simulate.scheme));
        CsvTable h({"bin_lo", "bin_hi", "mass_R", "mass_R1", "mass_R2", "se_R", "se_R1", "se_R2"});
        const double hw = 1.0 / rep.N;
        int mode_d = 0;
        for (int d = 0; d <= rep.N; ++d)
            if (rep.mass_R[d] > rep.mass_R[mode_d]) mode_d = d;
        for (int d = rep.N; d >= 0; --d) // ascending in u
            h.add_row({rep.u[d] - hw, rep.u[d] + hw, rep.mass_R[d], rep.mass_R1[d], rep.mass_R2[d],
                       rep.mass_R_se[d], rep.mass_R1_se[d], rep.mass_R2_se[d]});
        write_csv("histogram.csv", h);
        json j;
        j["u_f"] = fp.u_f;
        j["residual"] = fp.residual;
        j["max_abs_derivative"] = fp.max_abs_derivative;
        j["c1"] = sp.c1;
        j["c2"] = sp.c2;
        j["P1"] = sp.sol1.value;
        j["P2"] = sp.sol2.value;
        j["mode_bin_lo"] = rep.u[mode_d] - hw;
        j["mode_bin_hi"] = rep.u[mode_d] + hw;
        write_json("chaos_scan.json", j);
        return 0;
    }

    if (command == "simulate") {
        const auto rep = overlap_statistics(cfg.model, cfg.simulate.N, cfg.simulate.M, cfg.seed,
                                            scheme_from_string(cfg.simulate.scheme));
        CsvTable shells({"u", "shell_logsum", "se"});
        for (int d = rep.N; d >= 0; --d)
            shells.add_row({rep.u[d], rep.p_shell[d], rep.p_shell_se[d]});
        write_csv("shells.csv", shells);
        CsvTable h({"bin_lo", "bin_hi", "mass_R", "mass_R1", "mass_R2", "se_R", "se_R1", "se_R2"});
        const double hw = 1.0 / rep.N;
        for (int d = rep.N; d >= 0; --d)
            h.add_row({rep.u[d] - hw, rep.u[d] + hw, rep.mass_R[d], rep.mass_R1[d], rep.mass_R2[d],
                       rep.mass_R_se[d], rep.mass_R1_se[d], rep.mass_R2_se[d]});
        write_csv("histogram.csv", h);
        return 0;
    }

    if (command == "gg-check") {
        const auto psi = PsiSpec::parse(cfg.gg.psi);
        const auto f = FunctionSpec::parse(cfg.gg.f);
        const auto rep = gg_residuals(cfg.model, cfg.simulate.N, cfg.simulate.M, cfg.gg.n, psi, f,
                                      cfg.seed, scheme_from_string(cfg.simulate.scheme));
        CsvTable t({"functional", "n", "estimate", "se"});
        t.add_text_row({"Phi_1n", std::to_string(rep.n), format_g17(rep.phi1), format_g17(rep.phi1_se)});
        t.add_text_row({"Psi_1n", std::to_string(rep.n), format_g17(rep.psi1), format_g17(rep.psi1_se)});
        t.add_text_row({"Phi_2n", std::to_string(rep.n), format_g17(rep.phi2), format_g17(rep.phi2_se)});
        t.add_text_row({"Psi_2n", std::to_string(rep.n), format_g17(rep.psi2), format_g17(rep.psi2_se)});
        write_csv("gg.csv", t);
        return 0;
    }

    throw domain_error("unknown command: " + command);
}

} // namespace spinglass::cli

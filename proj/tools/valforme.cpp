// valforme: exact value -> production-price transformation solver.
//
// Subcommands: solve, sweep, simulate (converge | okishio), bortkiewicz,
// eigen, validate. Exit codes: 0 success, 1 input error, 2 infeasible
// configuration, 3 no root, 4 validation failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "valforme/valforme.hpp"

namespace {

using namespace valforme;

constexpr int exit_ok = 0;
constexpr int exit_input = 1;
constexpr int exit_infeasible = 2;
constexpr int exit_no_root = 3;
constexpr int exit_invalid = 4;

struct NamedValue {
    std::string name;
    double value = 0.0;
};

NamedValue parse_named(const std::string& arg, const std::string& what) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0)
        throw InputError(what + " expects NAME=VALUE, got '" + arg + "'");
    NamedValue nv;
    nv.name = arg.substr(0, eq);
    try {
        nv.value = std::stod(arg.substr(eq + 1));
    } catch (const std::exception&) {
        throw InputError(what + " has a non-numeric value in '" + arg + "'");
    }
    return nv;
}

ConstraintSet build_constraints(const EconomyTable& table, const std::vector<std::string>& fixes,
                                const std::vector<std::string>& offsets,
                                const std::vector<std::string>& repros,
                                const std::string& reference) {
    ConstraintSet cs;
    for (const auto& f : fixes) {
        const NamedValue nv = parse_named(f, "--fix");
        cs.fixed_k[branch_index(table.branch_names, nv.name, "--fix")] = nv.value;
    }
    if (!offsets.empty()) {
        cs.profit_offsets.assign(table.size(), 0.0);
        for (const auto& o : offsets) {
            const NamedValue nv = parse_named(o, "--delta-r");
            cs.profit_offsets[branch_index(table.branch_names, nv.name, "--delta-r")] = nv.value;
        }
    }
    for (const auto& r : repros) {
        // repro:<commodity>:<value|price>
        if (r.rfind("repro:", 0) != 0)
            throw InputError("--constraint expects repro:<commodity>:<value|price>");
        const std::string rest = r.substr(6);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos)
            throw InputError("--constraint needs an explicit value|price tag");
        const std::string commodity = rest.substr(0, colon);
        const std::string space = rest.substr(colon + 1);
        ReproductionConstraint rc;
        rc.commodity = branch_index(table.branch_names, commodity, "--constraint");
        if (space == "value")
            rc.space = ConstraintSpace::value;
        else if (space == "price")
            rc.space = ConstraintSpace::price;
        else
            throw InputError("--constraint space must be 'value' or 'price', got '" + space + "'");
        cs.reproduction_constraints.push_back(rc);
    }
    if (!reference.empty())
        cs.reference_branch = branch_index(table.branch_names, reference, "--reference");
    return cs;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

int classify(const std::exception& e) {
    if (dynamic_cast<const NoRootError*>(&e)) return exit_no_root;
    if (dynamic_cast<const FixedCapitalChoiceError*>(&e)) return exit_infeasible;
    if (dynamic_cast<const InfeasibleAllocationError*>(&e)) return exit_infeasible;
    if (dynamic_cast<const DegenerateConstraintsError*>(&e)) return exit_infeasible;
    if (dynamic_cast<const EigenDomainError*>(&e)) return exit_infeasible;
    if (dynamic_cast<const UnsupportedConstructionError*>(&e)) return exit_infeasible;
    if (dynamic_cast<const ConvergenceError*>(&e)) return exit_infeasible;
    return exit_input;
}

int cmd_solve(const std::string& input, const std::vector<std::string>& fixes,
              const std::vector<std::string>& offsets, const std::vector<std::string>& repros,
              const std::string& reference, std::optional<int> n_override,
              const std::string& out_path) {
    EconomyTable table = economy_from_json(load_json_file(input));
    if (n_override) {
        table.n_cycles = *n_override;
        validate(table);
    }
    const ConstraintSet cs = build_constraints(table, fixes, offsets, repros, reference);
    const SolutionReport rep = build_report(table, solve(table, cs));
    std::cout << render_report(rep);
    if (!out_path.empty()) write_text(out_path, report_to_json(rep).dump(2) + "\n");
    return exit_ok;
}

int cmd_sweep(const std::string& input, const std::string& vary, double from, double to,
              double step, const std::vector<std::string>& fixes,
              const std::vector<std::string>& repros, const std::string& out_path) {
    EconomyTable table = economy_from_json(load_json_file(input));
    const std::size_t branch = branch_index(table.branch_names, vary, "--vary");
    const ConstraintSet extra = build_constraints(table, fixes, {}, repros, "");
    const SweepResult result = run_sweep(table, branch, from, to, step, extra);
    for (const auto& skip : result.skipped)
        std::cerr << "sweep: skipped " << vary << " = " << skip << "\n";
    if (result.rows.empty()) {
        std::cerr << "sweep: no feasible point in the range\n";
        return exit_infeasible;
    }
    const std::string csv = sweep_csv(result.rows, table.size());
    if (out_path.empty())
        std::cout << csv;
    else
        write_text(out_path, csv);
    return exit_ok;
}

int cmd_simulate_converge(const std::string& config_path, const std::string& out_path) {
    const ScenarioConfig cfg = scenario_from_json(load_json_file(config_path));
    const Trajectory traj = run_convergence(cfg);
    const std::string csv = trajectory_csv(traj);
    if (out_path.empty())
        std::cout << csv;
    else
        write_text(out_path, csv);

    bool monotone = true;
    for (std::size_t t = 1; t < traj.records.size(); ++t)
        if (!(traj.records[t].rate_avg < traj.records[t - 1].rate_avg)) monotone = false;
    std::cerr << "monotone decreasing average rate: " << (monotone ? "pass" : "fail") << "\n";
    if (traj.records.size() >= 2) {
        const auto crit = convergence_criterion(traj);
        bool all = true;
        for (bool b : crit) all &= b;
        std::cerr << "convergence criterion dS/dK < S/K: " << (all ? "pass" : "fail") << "\n";
    }
    if (!traj.complete) std::cerr << "stopped early: " << traj.stop_reason << "\n";
    return exit_ok;
}

int cmd_simulate_okishio(const std::string& config_path, const std::string& out_path) {
    const OkishioConfig cfg = okishio_from_json(load_json_file(config_path));
    const OkishioReport rep = run_okishio(cfg.base, cfg.perturbation, cfg.freeze);
    const int digits = rendered_digits();
    std::ostringstream os;
    os << "phase 1 (equilibrium): r = " << format_sig(rep.r_before, digits) << "\n"
       << "phase 2 (transient):   S' = " << format_sig(rep.profit_after, digits)
       << ", r' = " << format_sig(rep.r_transient, digits) << "\n"
       << "phase 3 (reallocated): r'' = " << format_sig(rep.r_after, digits) << "\n"
       << "innovation incentive (r' > r): "
       << (rep.innovation_incentive ? "pass" : "fail: no innovation incentive") << "\n"
       << "TRPF ordering (r' > r > r''): " << (rep.trpf_ordering ? "pass" : "fail") << "\n";
    std::cout << os.str();
    if (!out_path.empty()) {
        json j{{"r_before", rep.r_before},
               {"profit_before", rep.profit_before},
               {"profit_after", rep.profit_after},
               {"r_transient", rep.r_transient},
               {"r_after", rep.r_after},
               {"innovation_incentive", rep.innovation_incentive},
               {"trpf_ordering", rep.trpf_ordering}};
        write_text(out_path, j.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_bortkiewicz(const std::string& input, double d_lux, std::optional<double> normalize,
                    const std::string& out_path) {
    const EconomyTable base = economy_from_json(load_json_file(input));
    BortkiewiczOptions opt;
    opt.luxury_amortization_share = d_lux;
    opt.normalize_total = normalize;
    const BortkiewiczResult res = build_bortkiewicz(base, opt);
    SolutionReport rep = build_report(res.table, res.solution);
    std::cout << "constructed luxury branch; wage-branch capital fixed point reached in "
              << res.fixed_point_iterations << " iterations\n\n";
    std::cout << render_report(rep);
    if (!out_path.empty()) {
        json j = report_to_json(rep);
        j["constructed_table"] = economy_to_json(res.table);
        j["fixed_point_iterations"] = res.fixed_point_iterations;
        write_text(out_path, j.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_eigen(const std::string& input) {
    const EconomyTable table = economy_from_json(load_json_file(input));
    const TechCoefficients c = derive_coefficients(table);
    if (!c.zero_fixed()) {
        std::cerr << "eigen: the socio-technical matrix path needs zero fixed capital "
                     "everywhere\n";
        return exit_infeasible;
    }
    const std::size_t n = c.size();
    DenseMatrix a(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a.at(i, j) = c.u[i][j] / c.w[i];
    const Eigenpair ep = dominant_eigenpair(a);
    const int digits = rendered_digits();
    std::cout << "socio-technical coefficient matrix A (u_ij / w_i):\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) std::cout << ' ' << format_sig(a.at(i, j), digits);
        std::cout << '\n';
    }
    std::cout << "lambda = " << format_sig(ep.value, digits)
              << "\nr = 1/lambda - 1 = " << format_sig(1.0 / ep.value - 1.0, digits) << "\nx_u =";
    for (double v : ep.vector) std::cout << ' ' << format_sig(v, digits);
    std::cout << '\n';
    return exit_ok;
}

int cmd_validate(const std::string& input) {
    const json j = load_json_file(input);
    const std::vector<std::string> failures = validate_report(j);
    if (failures.empty()) {
        std::cout << "validate: OK\n";
        return exit_ok;
    }
    for (const auto& f : failures) std::cout << "validate: FAIL " << f << "\n";
    return exit_invalid;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact solver for the value -> production-price transformation"};
    app.require_subcommand(1);

    std::string input, out_path, vary, reference;
    std::vector<std::string> fixes, offsets, repros;
    std::optional<int> n_override;
    double from = 0.0, to = 0.0, step = 1.0, d_lux = 0.0;
    std::optional<double> normalize;
    std::string config_path;

    auto* solve_cmd = app.add_subcommand("solve", "solve one economy table");
    solve_cmd->add_option("--input", input, "economy table JSON")->required();
    solve_cmd->add_option("--fix", fixes, "fix a branch capital, NAME=AMOUNT");
    solve_cmd->add_option("--delta-r", offsets, "profit-rate offset, NAME=OFFSET");
    solve_cmd->add_option("--constraint", repros, "repro:<commodity>:<value|price>");
    solve_cmd->add_option("--reference", reference, "reference branch for offsets");
    solve_cmd->add_option("--n", n_override, "override the amortization period");
    solve_cmd->add_option("--out", out_path, "write the report JSON here");

    auto* sweep_cmd = app.add_subcommand("sweep", "sweep one fixed capital over a range");
    sweep_cmd->add_option("--input", input, "economy table JSON")->required();
    sweep_cmd->add_option("--vary", vary, "branch whose capital is swept")->required();
    sweep_cmd->add_option("--from", from, "first fixed value")->required();
    sweep_cmd->add_option("--to", to, "last fixed value")->required();
    sweep_cmd->add_option("--step", step, "sweep step")->required();
    sweep_cmd->add_option("--fix", fixes, "additional fixed capitals, NAME=AMOUNT");
    sweep_cmd->add_option("--constraint", repros, "repro:<commodity>:<value|price>");
    sweep_cmd->add_option("--out", out_path, "write the CSV here (default stdout)");

    auto* sim_cmd = app.add_subcommand("simulate", "run a scenario");
    auto* conv_cmd = sim_cmd->add_subcommand("converge", "profit-rate convergence scenario");
    conv_cmd->add_option("--config", config_path, "scenario JSON")->required();
    conv_cmd->add_option("--out", out_path, "write the trajectory CSV here (default stdout)");
    auto* oki_cmd = sim_cmd->add_subcommand("okishio", "Okishio transient experiment");
    oki_cmd->add_option("--config", config_path, "okishio JSON")->required();
    oki_cmd->add_option("--out", out_path, "write the three-phase report JSON here");
    sim_cmd->require_subcommand(1);

    auto* bort_cmd = app.add_subcommand("bortkiewicz", "construct a total-reproduction economy");
    bort_cmd->add_option("--input", input, "3-branch base table JSON")->required();
    bort_cmd->add_option("--d-L", d_lux, "luxury amortization share D_L/K_L");
    bort_cmd->add_option("--normalize", normalize, "rescale the result to this total capital");
    bort_cmd->add_option("--out", out_path, "write the report JSON here");

    auto* eigen_cmd = app.add_subcommand("eigen", "dominant eigenpair of the coefficient matrix");
    eigen_cmd->add_option("--input", input, "economy table JSON (all F = 0)")->required();

    auto* validate_cmd = app.add_subcommand("validate", "re-check a stored report");
    validate_cmd->add_option("--input", input, "report JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve_cmd->parsed())
            return cmd_solve(input, fixes, offsets, repros, reference, n_override, out_path);
        if (sweep_cmd->parsed())
            return cmd_sweep(input, vary, from, to, step, fixes, repros, out_path);
        if (sim_cmd->parsed()) {
            if (conv_cmd->parsed()) return cmd_simulate_converge(config_path, out_path);
            return cmd_simulate_okishio(config_path, out_path);
        }
        if (bort_cmd->parsed()) return cmd_bortkiewicz(input, d_lux, normalize, out_path);
        if (eigen_cmd->parsed()) return cmd_eigen(input);
        if (validate_cmd->parsed()) return cmd_validate(input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify(e);
    }
    return exit_input;
}

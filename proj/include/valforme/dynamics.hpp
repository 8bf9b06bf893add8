#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "valforme/constructions.hpp"
#include "valforme/economy.hpp"
#include "valforme/errors.hpp"
#include "valforme/solver.hpp"

namespace valforme {

/// Convergence scenario: per-branch rate offsets scaled by a shrinking
/// differential, one branch's capital decremented each iteration, the rest
/// re-solved so both fundamental equalities hold at every step.
struct ScenarioConfig {
    EconomyTable base;
    double initial_delta_r = 0.0;
    double delta_r_decrement = 0.0;
    std::size_t decrement_branch = 0;
    double initial_capital = 0.0;   // starting capital of the decremented branch
    double capital_decrement = 0.0;
    int iterations = 1;
    Vector offsets_pattern;         // multiplier of delta_r per branch
    std::size_t reference_branch = 0;
};

struct TrajectoryRecord {
    int iteration = 0;
    Vector capital;       // K_i in value
    Vector rates;         // r_i
    double rate_avg = 0.0;
    double total_profit = 0.0;
    double total_surplus = 0.0;
    double co_value = 0.0;
    double co_price = 0.0;
    double costs_price = 0.0;
    double dS1_dK1 = std::numeric_limits<double>::quiet_NaN();
    double S1_over_K1 = 0.0;
    Vector profit;        // per-branch S_i
    double residual_I = 0.0;
    double residual_II = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;
    bool complete = true;
    std::string stop_reason;
    std::size_t branch_count = 0;
};

inline Trajectory run_convergence(const ScenarioConfig& cfg, const SolveOptions& opt = {}) {
    validate(cfg.base);
    const std::size_t n = cfg.base.size();
    if (cfg.iterations < 1) throw StructuralError("scenario needs at least one iteration");
    if (cfg.delta_r_decrement < 0.0 || cfg.capital_decrement < 0.0)
        throw StructuralError("scenario decrements must be nonnegative");
    if (cfg.offsets_pattern.size() != n)
        throw StructuralError("offsets pattern must name every branch");
    if (cfg.decrement_branch >= n) throw StructuralError("decremented branch out of range");

    const double k_total = cfg.base.capital_target();
    Trajectory traj;
    traj.branch_count = n;
    for (int t = 0; t < cfg.iterations; ++t) {
        const double delta = cfg.initial_delta_r - t * cfg.delta_r_decrement;
        ConstraintSet cs;
        cs.reference_branch = cfg.reference_branch;
        cs.profit_offsets.resize(n);
        for (std::size_t i = 0; i < n; ++i) cs.profit_offsets[i] = cfg.offsets_pattern[i] * delta;
        cs.fixed_k[cfg.decrement_branch] = cfg.initial_capital - t * cfg.capital_decrement;

        TransformationSolution sol;
        try {
            sol = solve(cfg.base, cs, opt);
        } catch (const std::exception& e) {
            if (t == 0)
                throw StructuralError(std::string("scenario unsolvable at the first iteration: ") +
                                      e.what());
            traj.complete = false;
            traj.stop_reason = e.what();
            break;
        }

        TrajectoryRecord rec;
        rec.iteration = t;
        rec.capital = sol.capital_value;
        rec.rates = sol.r_per_branch;
        rec.profit = sol.profit;
        rec.total_profit = sol.total_profit();
        rec.total_surplus = sol.total_surplus_value();
        rec.rate_avg = rec.total_profit / k_total;
        const OrganicComposition co = organic_composition(sol.value_table, &sol.x);
        rec.co_value = co.value_co;
        rec.co_price = co.price_co;
        rec.costs_price = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            rec.costs_price += sol.value_table.amortization(i) +
                               (sol.capital_price[i] - sol.value_table.fixed_capital[i]);
        rec.S1_over_K1 = sol.profit[0] / sol.capital_value[0];
        rec.residual_I = sol.residual_I;
        rec.residual_II = sol.residual_II;
        if (!traj.records.empty()) {
            const TrajectoryRecord& prev = traj.records.back();
            const double dk = sol.capital_value[0] - prev.capital[0];
            rec.dS1_dK1 = (sol.profit[0] - prev.profit[0]) / dk;
        }
        traj.records.push_back(std::move(rec));
    }
    return traj;
}

/// dS_i/dK_i < S_i/K_i for the most profitable branch, evaluated with the
/// forward-difference profit slope between consecutive records. One boolean
/// per record from the second onward.
inline std::vector<bool> convergence_criterion(const Trajectory& traj) {
    if (traj.records.size() < 2)
        throw StructuralError("convergence criterion needs at least two records");
    std::vector<bool> ok;
    for (std::size_t t = 1; t < traj.records.size(); ++t) {
        const TrajectoryRecord& prev = traj.records[t - 1];
        const TrajectoryRecord& cur = traj.records[t];
        std::size_t top = 0;
        for (std::size_t i = 1; i < cur.rates.size(); ++i)
            if (cur.rates[i] > cur.rates[top]) top = i;
        const double dk = cur.capital[top] - prev.capital[top];
        const double ds = cur.profit[top] - prev.profit[top];
        const double ratio = cur.profit[top] / cur.capital[top];
        ok.push_back(dk == 0.0 ? ratio > 0.0 : ds / dk < ratio);
    }
    return ok;
}

// --- Okishio transient experiment ---------------------------------------------------

struct OkishioPerturbation {
    std::size_t branch = 0;
    double new_f = 0.0;  // f'_i = F'_i / K_i
    double new_v = 0.0;  // v'_i = V'_i / K_i
};

struct OkishioReport {
    TransformationSolution base;       // phase 1: equilibrium before innovation
    double branch_capital = 0.0;       // K of the innovating branch
    double amortization_before = 0.0;  // D
    double amortization_after = 0.0;   // D'
    double wages_before = 0.0;         // V (value)
    double wages_after = 0.0;          // V'
    double profit_before = 0.0;        // S
    double profit_after = 0.0;         // S' = S + x_v (V - V') - (D' - D)
    double r_before = 0.0;
    double r_transient = 0.0;          // S' / Kp' at unchanged prices and capital
    bool innovation_incentive = false; // r_transient > r_before
    TransformationSolution resolved;   // phase 3: new equilibrium, capitals reallocated
    double r_after = 0.0;
    bool trpf_ordering = false;        // r' > r > r''
};

/// Three-phase Okishio experiment: solve the base economy, price the cost
/// saving of the innovating branch at unchanged prices and capital, then
/// re-solve with the new technique and the frozen capitals. The branch's
/// surplus per unit of capital is untouched (the socially necessary labour
/// has not changed yet), so its exploitation rate rises to pl / v'.
inline OkishioReport run_okishio(const EconomyTable& base, const OkishioPerturbation& pert,
                                 const std::map<std::size_t, double>& freeze,
                                 const SolveOptions& opt = {}) {
    validate(base);
    const TechCoefficients c = derive_coefficients(base);
    const std::size_t n = c.size();
    const std::size_t b = pert.branch;
    if (b >= n) throw StructuralError("perturbed branch out of range");

    TechCoefficients c2 = c;
    c2.f[b] = pert.new_f;
    c2.d[b] = pert.new_f / c.n_cycles;
    c2.u[b][c.wage_index] = pert.new_v;
    if (!(pert.new_v > 0.0)) throw StructuralError("perturbation needs positive variable capital");
    c2.e_rates[b] = c.pl[b] / pert.new_v;  // pl unchanged
    c2.w[b] = c2.d[b] + c2.circulating(b) + c2.pl[b];
    double share = c2.f[b] + c2.circulating(b);
    if (std::abs(share - 1.0) > 1e-9)
        throw StructuralError("perturbation must keep the branch capital constant (f + sum u = 1)");

    ConstraintSet cs;
    cs.fixed_k = freeze;
    const double k_total = base.capital_target();

    OkishioReport rep;
    rep.base = detail::solve_coefficients(c, k_total, cs, opt);
    rep.r_before = rep.base.r_star;
    rep.branch_capital = rep.base.capital_value[b];
    const double x_wage = rep.base.x[c.wage_index];
    rep.amortization_before = c.d[b] * rep.branch_capital;
    rep.amortization_after = c2.d[b] * rep.branch_capital;
    rep.wages_before = c.v(b) * rep.branch_capital;
    rep.wages_after = pert.new_v * rep.branch_capital;
    rep.profit_before = rep.base.profit[b];
    rep.profit_after = rep.profit_before + x_wage * (rep.wages_before - rep.wages_after) -
                       (rep.amortization_after - rep.amortization_before);
    double committed = pert.new_f * rep.branch_capital;  // F' plus priced circulating at old x
    for (std::size_t j = 0; j < n; ++j) {
        const double u = j == c.wage_index ? pert.new_v : c.u[b][j];
        committed += rep.base.x[j] * u * rep.branch_capital;
    }
    rep.r_transient = rep.profit_after / committed;
    rep.innovation_incentive = rep.r_transient > rep.r_before;

    rep.resolved = detail::solve_coefficients(c2, k_total, cs, opt);
    rep.r_after = rep.resolved.r_star;
    rep.trpf_ordering = rep.r_transient > rep.r_before && rep.r_before > rep.r_after;
    return rep;
}

}  // namespace valforme

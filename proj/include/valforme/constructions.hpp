#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valforme/economy.hpp"
#include "valforme/errors.hpp"
#include "valforme/solver.hpp"

namespace valforme {

namespace detail {

/// Coefficient-level dispatch shared by the constructive procedures.
inline TransformationSolution solve_coefficients(const TechCoefficients& c, double k_total,
                                                 const ConstraintSet& constraints,
                                                 const SolveOptions& opt = {}) {
    if (c.no_surplus()) return solve_no_surplus(c, k_total);
    if (c.zero_fixed()) return solve_zero_fixed(c, k_total, constraints, opt);
    return find_r_star(c, k_total, constraints, opt);
}

}  // namespace detail

// --- Bortkiewicz-type total reproduction -----------------------------------------

struct BortkiewiczOptions {
    /// Amortization share d_L = D_L / K_L of the luxury branch; its fixed
    /// capital n d_L K_L may be chosen freely.
    double luxury_amortization_share = 0.0;
    std::optional<double> normalize_total;  // rescale the 4-branch economy to this K_T
    int max_iterations = 100;
    SolveOptions solve_options;
};

struct BortkiewiczResult {
    EconomyTable table;  // the constructed 4-branch economy
    TransformationSolution solution;
    int fixed_point_iterations = 0;
    double wage_branch_capital = 0.0;  // converged K_3 before normalization
};

/// Adds a luxury branch to a solved 3-branch base so that every commodity's
/// production price equals its consumption price. The luxury inputs absorb
/// the per-commodity surpluses; the wage branch's capital is pinned by
/// K_3 = [PL(1+r) + r(n d_L K_L + sum D)] / w_3 and iterated through the main
/// solver until it is a fixed point. The constructed system has x_L = 1.
inline BortkiewiczResult build_bortkiewicz(const EconomyTable& base,
                                           const BortkiewiczOptions& opt = {}) {
    validate(base);
    if (base.size() != 3)
        throw UnsupportedConstructionError("total-reproduction construction needs a 3-branch base");
    for (std::size_t i = 0; i < base.size(); ++i)
        if (std::abs(base.e_rates[i] - 1.0) > 1e-12)
            throw UnsupportedConstructionError(
                "total-reproduction construction assumes unit exploitation rates");
    const double f_lux = opt.luxury_amortization_share * base.n_cycles;
    if (!(f_lux >= 0.0 && f_lux < 1.0))
        throw UnsupportedConstructionError("luxury amortization share out of range");

    const TechCoefficients c = derive_coefficients(base);
    const double k_base = base.capital_target();
    const std::size_t wage = base.wage_index;

    double k3 = base.capital(wage) * k_base / base.total_capital();
    TransformationSolution sol;
    double k_lux = 0.0;
    int it = 0;
    for (;; ++it) {
        if (it >= opt.max_iterations)
            throw ConvergenceError("wage-branch capital loop did not reach a fixed point", k3);
        ConstraintSet cs;
        cs.fixed_k[wage] = k3;
        sol = detail::solve_coefficients(c, k_base, cs, opt.solve_options);
        double pl = 0.0, amort = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            pl += sol.value_table.surplus_value(i);
            amort += sol.value_table.amortization(i);
        }
        k_lux = (pl + amort) / (1.0 - f_lux);
        const double k3_next =
            (pl * (1.0 + sol.r_star) + sol.r_star * (f_lux * k_lux + amort)) / c.w[wage];
        const bool done = std::abs(k3_next - k3) <= 1e-12 * std::max(1.0, std::abs(k3));
        k3 = k3_next;
        if (done) break;
    }

    // Luxury inputs: the per-commodity surpluses of the converged base state.
    EconomyTable t;
    t.branch_names = base.branch_names;
    t.branch_names.push_back("L");
    t.wage_index = wage;
    t.machine_index = base.machine_index;
    t.n_cycles = base.n_cycles;
    t.fixed_capital.assign(4, 0.0);
    t.consumption.assign(4, std::vector<double>(4, 0.0));
    t.e_rates.assign(4, 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
        t.fixed_capital[i] = sol.value_table.fixed_capital[i];
        for (std::size_t j = 0; j < 3; ++j) t.consumption[i][j] = sol.value_table.consumption[i][j];
    }
    for (std::size_t j = 0; j < 3; ++j) {
        double consumed = 0.0;
        for (std::size_t i = 0; i < 3; ++i) consumed += sol.value_table.consumption[i][j];
        t.consumption[3][j] = sol.value_table.production(j) - consumed;
        if (t.consumption[3][j] < 0.0)
            throw UnsupportedConstructionError("base allocation leaves no surplus of commodity " +
                                               base.branch_names[j] + " for the luxury branch");
    }
    t.fixed_capital[3] = f_lux * k_lux;

    double scale = 1.0;
    if (opt.normalize_total) scale = *opt.normalize_total / (k_base + k_lux);
    if (scale != 1.0)
        for (std::size_t i = 0; i < 4; ++i) {
            t.fixed_capital[i] *= scale;
            for (double& u : t.consumption[i]) u *= scale;
        }
    t.k_total = (k_base + k_lux) * scale;

    ConstraintSet cs4;
    cs4.fixed_k[wage] = k3 * scale;
    cs4.fixed_k[3] = k_lux * scale;
    BortkiewiczResult res;
    res.table = t;
    res.solution = solve(t, cs4, opt.solve_options);
    res.fixed_point_iterations = it + 1;
    res.wage_branch_capital = k3;
    return res;
}

// --- Marx-type simple reproduction ------------------------------------------------

/// Closes the system of a luxury-carrying economy with value-space
/// reproduction constraints on every produced-and-consumed commodity other
/// than the wage good. With one luxury branch this determines the allocation
/// completely, and the wage-goods balance (production of consumer goods plus
/// luxury equals wages plus surplus) follows as a consequence.
inline TransformationSolution solve_marx_simple_reproduction(
    const EconomyTable& t, std::optional<double> k_total_override = {}) {
    validate(t);
    const std::size_t n = t.size();
    ConstraintSet cs;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == t.wage_index || t.is_luxury_commodity(j)) continue;
        cs.reproduction_constraints.push_back({j, ConstraintSpace::value});
    }
    if (cs.reproduction_constraints.size() + 2 != n)
        throw DegenerateConstraintsError(
            "simple reproduction needs exactly one luxury branch beside the wage good; found " +
            std::to_string(n - 2 - cs.reproduction_constraints.size()) + " extra");
    EconomyTable input = t;
    if (k_total_override) input.k_total = *k_total_override;
    return solve(input, cs);
}

// --- neutral element of the transformation -----------------------------------------

struct NeutralElementReport {
    bool pass = false;
    double max_x_deviation = 0.0;           // max |x'_i - 1|
    double max_allocation_deviation = 0.0;  // max relative |K'_i - Kp_i|
    EconomyTable reinterpreted;
    TransformationSolution resolved;
};

/// Reinterprets a uniform-rate solution's price table as a value table whose
/// branch exploitation rates are e'_i = S_i / (x_wage V_i), then re-solves.
/// A neutral element maps to itself: x' = 1 and the allocation equals the
/// price capitals of the original solution. Branches the solution allocated
/// no capital to have no row to reinterpret and are dropped.
inline NeutralElementReport neutral_element_check(const TransformationSolution& s,
                                                  const SolveOptions& opt = {}) {
    const std::size_t n = s.size();
    for (double r : s.r_per_branch)
        if (r != s.r_star)
            throw StructuralError("neutral-element check requires a uniform profit rate");

    const TechCoefficients& c = s.coeffs;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i)
        if (s.capital_value[i] > 0.0) keep.push_back(i);
    const std::size_t m = keep.size();
    const auto dropped = [&](std::size_t original) {
        for (std::size_t i : keep)
            if (i == original) return false;
        return true;
    };
    if (dropped(c.wage_index) || (c.machine_index && dropped(*c.machine_index)))
        throw StructuralError("wage or machine branch carries no capital; "
                              "reinterpretation undefined");

    EconomyTable t;
    t.n_cycles = c.n_cycles;
    t.consumption.assign(m, std::vector<double>(m, 0.0));
    t.fixed_capital.assign(m, 0.0);
    t.e_rates.assign(m, 0.0);
    const double x_wage = s.x[c.wage_index];
    Vector kp(m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
        const std::size_t i = keep[a];
        t.branch_names.push_back(c.branch_names[i]);
        if (i == c.wage_index) t.wage_index = a;
        if (c.machine_index && i == *c.machine_index) t.machine_index = a;
        t.fixed_capital[a] = s.value_table.fixed_capital[i];
        for (std::size_t b = 0; b < m; ++b)
            t.consumption[a][b] = s.x[keep[b]] * s.value_table.consumption[i][keep[b]];
        const double priced_wages = x_wage * s.value_table.variable_capital(i);
        if (priced_wages > 0.0)
            t.e_rates[a] = s.profit[i] / priced_wages;
        else if (std::abs(s.profit[i]) > 1e-12)
            throw StructuralError("branch " + c.branch_names[i] +
                                  " carries profit but pays no wages; reinterpretation undefined");
        kp[a] = s.capital_price[i];
    }
    double kp_total = 0.0;
    for (double v : kp) kp_total += v;
    t.k_total = kp_total;

    // The reinterpreted table has uniform profit per unit of capital, so
    // equality II no longer closes the allocation: pin every branch but the
    // largest at its price capital and let conservation determine that one.
    const TechCoefficients rc = derive_coefficients(t);
    std::size_t largest = 0;
    for (std::size_t a = 1; a < m; ++a)
        if (kp[a] > kp[largest]) largest = a;
    ConstraintSet cs;
    for (std::size_t a = 0; a < m; ++a)
        if (a != largest) cs.fixed_k[a] = kp[a];
    if (rc.no_surplus()) cs.fixed_k.clear();

    NeutralElementReport rep;
    rep.reinterpreted = t;
    rep.resolved = solve(t, cs, opt);
    for (std::size_t a = 0; a < m; ++a) {
        rep.max_x_deviation = std::max(rep.max_x_deviation, std::abs(rep.resolved.x[a] - 1.0));
        const double ref = std::max(std::abs(kp[a]), 1e-12 * kp_total);
        rep.max_allocation_deviation = std::max(
            rep.max_allocation_deviation, std::abs(rep.resolved.capital_value[a] - kp[a]) / ref);
    }
    rep.pass = rep.max_x_deviation <= 1e-9 && rep.max_allocation_deviation <= 1e-9;
    return rep;
}

}  // namespace valforme

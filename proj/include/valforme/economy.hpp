#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "valforme/errors.hpp"
#include "valforme/linalg.hpp"

namespace valforme {

/// Absolute-value table of an N-branch economy for one production cycle.
/// Branch i produces commodity i; `consumption[i][j]` is the amount of
/// commodity j consumed by branch i per cycle, in monetary units. The wage
/// column `consumption[i][wage_index]` is the branch's variable capital.
/// Fixed capital is imported at price = value unless `machine_index` names
/// the branch producing it, in which case the machine column must stay zero
/// (machines are bought once per amortization period, not per cycle).
struct EconomyTable {
    std::vector<std::string> branch_names;
    std::size_t wage_index = 0;
    std::optional<std::size_t> machine_index;
    std::vector<double> fixed_capital;               // F_i
    int n_cycles = 1;                                // amortization period n
    std::vector<std::vector<double>> consumption;    // U[i][j]
    std::vector<double> e_rates;                     // exploitation rate e_i
    std::optional<double> k_total;                   // K_T target, defaults to sum of K_i
    std::vector<std::string> roles;                  // free-form labels, may be empty

    std::size_t size() const { return branch_names.size(); }

    double capital(std::size_t i) const {
        return fixed_capital[i] +
               std::accumulate(consumption[i].begin(), consumption[i].end(), 0.0);
    }
    double amortization(std::size_t i) const { return fixed_capital[i] / n_cycles; }
    double variable_capital(std::size_t i) const { return consumption[i][wage_index]; }
    double surplus_value(std::size_t i) const { return e_rates[i] * variable_capital(i); }
    double production(std::size_t i) const {
        return amortization(i) +
               std::accumulate(consumption[i].begin(), consumption[i].end(), 0.0) +
               surplus_value(i);
    }
    double total_capital() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += capital(i);
        return s;
    }
    double capital_target() const { return k_total.value_or(total_capital()); }

    /// A commodity nobody consumes within the cycle (zero column, and no
    /// amortization demand when it is the machine commodity).
    bool is_luxury_commodity(std::size_t j) const {
        for (std::size_t i = 0; i < size(); ++i)
            if (consumption[i][j] != 0.0) return false;
        if (machine_index && *machine_index == j)
            for (std::size_t i = 0; i < size(); ++i)
                if (fixed_capital[i] != 0.0) return false;
        return true;
    }
};

inline void validate(const EconomyTable& t) {
    const std::size_t n = t.size();
    if (n == 0) throw StructuralError("economy table has no branches");
    if (t.fixed_capital.size() != n || t.consumption.size() != n || t.e_rates.size() != n)
        throw StructuralError("economy table fields have inconsistent lengths");
    if (t.n_cycles < 1) throw StructuralError("amortization period must be a positive cycle count");
    if (t.wage_index >= n) throw StructuralError("wage commodity index out of range");
    if (t.machine_index && *t.machine_index >= n)
        throw StructuralError("machine commodity index out of range");
    for (std::size_t i = 0; i < n; ++i) {
        if (t.consumption[i].size() != n)
            throw StructuralError("consumption matrix row of branch " + t.branch_names[i] +
                                  " is not square");
        if (t.fixed_capital[i] < 0.0 || !std::isfinite(t.fixed_capital[i]))
            throw StructuralError("negative fixed capital in branch " + t.branch_names[i]);
        for (double u : t.consumption[i])
            if (u < 0.0 || !std::isfinite(u))
                throw StructuralError("negative consumption entry in branch " + t.branch_names[i]);
        if (t.e_rates[i] < 0.0 || !std::isfinite(t.e_rates[i]))
            throw StructuralError("negative exploitation rate in branch " + t.branch_names[i]);
        if (!(t.capital(i) > 0.0))
            throw StructuralError("branch " + t.branch_names[i] + " has non-positive capital");
        if (t.machine_index && t.consumption[i][*t.machine_index] != 0.0)
            throw StructuralError("branch " + t.branch_names[i] +
                                  " buys the machine commodity per cycle; machines enter via "
                                  "fixed capital only");
    }
}

/// Capital-normalized socio-technical coefficients of an economy. These are
/// the intangible model parameters: scaling any branch's absolute figures
/// leaves them unchanged.
struct TechCoefficients {
    std::vector<std::string> branch_names;
    std::size_t wage_index = 0;
    std::optional<std::size_t> machine_index;
    int n_cycles = 1;
    std::vector<double> f;                   // F_i / K_i
    std::vector<double> d;                   // f_i / n
    std::vector<std::vector<double>> u;      // U[i][j] / K_i
    std::vector<double> pl;                  // e_i * v_i
    std::vector<double> w;                   // production per unit capital
    std::vector<double> e_rates;

    std::size_t size() const { return f.size(); }
    double v(std::size_t i) const { return u[i][wage_index]; }
    double circulating(std::size_t i) const {
        return std::accumulate(u[i].begin(), u[i].end(), 0.0);
    }
    bool zero_fixed() const {
        for (double fi : f)
            if (fi != 0.0) return false;
        return true;
    }
    bool no_surplus() const {
        for (double p : pl)
            if (p != 0.0) return false;
        return true;
    }
    /// Organic composition (F + non-wage inputs) / V of one branch.
    double organic_composition(std::size_t i) const {
        double nonwage = f[i];
        for (std::size_t j = 0; j < size(); ++j)
            if (j != wage_index) nonwage += u[i][j];
        return nonwage / v(i);
    }
    bool is_luxury_commodity(std::size_t j) const {
        for (std::size_t i = 0; i < size(); ++i)
            if (u[i][j] != 0.0) return false;
        if (machine_index && *machine_index == j)
            for (std::size_t i = 0; i < size(); ++i)
                if (f[i] != 0.0) return false;
        return true;
    }
};

inline TechCoefficients derive_coefficients(const EconomyTable& t) {
    validate(t);
    const std::size_t n = t.size();
    TechCoefficients c;
    c.branch_names = t.branch_names;
    c.wage_index = t.wage_index;
    c.machine_index = t.machine_index;
    c.n_cycles = t.n_cycles;
    c.e_rates = t.e_rates;
    c.f.resize(n);
    c.d.resize(n);
    c.u.resize(n);
    c.pl.resize(n);
    c.w.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double k = t.capital(i);
        c.f[i] = t.fixed_capital[i] / k;
        c.d[i] = c.f[i] / t.n_cycles;
        c.u[i].resize(n);
        for (std::size_t j = 0; j < n; ++j) c.u[i][j] = t.consumption[i][j] / k;
        c.pl[i] = t.e_rates[i] * c.u[i][t.wage_index];
        c.w[i] = c.d[i] + c.circulating(i) + c.pl[i];
    }
    return c;
}

/// Rebuilds an absolute table from coefficients and a capital allocation.
inline EconomyTable table_from_coefficients(const TechCoefficients& c, const Vector& capital) {
    const std::size_t n = c.size();
    if (capital.size() != n) throw StructuralError("capital vector not conformable");
    EconomyTable t;
    t.branch_names = c.branch_names;
    t.wage_index = c.wage_index;
    t.machine_index = c.machine_index;
    t.n_cycles = c.n_cycles;
    t.e_rates = c.e_rates;
    t.fixed_capital.resize(n);
    t.consumption.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.fixed_capital[i] = c.f[i] * capital[i];
        t.consumption[i].resize(n);
        for (std::size_t j = 0; j < n; ++j) t.consumption[i][j] = c.u[i][j] * capital[i];
    }
    double total = 0.0;
    for (double k : capital) total += k;
    t.k_total = total;
    return t;
}

/// Multiplies every absolute figure of one branch by lambda (test/scaling aid).
inline EconomyTable scale_branch(EconomyTable t, std::size_t branch, double lambda) {
    t.fixed_capital[branch] *= lambda;
    for (double& u : t.consumption[branch]) u *= lambda;
    return t;
}

struct OrganicComposition {
    double value_co = 0.0;  // (F + non-wage inputs) / V, aggregate
    double price_co = 0.0;  // same with inputs priced and the wage column at x_wage
};

/// Aggregate organic composition. When `x` is given, the price composition
/// uses x-priced non-wage inputs over the x_wage-priced wage bill; otherwise
/// price_co equals value_co.
inline OrganicComposition organic_composition(const EconomyTable& t,
                                              const Vector* x = nullptr) {
    validate(t);
    const std::size_t n = t.size();
    double fixed = 0.0, nonwage = 0.0, wages = 0.0, nonwage_priced = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fixed += t.fixed_capital[i];
        wages += t.variable_capital(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == t.wage_index) continue;
            nonwage += t.consumption[i][j];
            nonwage_priced += (x ? (*x)[j] : 1.0) * t.consumption[i][j];
        }
    }
    if (!(wages > 0.0)) throw StructuralError("aggregate variable capital is zero");
    OrganicComposition co;
    co.value_co = (fixed + nonwage) / wages;
    co.price_co = (fixed + nonwage_priced) / ((x ? (*x)[t.wage_index] : 1.0) * wages);
    return co;
}

/// Per-commodity surplus of production over total consumption. Negative
/// entries are flagged as stock-dependent rather than rejected: they are
/// admissible when stocks built up in earlier cycles cover the gap.
struct DemandReport {
    struct Entry {
        std::string commodity;
        double value_surplus = 0.0;
        std::optional<double> price_surplus;
        bool stock_dependent = false;
    };
    std::vector<Entry> entries;
    bool met() const {
        for (const auto& e : entries)
            if (e.stock_dependent) return false;
        return true;
    }
};

/// Evaluates the solvent-social-need condition for every commodity. With a
/// transformation vector `x` the price-side surplus is reported as well.
/// Imported fixed capital is deducted from production as joint value; in the
/// machine model the machine commodity instead faces the amortization demand.
inline DemandReport check_demand(const EconomyTable& t, const Vector* x = nullptr,
                                 double tolerance = 1e-9) {
    validate(t);
    const std::size_t n = t.size();
    DemandReport rep;
    for (std::size_t j = 0; j < n; ++j) {
        DemandReport::Entry e;
        e.commodity = t.branch_names[j];
        const bool machine = t.machine_index && *t.machine_index == j;
        double consumed = 0.0, amort_demand = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            consumed += t.consumption[i][j];
            amort_demand += t.amortization(i);
        }
        if (machine) {
            e.value_surplus = t.production(j) - amort_demand;
            if (x) e.price_surplus = (*x)[j] * t.production(j) - amort_demand;
        } else {
            const double deduction = t.machine_index ? 0.0 : t.amortization(j);
            e.value_surplus = t.production(j) - deduction - consumed;
            if (x) e.price_surplus = (*x)[j] * t.production(j) - deduction - (*x)[j] * consumed;
        }
        const double scale = std::max(1.0, t.production(j));
        e.stock_dependent = e.value_surplus < -tolerance * scale ||
                            (e.price_surplus && *e.price_surplus < -tolerance * scale);
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

}  // namespace valforme

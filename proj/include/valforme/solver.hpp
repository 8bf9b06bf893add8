#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "valforme/economy.hpp"
#include "valforme/errors.hpp"
#include "valforme/linalg.hpp"

namespace valforme {

enum class ConstraintSpace { value, price };

/// "Production of commodity `commodity` equals its total consumption",
/// stated on value figures or on priced figures. Consumption includes the
/// amortization demand when the commodity is the machine, and the
/// capitalists' consumption (the surplus value) when it is the wage good.
struct ReproductionConstraint {
    std::size_t commodity = 0;
    ConstraintSpace space = ConstraintSpace::value;
};

/// Closure of the underdetermined capital system. The k-system itself
/// contributes two equations (capital conservation and fundamental equality
/// II), so exactly N - 2 entries between fixed capitals and reproduction
/// constraints are required. Transformation-neutral tables, where equality
/// II is vacuous, need N - 1.
struct ConstraintSet {
    std::map<std::size_t, double> fixed_k;        // branch -> capital, m.u.
    Vector profit_offsets;                        // delta r_i; empty means uniform
    std::vector<ReproductionConstraint> reproduction_constraints;
    std::size_t reference_branch = 0;             // branch whose rate is the base r

    bool uniform() const {
        for (double o : profit_offsets)
            if (o != 0.0) return false;
        return true;
    }
    double offset(std::size_t i) const {
        return profit_offsets.empty() ? 0.0 : profit_offsets[i];
    }
};

/// Price-side rendering of a solved table: amortization unpriced, inputs
/// priced by x_j, profit column S_i, production x_i W_i.
struct PriceTable {
    std::vector<double> amortization;
    std::vector<std::vector<double>> inputs;
    std::vector<double> profit;
    std::vector<double> production;
    std::vector<double> capital;  // Kp_i
};

struct ZeroFixedSolve {
    double eigen_rate = 0.0;  // r with 1/(1+r) the dominant eigenvalue
    Vector unit_vector;       // x_u, |x_u|_2 = 1, strictly positive
    double q_star = 0.0;      // modulus: x = q* x_u
    int iterations = 0;
};

struct TransformationSolution {
    TechCoefficients coeffs;
    Vector x;                   // transformation coefficients, > 0
    double r_star = 0.0;        // reference profit rate
    Vector r_per_branch;        // r* + delta r_i
    Vector capital_value;       // K_i
    Vector capital_price;       // Kp_i
    Vector profit;              // S_i
    EconomyTable value_table;   // reallocated absolute table
    PriceTable price_table;
    double residual_I = 0.0;    // |sum S - sum PL|
    double residual_II = 0.0;   // |sum x_i W_i - sum W_i|
    double z_at_solution = 0.0;
    std::optional<ZeroFixedSolve> zero_fixed;
    std::vector<std::string> notes;

    std::size_t size() const { return x.size(); }
    double total_capital() const {
        double s = 0.0;
        for (double k : capital_value) s += k;
        return s;
    }
    double total_surplus_value() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += value_table.surplus_value(i);
        return s;
    }
    double total_profit() const {
        double s = 0.0;
        for (double v : profit) s += v;
        return s;
    }
};

struct SolveOptions {
    double rate_step = 1e-3;  // scan resolution for r (and for q, scaled by sqrt N)
    double rate_max = 10.0;
    int refine_limit = 200;
};

// --- price system ----------------------------------------------------------

/// Row i encodes  sum_j t_i u_ij x_j - w_i x_i = -d_i (1 + n r_i)  with
/// t_i = 1 + r_ref + offset_i. The amortization stays on the right-hand side
/// uncoefficiented: imported machines enter at value, and in-system machines
/// are bought once per n cycles rather than per cycle.
inline std::pair<DenseMatrix, Vector> assemble_price_system(const TechCoefficients& c,
                                                            double r_ref,
                                                            const ConstraintSet& constraints = {}) {
    const std::size_t n = c.size();
    DenseMatrix m(n);
    Vector rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ri = r_ref + constraints.offset(i);
        const double t = 1.0 + ri;
        for (std::size_t j = 0; j < n; ++j) m.at(i, j) = t * c.u[i][j];
        m.at(i, i) -= c.w[i];
        rhs[i] = -c.d[i] * (1.0 + c.n_cycles * ri);
    }
    return {std::move(m), std::move(rhs)};
}

namespace detail {

inline void require_positive_x(const Vector& x, const TechCoefficients& c) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] > 0.0) || !std::isfinite(x[i]))
            throw InfeasibleAllocationError(
                "transformation coefficient of branch " + c.branch_names[i] + " not positive", i);
}

/// Coefficient row of one reproduction constraint: sum_i row_i K_i = 0.
inline Vector reproduction_row(const TechCoefficients& c, const ReproductionConstraint& rc,
                               const Vector& x) {
    const std::size_t n = c.size();
    const std::size_t j = rc.commodity;
    if (j >= n) throw StructuralError("reproduction constraint names no commodity");
    const bool machine = c.machine_index && *c.machine_index == j;
    const bool wage = j == c.wage_index;
    const double xj = rc.space == ConstraintSpace::price ? x[j] : 1.0;
    Vector row(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double coef = (i == j ? xj * c.w[j] : 0.0) - xj * c.u[i][j];
        if (machine) coef -= c.d[i];
        if (wage) coef -= c.pl[i];
        row[i] = coef;
    }
    return row;
}

}  // namespace detail

// --- capital system ---------------------------------------------------------

namespace detail {

struct KSolve {
    Vector k;
    bool solved = false;    // false: constraint system singular
    bool feasible = false;  // every K_i >= -1e-9 K_T
    std::size_t bad_branch = 0;
};

inline void validate_closures(const TechCoefficients& c, const ConstraintSet& constraints,
                              std::size_t expected) {
    const std::size_t n = c.size();
    const std::size_t closures =
        constraints.fixed_k.size() + constraints.reproduction_constraints.size();
    if (n < 2 || closures != expected)
        throw DegenerateConstraintsError(
            "capital system needs exactly " + std::to_string(expected) +
            " closure constraints for N = " + std::to_string(n) + ", got " +
            std::to_string(closures) +
            (closures < expected ? " (underdetermined)" : " (overdetermined)"));
    for (const auto& [branch, amount] : constraints.fixed_k) {
        (void)amount;
        if (branch >= n) throw StructuralError("fixed capital names no branch");
    }
    for (const auto& rc : constraints.reproduction_constraints)
        if (rc.commodity >= n) throw StructuralError("reproduction constraint names no commodity");
}

/// Raw k-system solve: conservation, fundamental equality II, fixed capitals,
/// reproduction constraints. Negative allocations are reported, not clamped,
/// so the z-function stays evaluable outside the feasible set.
inline KSolve solve_k_raw(const TechCoefficients& c, const Vector& x, double k_total,
                          const ConstraintSet& constraints) {
    const std::size_t n = c.size();
    DenseMatrix m(n);
    Vector rhs(n, 0.0);
    std::size_t row = 0;
    for (std::size_t j = 0; j < n; ++j) m.at(row, j) = 1.0;  // conservation of K_T
    rhs[row++] = k_total;
    for (std::size_t j = 0; j < n; ++j) m.at(row, j) = c.w[j] * (1.0 - x[j]);  // equality II
    rhs[row++] = 0.0;
    for (const auto& [branch, amount] : constraints.fixed_k) {
        m.at(row, branch) = 1.0;
        rhs[row++] = amount;
    }
    for (const auto& rc : constraints.reproduction_constraints) {
        const Vector r = reproduction_row(c, rc, x);
        for (std::size_t j = 0; j < n; ++j) m.at(row, j) = r[j];
        rhs[row++] = 0.0;
    }
    KSolve out;
    try {
        out.k = solve_linear(m, rhs);
    } catch (const SingularSystemError&) {
        return out;
    }
    out.solved = true;
    out.feasible = true;
    for (std::size_t i = 0; i < n; ++i)
        if (out.k[i] < -1e-9 * k_total) {
            out.feasible = false;
            out.bad_branch = i;
            break;
        }
    return out;
}

}  // namespace detail

/// Solves the k-system for a candidate transformation vector. Exactly N - 2
/// closure entries are required; singular systems and negative allocations
/// raise the dedicated errors.
inline Vector solve_k(const TechCoefficients& c, const Vector& x, double k_total,
                      const ConstraintSet& constraints) {
    detail::validate_closures(c, constraints, c.size() - 2);
    detail::KSolve ks = detail::solve_k_raw(c, x, k_total, constraints);
    if (!ks.solved)
        throw DegenerateConstraintsError(
            "capital constraint system is singular; with equal organic compositions one of the "
            "duplicate branches must be the fixed one");
    if (!ks.feasible)
        throw InfeasibleAllocationError(
            "allocation assigns negative capital to branch " + c.branch_names[ks.bad_branch],
            ks.bad_branch);
    for (double& v : ks.k) v = std::max(v, 0.0);
    return ks.k;
}

// --- z-function --------------------------------------------------------------

/// Difference between total profit and total surplus value per unit of total
/// capital: z = sum_i k_i [x_i w_i - d_i - sum_j x_j u_ij - pl_i].
inline double z_function(const TechCoefficients& c, const Vector& x, const Vector& k) {
    const std::size_t n = c.size();
    double total = 0.0, z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double costs = 0.0;
        for (std::size_t j = 0; j < n; ++j) costs += x[j] * c.u[i][j];
        z += k[i] * (x[i] * c.w[i] - c.d[i] - costs - c.pl[i]);
        total += k[i];
    }
    return z / total;
}

// --- root search machinery ----------------------------------------------------

namespace detail {

struct Probe {
    bool valid = false;       // x solved and positive, k-system nonsingular
    bool feasible = false;    // additionally every K_i >= -1e-9 K_T
    bool degenerate = false;  // k-system singular at this point
    double at = 0.0;
    double z = 0.0;           // unnormalized: sum S - sum PL, m.u.
    double pl_total = 0.0;    // sum K_i pl_i, m.u.
    Vector x, k;
};

struct RootSearch {
    bool found = false;
    bool any_feasible = false;
    bool any_degenerate = false;
    Probe at_root;
};

/// Scans upward for the first sign change of z (top-down when
/// descending_only), then refines by secant interpolation with a bisection
/// safeguard until |z| <= 1e-12 sum PL and the bracket is tight. The
/// z-function is tracked straight through rates whose allocation is negative,
/// since feasibility windows can be narrower than the scan step, but a root
/// is only accepted where the allocation is nonnegative. Brackets that refuse
/// to converge (poles of z) are abandoned and the scan continues.
template <typename ProbeFn>
RootSearch scan_for_root(ProbeFn&& probe, double lo, double hi, double step, bool descending_only,
                         double width_abs, double width_rel, int refine_limit) {
    const auto z_tol = [](const Probe& p) { return 1e-12 * std::abs(p.pl_total); };
    RootSearch rs;
    bool have_prev = false;
    Probe prev;
    for (double v = lo; v <= hi + 0.5 * step; v += step) {
        Probe p = probe(v);
        rs.any_degenerate |= p.degenerate;
        rs.any_feasible |= p.feasible;
        if (!p.valid) {
            have_prev = false;
            continue;
        }
        if (p.z == 0.0 && p.feasible) {
            rs.found = true;
            rs.at_root = std::move(p);
            return rs;
        }
        const bool crossing = have_prev && (descending_only
                                                ? (prev.z > 0.0 && p.z < 0.0)
                                                : (prev.z > 0.0) != (p.z > 0.0));
        if (crossing) {
            Probe a = prev, b = p;  // invariant: sign(a.z) != sign(b.z), a.at < b.at
            Probe best = std::abs(a.z) < std::abs(b.z) ? a : b;
            for (int it = 0; it < refine_limit; ++it) {
                double cand = b.at - b.z * (b.at - a.at) / (b.z - a.z);
                const double guard = 1e-3 * (b.at - a.at);
                if (!(cand > a.at + guard && cand < b.at - guard)) cand = 0.5 * (a.at + b.at);
                Probe q = probe(cand);
                rs.any_degenerate |= q.degenerate;
                rs.any_feasible |= q.feasible;
                if (!q.valid) {
                    q = probe(0.5 * (a.at + b.at));
                    if (!q.valid) break;  // invalid pocket inside the bracket
                }
                if (q.z == 0.0 || std::abs(q.z) < std::abs(best.z)) best = q;
                if ((q.z > 0.0) == (a.z > 0.0))
                    a = std::move(q);
                else
                    b = std::move(q);
                const double width = b.at - a.at;
                if (width <= width_abs + width_rel * std::abs(b.at) &&
                    std::abs(best.z) <= z_tol(best))
                    break;
            }
            if (std::abs(best.z) <= z_tol(best) && best.feasible) {
                rs.found = true;
                rs.at_root = std::move(best);
                return rs;
            }
            // Either a pole of z or a root outside the feasible set: scan on.
        }
        have_prev = true;
        prev = std::move(p);
    }
    return rs;
}

/// Extended-precision evaluation of the probe at one rate. Double rounding in
/// the z accumulation is around 1e-12 m.u., which caps the attainable rate
/// precision when dz/dr is shallow; the reference figures carry 14 digits, so
/// the accepted root is polished with long-double arithmetic.
struct LongProbe {
    bool feasible = false;
    long double z = 0.0L;
    Vector x, k;
};

inline bool ld_gauss(std::size_t n, std::array<std::array<long double, 17>, 16>& a,
                     std::array<long double, 16>& out) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs((double)a[i][col]) > std::abs((double)a[piv][col])) piv = i;
        if (piv != col) std::swap(a[piv], a[col]);
        const long double p = a[col][col];
        if (p == 0.0L) return false;
        for (std::size_t i = col + 1; i < n; ++i) {
            const long double m = a[i][col] / p;
            for (std::size_t j = col; j <= n; ++j) a[i][j] -= m * a[col][j];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        long double s = a[ii][n];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a[ii][j] * out[j];
        if (a[ii][ii] == 0.0L) return false;
        out[ii] = s / a[ii][ii];
    }
    return true;
}

inline LongProbe probe_rate_ld(const TechCoefficients& c, double r, double k_total,
                               const ConstraintSet& constraints) {
    const std::size_t n = c.size();
    LongProbe p;
    std::array<std::array<long double, 17>, 16> m{};
    std::array<long double, 16> x{};
    for (std::size_t i = 0; i < n; ++i) {
        const long double ri = (long double)r + (long double)constraints.offset(i);
        const long double t = 1.0L + ri;
        for (std::size_t j = 0; j < n; ++j) m[i][j] = t * (long double)c.u[i][j];
        m[i][i] -= (long double)c.w[i];
        m[i][n] = -(long double)c.d[i] * (1.0L + (long double)c.n_cycles * ri);
    }
    if (!ld_gauss(n, m, x)) return p;
    for (std::size_t i = 0; i < n; ++i)
        if (!(x[i] > 0.0L)) return p;

    std::array<std::array<long double, 17>, 16> km{};
    std::array<long double, 16> k{};
    std::size_t row = 0;
    for (std::size_t j = 0; j < n; ++j) km[row][j] = 1.0L;
    km[row++][n] = (long double)k_total;
    for (std::size_t j = 0; j < n; ++j) km[row][j] = (long double)c.w[j] * (1.0L - x[j]);
    km[row++][n] = 0.0L;
    for (const auto& [branch, amount] : constraints.fixed_k) {
        km[row][branch] = 1.0L;
        km[row++][n] = (long double)amount;
    }
    for (const auto& rc : constraints.reproduction_constraints) {
        const std::size_t j = rc.commodity;
        const bool machine = c.machine_index && *c.machine_index == j;
        const bool wage = j == c.wage_index;
        const long double xj = rc.space == ConstraintSpace::price ? x[j] : 1.0L;
        for (std::size_t i = 0; i < n; ++i) {
            long double coef = (i == j ? xj * (long double)c.w[j] : 0.0L) -
                               xj * (long double)c.u[i][j];
            if (machine) coef -= (long double)c.d[i];
            if (wage) coef -= (long double)c.pl[i];
            km[row][i] = coef;
        }
        km[row++][n] = 0.0L;
    }
    if (!ld_gauss(n, km, k)) return p;
    // Negative allocations keep z evaluable; slope probes may sit just
    // outside a narrow feasibility window.
    long double z = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double costs = 0.0L;
        for (std::size_t j = 0; j < n; ++j) costs += x[j] * (long double)c.u[i][j];
        z += k[i] * (x[i] * (long double)c.w[i] - (long double)c.d[i] - costs -
                     (long double)c.pl[i]);
    }
    p.feasible = true;
    p.z = z;
    p.x.resize(n);
    p.k.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.x[i] = (double)x[i];
        p.k[i] = (double)std::max(k[i], 0.0L);
    }
    return p;
}

/// Newton polish of an accepted rate root using the long-double probe.
inline void polish_rate_root(const TechCoefficients& c, double k_total,
                             const ConstraintSet& constraints, double& r, Vector& x, Vector& k) {
    const double h = 1e-7;
    for (int it = 0; it < 4; ++it) {
        const LongProbe p0 = probe_rate_ld(c, r, k_total, constraints);
        const LongProbe pp = probe_rate_ld(c, r + h, k_total, constraints);
        const LongProbe pm = probe_rate_ld(c, std::max(0.0, r - h), k_total, constraints);
        if (!p0.feasible || !pp.feasible || !pm.feasible) return;
        const long double slope = (pp.z - pm.z) / ((long double)(r + h) - std::max(0.0, r - h));
        if (slope == 0.0L || !std::isfinite((double)slope)) return;
        const double step = (double)(-p0.z / slope);
        if (!std::isfinite(step) || std::abs(step) > 1e-4) return;
        x = p0.x;
        k = p0.k;
        r = std::max(0.0, r + step);
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(r))) break;
    }
    const LongProbe pf = probe_rate_ld(c, r, k_total, constraints);
    if (pf.feasible) {
        x = pf.x;
        k = pf.k;
    }
}

}  // namespace detail

// --- shared post-processing ----------------------------------------------------

namespace detail {

inline TransformationSolution finalize_solution(const TechCoefficients& c, const Vector& x,
                                                double r_ref, const ConstraintSet& constraints,
                                                const Vector& k,
                                                std::optional<ZeroFixedSolve> zf,
                                                std::vector<std::string> notes) {
    const std::size_t n = c.size();
    TransformationSolution s;
    s.coeffs = c;
    s.x = x;
    s.r_star = r_ref;
    s.r_per_branch.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.r_per_branch[i] = r_ref + constraints.offset(i);
    s.capital_value = k;
    s.value_table = table_from_coefficients(c, k);
    s.zero_fixed = std::move(zf);
    s.notes = std::move(notes);

    s.capital_price.resize(n);
    s.profit.resize(n);
    s.price_table.amortization.resize(n);
    s.price_table.inputs.assign(n, std::vector<double>(n, 0.0));
    s.price_table.profit.resize(n);
    s.price_table.production.resize(n);
    s.price_table.capital.resize(n);

    double sum_s = 0.0, sum_pl = 0.0, sum_w = 0.0, sum_wp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const EconomyTable& t = s.value_table;
        double priced_inputs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s.price_table.inputs[i][j] = x[j] * t.consumption[i][j];
            priced_inputs += x[j] * t.consumption[i][j];
        }
        const double w_i = t.production(i);
        const double wp_i = x[i] * w_i;
        s.capital_price[i] = t.fixed_capital[i] + priced_inputs;
        s.profit[i] = wp_i - t.amortization(i) - priced_inputs;
        s.price_table.amortization[i] = t.amortization(i);
        s.price_table.profit[i] = s.profit[i];
        s.price_table.production[i] = wp_i;
        s.price_table.capital[i] = s.capital_price[i];
        sum_s += s.profit[i];
        sum_pl += t.surplus_value(i);
        sum_w += w_i;
        sum_wp += wp_i;
    }
    s.residual_I = std::abs(sum_s - sum_pl);
    s.residual_II = std::abs(sum_wp - sum_w);
    s.z_at_solution = z_function(c, x, k);
    return s;
}

inline bool equal_organic_compositions(const TechCoefficients& c, double tol = 1e-12) {
    const std::size_t n = c.size();
    for (std::size_t i = 0; i < n; ++i)
        if (!(c.v(i) > 0.0)) return false;
    const double co0 = c.organic_composition(0);
    const double e0 = c.e_rates[0];
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(c.organic_composition(i) - co0) > tol * (1.0 + std::abs(co0))) return false;
        if (std::abs(c.e_rates[i] - e0) > tol * (1.0 + std::abs(e0))) return false;
    }
    return true;
}

}  // namespace detail

/// Unique allocation of the simple-reproduction demand system: production of
/// every commodity equals its consumption (amortization demand for the
/// machine commodity, wages plus surplus for the wage commodity), the wage
/// commodity's equation dropped as the dependent one, plus conservation of
/// the total capital. Net production w - d is used when fixed capital is
/// imported. Solved at x = 1, which is where these equalities close the
/// system (no surplus, or all organic compositions equal).
inline Vector simple_reproduction_allocation(const TechCoefficients& c, double k_total) {
    const std::size_t n = c.size();
    DenseMatrix m(n);
    Vector rhs(n, 0.0);
    std::size_t row = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == c.wage_index) continue;
        const bool machine = c.machine_index && *c.machine_index == j;
        for (std::size_t i = 0; i < n; ++i) {
            double coef;
            if (machine)
                coef = (i == j ? c.w[j] : 0.0) - c.d[i];
            else if (c.machine_index)
                coef = (i == j ? c.w[j] : 0.0) - c.u[i][j];
            else
                coef = (i == j ? c.w[j] - c.d[j] : 0.0) - c.u[i][j];
            m.at(row, i) = coef;
        }
        rhs[row++] = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) m.at(row, j) = 1.0;
    rhs[row] = k_total;

    Vector k;
    try {
        k = solve_linear(m, rhs);
    } catch (const SingularSystemError& e) {
        throw DegenerateConstraintsError(
            std::string("demand system has no unique allocation: ") + e.what());
    }
    for (std::size_t i = 0; i < n; ++i)
        if (k[i] < -1e-9 * k_total)
            throw InfeasibleAllocationError(
                "demand system assigns negative capital to branch " + c.branch_names[i], i);
    for (double& v : k) v = std::max(v, 0.0);
    return k;
}

/// No-surplus case (all e_i = 0): x = 1 and the unique demand-equality
/// allocation. For two branches the closed form k1 = c2/(v1+c2) is checked
/// against the linear solve.
inline TransformationSolution solve_no_surplus(const TechCoefficients& c, double k_total) {
    if (!c.no_surplus())
        throw StructuralError("solve_no_surplus requires zero surplus value in every branch");
    const std::size_t n = c.size();
    const Vector k = simple_reproduction_allocation(c, k_total);
    if (n == 2) {
        std::size_t raw = c.wage_index == 0 ? 1 : 0;  // the non-wage branch
        const double c2 = c.u[c.wage_index][raw];
        const double v1 = c.u[raw][c.wage_index];
        const double closed = c2 / (v1 + c2);
        if (std::abs(k[raw] / k_total - closed) > 1e-12)
            throw ConvergenceError("two-branch closed form disagrees with the demand solve",
                                   k[raw] / k_total);
    }
    Vector ones(n, 1.0);
    return detail::finalize_solution(c, ones, 0.0, {}, k, std::nullopt, {});
}

namespace detail {

/// Equal organic compositions at a uniform exploitation rate: prices equal
/// values, the uniform rate equals the (uniform) pl coefficient, and the
/// allocation is pinned by simple reproduction.
inline TransformationSolution solve_equal_compositions(const TechCoefficients& c, double k_total,
                                                       const ConstraintSet& constraints) {
    const std::size_t n = c.size();
    const Vector k = simple_reproduction_allocation(c, k_total);
    for (const auto& [branch, amount] : constraints.fixed_k)
        if (std::abs(k[branch] - amount) > 1e-9 * k_total)
            throw DegenerateConstraintsError(
                "equal organic compositions force a unique allocation; the fixed capital of "
                "branch " +
                c.branch_names[branch] + " conflicts with it");
    Vector ones(n, 1.0);
    TransformationSolution s =
        finalize_solution(c, ones, c.pl[0], constraints, k, std::nullopt,
                          {"equal organic compositions: prices equal values"});
    return s;
}

/// Uniform profit per unit of committed capital (pl_i all equal) makes
/// x = 1 an exact solution at r = pl, and the z-function vanishes for every
/// allocation: fundamental equality II no longer closes the system. Such
/// tables are the transformation's neutral elements; they need N - 1 closure
/// constraints instead of N - 2.
inline bool uniform_pl(const TechCoefficients& c, double tol = 1e-12) {
    const double p0 = c.pl[0];
    for (double p : c.pl)
        if (std::abs(p - p0) > tol * (1.0 + std::abs(p0))) return false;
    return p0 > 0.0;
}

inline TransformationSolution solve_uniform_pl(const TechCoefficients& c, double k_total,
                                               const ConstraintSet& constraints) {
    const std::size_t n = c.size();
    validate_closures(c, constraints, n - 1);
    DenseMatrix m(n);
    Vector rhs(n, 0.0);
    Vector ones(n, 1.0);
    std::size_t row = 0;
    for (std::size_t j = 0; j < n; ++j) m.at(row, j) = 1.0;
    rhs[row++] = k_total;
    for (const auto& [branch, amount] : constraints.fixed_k) {
        m.at(row, branch) = 1.0;
        rhs[row++] = amount;
    }
    for (const auto& rc : constraints.reproduction_constraints) {
        const Vector r = reproduction_row(c, rc, ones);
        for (std::size_t j = 0; j < n; ++j) m.at(row, j) = r[j];
        rhs[row++] = 0.0;
    }
    Vector k;
    try {
        k = solve_linear(m, rhs);
    } catch (const SingularSystemError&) {
        throw DegenerateConstraintsError("closure of the neutral system is singular");
    }
    for (std::size_t i = 0; i < n; ++i)
        if (k[i] < -1e-9 * k_total)
            throw InfeasibleAllocationError(
                "allocation assigns negative capital to branch " + c.branch_names[i], i);
    for (double& v : k) v = std::max(v, 0.0);
    return finalize_solution(c, ones, c.pl[0], constraints, k, std::nullopt,
                             {"transformation-neutral table: prices equal values and every "
                              "allocation satisfies both equalities"});
}

}  // namespace detail

// --- the general fixed-capital path ----------------------------------------------

/// Locates the reference rate r* as the first top-down zero of the z-function:
/// scans r from 0 upward, solves x(r) then K(x) at each step, brackets the
/// first + to - crossing, refines by secant with bisection fallback, and
/// verifies dz/dr < 0 by central difference. Infeasible rates are skipped.
inline TransformationSolution find_r_star(const TechCoefficients& c, double k_total,
                                          const ConstraintSet& constraints,
                                          const SolveOptions& opt = {}) {
    if (detail::equal_organic_compositions(c) && constraints.uniform())
        return detail::solve_equal_compositions(c, k_total, constraints);
    if (detail::uniform_pl(c) && constraints.uniform())
        return detail::solve_uniform_pl(c, k_total, constraints);
    detail::validate_closures(c, constraints, c.size() - 2);

    std::vector<std::string> notes;
    auto run = [&](const ConstraintSet& cs) {
        auto probe = [&](double r) {
            detail::Probe p;
            p.at = r;
            auto [m, rhs] = assemble_price_system(c, r, cs);
            try {
                p.x = solve_linear(m, rhs);
                detail::require_positive_x(p.x, c);
            } catch (const SingularSystemError&) {
                return p;
            } catch (const InfeasibleAllocationError&) {
                return p;
            }
            detail::KSolve ks = detail::solve_k_raw(c, p.x, k_total, cs);
            if (!ks.solved) {
                p.degenerate = true;
                return p;
            }
            p.valid = true;
            p.feasible = ks.feasible;
            p.k = std::move(ks.k);
            for (std::size_t i = 0; i < c.size(); ++i) p.pl_total += p.k[i] * c.pl[i];
            p.z = z_function(c, p.x, p.k) * k_total;
            return p;
        };

        double lo = 0.0;
        bool any_feasible = false;
        bool any_degenerate = false;
        while (lo <= opt.rate_max) {
            detail::RootSearch rs = detail::scan_for_root(probe, lo, opt.rate_max, opt.rate_step,
                                                          /*descending_only=*/true, 1e-13, 0.0,
                                                          opt.refine_limit);
            any_feasible |= rs.any_feasible;
            any_degenerate |= rs.any_degenerate;
            if (!rs.found) {
                rs.any_feasible = any_feasible;
                rs.any_degenerate = any_degenerate;
                return std::make_pair(rs, false);
            }
            // dz/dr < 0 at the root, by central difference.
            const double h = 1e-7;
            const detail::Probe pm = probe(std::max(0.0, rs.at_root.at - h));
            const detail::Probe pp = probe(rs.at_root.at + h);
            double slope = -1.0;
            if (pm.valid && pp.valid) slope = (pp.z - pm.z) / (pp.at - pm.at);
            if (slope < 0.0) {
                rs.any_feasible = any_feasible;
                rs.any_degenerate = any_degenerate;
                return std::make_pair(rs, true);
            }
            lo = rs.at_root.at + opt.rate_step;  // rising crossing: not r*, keep looking
        }
        detail::RootSearch none;
        none.any_feasible = any_feasible;
        none.any_degenerate = any_degenerate;
        return std::make_pair(none, false);
    };

    auto [rs, ok] = run(constraints);
    ConstraintSet used = constraints;
    if (!ok && rs.any_degenerate && !rs.any_feasible && !constraints.fixed_k.empty()) {
        // Branches of equal organic composition can make the chosen closure
        // singular; refix one of the other branches at the same amount.
        const auto first = *constraints.fixed_k.begin();
        for (std::size_t b = 0; b < c.size(); ++b) {
            if (constraints.fixed_k.count(b)) continue;
            ConstraintSet alt = constraints;
            alt.fixed_k.erase(first.first);
            alt.fixed_k.emplace(b, first.second);
            auto [rs2, ok2] = run(alt);
            if (ok2) {
                rs = std::move(rs2);
                ok = true;
                used = std::move(alt);
                notes.push_back("fixed capital moved from branch " +
                                c.branch_names[first.first] + " to branch " + c.branch_names[b] +
                                " to avoid a singular constraint system");
                break;
            }
        }
    }
    if (!ok) {
        if (!rs.any_feasible)
            throw FixedCapitalChoiceError(
                "no scanned rate admits a nonnegative allocation; choose a different fixed "
                "capital");
        throw NoRootError(
            "the z function never crosses the ordinate axis with a negative derivative for r in "
            "[0, " +
            std::to_string(opt.rate_max) + "]");
    }
    double r = rs.at_root.at;
    Vector x = rs.at_root.x;
    Vector k = rs.at_root.k;
    detail::polish_rate_root(c, k_total, used, r, x, k);
    return detail::finalize_solution(c, x, r, used, k, std::nullopt, std::move(notes));
}

// --- the zero-fixed-capital path ----------------------------------------------------

/// All F_i = 0. Uniform rates: the rate comes from the dominant eigenpair of
/// A[i][j] = u_ij / w_i and only the modulus q of x = q x_u remains to be
/// found from fundamental equality I (the K-update loop over q). Non-uniform
/// rates: the reference rate is located by a determinant-zero scan of the
/// homogeneous price system, then the same q search applies.
inline TransformationSolution solve_zero_fixed(const TechCoefficients& c, double k_total,
                                               const ConstraintSet& constraints,
                                               const SolveOptions& opt = {}) {
    if (!c.zero_fixed())
        throw StructuralError("solve_zero_fixed requires zero fixed capital in every branch");
    if (detail::equal_organic_compositions(c) && constraints.uniform())
        return detail::solve_equal_compositions(c, k_total, constraints);
    if (detail::uniform_pl(c) && constraints.uniform())
        return detail::solve_uniform_pl(c, k_total, constraints);
    detail::validate_closures(c, constraints, c.size() - 2);

    const std::size_t n = c.size();
    double rate = 0.0;
    Vector direction;  // unit direction of x
    int eigen_iterations = 0;
    std::vector<std::string> notes;

    if (constraints.uniform()) {
        DenseMatrix a(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a.at(i, j) = c.u[i][j] / c.w[i];
        const Eigenpair ep = dominant_eigenpair(a);
        rate = 1.0 / ep.value - 1.0;
        direction = ep.vector;
        eigen_iterations = ep.iterations;
    } else {
        // det(price system) = 0 locates the admissible reference rate.
        auto det_at = [&](double r) {
            auto [m, rhs] = assemble_price_system(c, r, constraints);
            (void)rhs;
            return determinant(m);
        };
        double prev_r = 0.0, prev_det = det_at(0.0);
        bool bracketed = false;
        for (double r = opt.rate_step; r <= opt.rate_max; r += opt.rate_step) {
            const double det = det_at(r);
            if (det == 0.0 || (det > 0.0) != (prev_det > 0.0)) {
                double a = prev_r, fa = prev_det, b = r, fb = det;
                for (int it = 0; it < opt.refine_limit && b - a > 1e-15 * (1.0 + b); ++it) {
                    double cand = fb != fa ? b - fb * (b - a) / (fb - fa) : 0.5 * (a + b);
                    if (!(cand > a && cand < b)) cand = 0.5 * (a + b);
                    const double fc = det_at(cand);
                    if ((fc > 0.0) == (fa > 0.0)) {
                        a = cand;
                        fa = fc;
                    } else {
                        b = cand;
                        fb = fc;
                    }
                }
                rate = 0.5 * (a + b);
                bracketed = true;
                break;
            }
            prev_r = r;
            prev_det = det;
        }
        if (!bracketed)
            throw NoRootError("no reference rate makes the homogeneous price system singular");
        auto [m, rhs] = assemble_price_system(c, rate, constraints);
        (void)rhs;
        direction = nullspace_vector(m);
        for (double v : direction)
            if (!(v > 0.0))
                throw EigenDomainError("price direction of the singular system is not positive");
        notes.push_back("non-uniform rates with zero fixed capital: reference rate located by "
                        "a determinant-zero scan of the homogeneous price system");
    }

    auto probe = [&](double q) {
        detail::Probe p;
        p.at = q;
        Vector x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = q * direction[i];
        detail::KSolve ks = detail::solve_k_raw(c, x, k_total, constraints);
        if (!ks.solved) {
            p.degenerate = true;
            return p;
        }
        p.valid = true;
        p.feasible = ks.feasible;
        p.x = std::move(x);
        p.k = std::move(ks.k);
        for (std::size_t i = 0; i < n; ++i) p.pl_total += p.k[i] * c.pl[i];
        p.z = z_function(c, p.x, p.k) * k_total;
        return p;
    };

    const double q_scale = std::sqrt(static_cast<double>(n));
    const double q_step = opt.rate_step * q_scale;
    detail::RootSearch rs = detail::scan_for_root(probe, q_step, 20.0 * q_scale, q_step,
                                                  /*descending_only=*/true, 0.0, 1e-14,
                                                  opt.refine_limit);
    if (!rs.found)  // tolerate an ascending crossing before giving up
        rs = detail::scan_for_root(probe, q_step, 20.0 * q_scale, q_step,
                                   /*descending_only=*/false, 0.0, 1e-14, opt.refine_limit);
    if (!rs.found) {
        if (!rs.any_feasible)
            throw FixedCapitalChoiceError(
                "no modulus q admits a nonnegative allocation; choose a different fixed capital");
        throw NoRootError("the z function has no zero in the scanned modulus range");
    }

    ZeroFixedSolve zf;
    zf.eigen_rate = rate;
    zf.unit_vector = direction;
    zf.q_star = rs.at_root.at;
    zf.iterations = eigen_iterations;
    return detail::finalize_solution(c, rs.at_root.x, rate, constraints, rs.at_root.k, zf,
                                     std::move(notes));
}

// --- dispatch -------------------------------------------------------------------

/// Routes a table to the right path: no surplus anywhere -> unique demand
/// allocation; all fixed capital zero -> eigenvalue path; otherwise the
/// z-function scan over the rate.
inline TransformationSolution solve(const EconomyTable& t, const ConstraintSet& constraints = {},
                                    const SolveOptions& opt = {}) {
    const TechCoefficients c = derive_coefficients(t);
    const double k_total = t.capital_target();
    if (c.no_surplus()) {
        if (!constraints.fixed_k.empty() || !constraints.reproduction_constraints.empty())
            throw DegenerateConstraintsError(
                "the no-surplus allocation is unique; remove closure constraints");
        return solve_no_surplus(c, k_total);
    }
    if (c.zero_fixed()) return solve_zero_fixed(c, k_total, constraints, opt);
    return find_r_star(c, k_total, constraints, opt);
}

}  // namespace valforme

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "valforme/dynamics.hpp"
#include "valforme/economy.hpp"
#include "valforme/errors.hpp"
#include "valforme/solver.hpp"

namespace valforme {

using nlohmann::json;

/// Malformed input file (bad JSON, missing keys, unknown names).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// --- number rendering -----------------------------------------------------------

/// Locale-independent rendering with a fixed number of significant digits;
/// '.' decimal separator, no grouping, deterministic across runs.
inline std::string format_sig(double v, int digits) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    return std::string(buf, res.ptr);
}

inline int rendered_digits() {
    if (const char* env = std::getenv("VALFORME_PRECISION")) {
        const int d = std::atoi(env);
        if (d >= 6 && d <= 17) return d;
    }
    return 12;
}

// --- economy-table schema ----------------------------------------------------------

inline std::size_t branch_index(const std::vector<std::string>& names, const std::string& name,
                                const std::string& what) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    throw InputError(what + " names unknown commodity '" + name + "'");
}

inline EconomyTable economy_from_json(const json& j) {
    if (!j.is_object() || !j.contains("branches") || !j["branches"].is_array())
        throw InputError("economy table needs a 'branches' array");
    EconomyTable t;
    for (const auto& b : j["branches"]) {
        if (!b.contains("name")) throw InputError("every branch needs a 'name'");
        t.branch_names.push_back(b["name"].get<std::string>());
        t.roles.push_back(b.value("role", std::string{}));
    }
    const std::size_t n = t.branch_names.size();
    t.n_cycles = j.value("n_cycles", 1);
    if (!j.contains("wage_commodity")) throw InputError("economy table needs 'wage_commodity'");
    t.wage_index = branch_index(t.branch_names, j["wage_commodity"].get<std::string>(),
                                "wage_commodity");
    if (j.contains("machine_commodity") && !j["machine_commodity"].is_null())
        t.machine_index = branch_index(t.branch_names, j["machine_commodity"].get<std::string>(),
                                       "machine_commodity");
    if (j.contains("K_total") && !j["K_total"].is_null()) t.k_total = j["K_total"].get<double>();

    t.fixed_capital.assign(n, 0.0);
    t.consumption.assign(n, std::vector<double>(n, 0.0));
    t.e_rates.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& b = j["branches"][i];
        t.fixed_capital[i] = b.value("F", 0.0);
        t.e_rates[i] = b.value("e_rate", 0.0);
        if (b.contains("inputs")) {
            if (!b["inputs"].is_object()) throw InputError("'inputs' must map commodity to amount");
            for (const auto& [commodity, amount] : b["inputs"].items()) {
                const std::size_t jx = branch_index(t.branch_names, commodity,
                                                    "branch " + t.branch_names[i]);
                t.consumption[i][jx] = amount.get<double>();
            }
        }
    }
    validate(t);
    return t;
}

inline json economy_to_json(const EconomyTable& t) {
    json branches = json::array();
    for (std::size_t i = 0; i < t.size(); ++i) {
        json inputs = json::object();
        for (std::size_t j = 0; j < t.size(); ++j)
            if (t.consumption[i][j] != 0.0) inputs[t.branch_names[j]] = t.consumption[i][j];
        json b{{"name", t.branch_names[i]},
               {"F", t.fixed_capital[i]},
               {"inputs", inputs},
               {"e_rate", t.e_rates[i]}};
        if (i < t.roles.size() && !t.roles[i].empty()) b["role"] = t.roles[i];
        branches.push_back(std::move(b));
    }
    json j{{"branches", std::move(branches)},
           {"n_cycles", t.n_cycles},
           {"wage_commodity", t.branch_names[t.wage_index]}};
    if (t.machine_index) j["machine_commodity"] = t.branch_names[*t.machine_index];
    if (t.k_total) j["K_total"] = *t.k_total;
    return j;
}

/// Parses a JSON file, translating parse failures into line/column
/// diagnostics.
inline json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InputError(path + ":" + std::to_string(line) + ":" + std::to_string(col) +
                         ": malformed JSON: " + e.what());
    }
}

// --- solution report ------------------------------------------------------------------

struct SolutionReport {
    EconomyTable input;
    TransformationSolution solution;
    DemandReport demand;
    std::optional<Vector> next_period_fixed;  // x_machine * F_i per branch
};

inline SolutionReport build_report(const EconomyTable& input, TransformationSolution solution) {
    SolutionReport rep;
    rep.input = input;
    rep.demand = check_demand(solution.value_table, &solution.x);
    if (input.machine_index) {
        Vector repriced(solution.size());
        for (std::size_t i = 0; i < solution.size(); ++i)
            repriced[i] = solution.x[*input.machine_index] * solution.value_table.fixed_capital[i];
        rep.next_period_fixed = std::move(repriced);
    }
    rep.solution = std::move(solution);
    return rep;
}

inline json report_to_json(const SolutionReport& rep) {
    const TransformationSolution& s = rep.solution;
    const std::size_t n = s.size();
    json branches = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        json row{{"name", s.coeffs.branch_names[i]},
                 {"x", s.x[i]},
                 {"r", s.r_per_branch[i]},
                 {"K", s.capital_value[i]},
                 {"Kp", s.capital_price[i]},
                 {"S", s.profit[i]},
                 {"PL", s.value_table.surplus_value(i)},
                 {"W", s.value_table.production(i)},
                 {"W_price", s.price_table.production[i]}};
        branches.push_back(std::move(row));
    }
    json demand = json::array();
    for (const auto& e : rep.demand.entries) {
        json d{{"commodity", e.commodity},
               {"value_surplus", e.value_surplus},
               {"stock_dependent", e.stock_dependent}};
        if (e.price_surplus) d["price_surplus"] = *e.price_surplus;
        demand.push_back(std::move(d));
    }
    json value_rows = json::array(), price_rows = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        value_rows.push_back(json{{"F_over_n", s.value_table.amortization(i)},
                                  {"inputs", s.value_table.consumption[i]},
                                  {"PL", s.value_table.surplus_value(i)},
                                  {"W", s.value_table.production(i)},
                                  {"K", s.capital_value[i]}});
        price_rows.push_back(json{{"F_over_n", s.price_table.amortization[i]},
                                  {"inputs", s.price_table.inputs[i]},
                                  {"S", s.price_table.profit[i]},
                                  {"W", s.price_table.production[i]},
                                  {"Kp", s.price_table.capital[i]}});
    }
    json out{{"input", economy_to_json(rep.input)},
             {"branches", std::move(branches)},
             {"value_table", std::move(value_rows)},
             {"price_table", std::move(price_rows)},
             {"r_star", s.r_star},
             {"residual_I", s.residual_I},
             {"residual_II", s.residual_II},
             {"z", s.z_at_solution},
             {"demand", std::move(demand)},
             {"notes", s.notes}};
    if (rep.next_period_fixed) out["next_period_fixed_capital"] = *rep.next_period_fixed;
    if (s.zero_fixed)
        out["zero_fixed"] = json{{"eigen_rate", s.zero_fixed->eigen_rate},
                                 {"unit_vector", s.zero_fixed->unit_vector},
                                 {"q_star", s.zero_fixed->q_star}};
    return out;
}

namespace detail {

inline void render_row(std::ostringstream& os, const std::string& head,
                       const std::vector<std::string>& cells, std::size_t width) {
    os << head;
    for (std::size_t i = head.size(); i < 14; ++i) os << ' ';
    for (const auto& c : cells) {
        os << ' ' << c;
        for (std::size_t i = c.size(); i < width; ++i) os << ' ';
    }
    os << '\n';
}

}  // namespace detail

/// Human-readable report mirroring the classic table layout: a VALUES
/// table, a PRICES table and the per-branch (K, Kp, x, r) summary.
inline std::string render_report(const SolutionReport& rep, int digits = rendered_digits()) {
    const TransformationSolution& s = rep.solution;
    const std::size_t n = s.size();
    const std::size_t width = digits + 7;
    std::ostringstream os;
    const auto fmt = [&](double v) { return format_sig(v, digits); };

    const auto table = [&](const std::string& title, bool price) {
        os << title << '\n';
        std::vector<std::string> heads{"F/n"};
        for (std::size_t j = 0; j < n; ++j) heads.push_back(s.coeffs.branch_names[j]);
        heads.push_back(price ? "S" : "PL");
        heads.push_back("W");
        heads.push_back(price ? "Kp" : "K");
        detail::render_row(os, "", heads, width);
        Vector totals(n + 4, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::string> cells;
            const double amort = price ? s.price_table.amortization[i]
                                       : s.value_table.amortization(i);
            cells.push_back(fmt(amort));
            totals[0] += amort;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = price ? s.price_table.inputs[i][j]
                                       : s.value_table.consumption[i][j];
                cells.push_back(fmt(v));
                totals[1 + j] += v;
            }
            const double extra = price ? s.price_table.profit[i]
                                       : s.value_table.surplus_value(i);
            const double prod = price ? s.price_table.production[i] : s.value_table.production(i);
            const double cap = price ? s.price_table.capital[i] : s.capital_value[i];
            cells.push_back(fmt(extra));
            cells.push_back(fmt(prod));
            cells.push_back(fmt(cap));
            totals[n + 1] += extra;
            totals[n + 2] += prod;
            totals[n + 3] += cap;
            detail::render_row(os, "BRANCH " + s.coeffs.branch_names[i], cells, width);
        }
        std::vector<std::string> tcells;
        for (double v : totals) tcells.push_back(fmt(v));
        detail::render_row(os, "TOTAL", tcells, width);
        os << '\n';
    };
    table("VALUES", false);
    table("PRICES", true);

    os << "SOLUTION\n";
    detail::render_row(os, "", {"K", "Kp", "x_i", "r_i"}, width);
    for (std::size_t i = 0; i < n; ++i)
        detail::render_row(os, "BRANCH " + s.coeffs.branch_names[i],
                           {fmt(s.capital_value[i]), fmt(s.capital_price[i]), fmt(s.x[i]),
                            fmt(s.r_per_branch[i])},
                           width);
    os << "r* = " << fmt(s.r_star) << "\n";
    if (s.zero_fixed)
        os << "eigen rate = " << fmt(s.zero_fixed->eigen_rate)
           << ", q* = " << fmt(s.zero_fixed->q_star) << "\n";
    os << "residual I (|sum S - sum PL|) = " << fmt(s.residual_I)
       << "\nresidual II (|sum xW - sum W|) = " << fmt(s.residual_II) << "\n";

    os << "\nDEMAND SURPLUS (production - consumption)\n";
    for (const auto& e : rep.demand.entries) {
        os << "  " << e.commodity << ": value " << fmt(e.value_surplus);
        if (e.price_surplus) os << ", price " << fmt(*e.price_surplus);
        if (e.stock_dependent) os << "  [needs stocks]";
        os << '\n';
    }
    if (rep.next_period_fixed) {
        os << "\nNEXT-PERIOD FIXED CAPITAL (x_machine * F_i)\n";
        for (std::size_t i = 0; i < n; ++i)
            os << "  " << s.coeffs.branch_names[i] << ": " << fmt((*rep.next_period_fixed)[i])
               << '\n';
    }
    for (const auto& note : s.notes) os << "note: " << note << '\n';
    return os.str();
}

// --- report validation -----------------------------------------------------------------

/// Re-checks every invariant of a stored report; returns the names of the
/// failed checks, empty when the report is sound.
inline std::vector<std::string> validate_report(const json& j) {
    std::vector<std::string> failures;
    const auto fail = [&](const std::string& name) { failures.push_back(name); };
    try {
        const EconomyTable input = economy_from_json(j.at("input"));
        const std::size_t n = input.size();
        const auto& branches = j.at("branches");
        if (branches.size() != n) {
            fail("branch_count");
            return failures;
        }
        Vector x(n), r(n), k(n), kp(n), s(n), pl(n), w(n), wp(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& b = branches[i];
            x[i] = b.at("x");
            r[i] = b.at("r");
            k[i] = b.at("K");
            kp[i] = b.at("Kp");
            s[i] = b.at("S");
            pl[i] = b.at("PL");
            w[i] = b.at("W");
            wp[i] = b.at("W_price");
        }
        double sum_s = 0.0, sum_pl = 0.0, sum_w = 0.0, sum_wp = 0.0, k_total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum_s += s[i];
            sum_pl += pl[i];
            sum_w += w[i];
            sum_wp += wp[i];
            k_total += k[i];
        }
        const double tol_I =
            sum_pl > 0.0 ? 1e-9 * sum_pl : 1e-12 * std::max(1.0, k_total);
        if (std::abs(sum_s - sum_pl) > tol_I) fail("residual_I");
        if (std::abs(sum_wp - sum_w) > 1e-9 * sum_w) fail("residual_II");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(x[i] > 0.0)) {
                fail("x_positive");
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (k[i] < -1e-9 * k_total) {
                fail("k_nonnegative");
                break;
            }
        }
        // Kp_i = F_i + sum_j x_j U_ij and S_i = r_i Kp_i, on the reallocated table.
        const TechCoefficients c = derive_coefficients(input);
        const EconomyTable realloc = table_from_coefficients(c, k);
        bool kp_ok = true, s_ok = true, w_ok = true, wp_ok = true;
        for (std::size_t i = 0; i < n; ++i) {
            double priced = 0.0;
            for (std::size_t jx = 0; jx < n; ++jx) priced += x[jx] * realloc.consumption[i][jx];
            const double kp_ref = realloc.fixed_capital[i] + priced;
            if (std::abs(kp[i] - kp_ref) > 1e-9 * std::max(1.0, kp_ref)) kp_ok = false;
            if (std::abs(s[i] - r[i] * kp[i]) > 1e-9 * std::max(1.0, std::abs(s[i]))) s_ok = false;
            if (std::abs(w[i] - realloc.production(i)) > 1e-9 * std::max(1.0, w[i])) w_ok = false;
            if (std::abs(wp[i] - x[i] * w[i]) > 1e-9 * std::max(1.0, std::abs(wp[i]))) wp_ok = false;
        }
        if (!kp_ok) fail("capital_price");
        if (!s_ok) fail("profit_consistency");
        if (!w_ok) fail("value_table");
        if (!wp_ok) fail("production_price");
        if (j.contains("residual_I") && std::abs(j["residual_I"].get<double>()) > tol_I)
            fail("stored_residual_I");
        if (j.contains("residual_II") &&
            std::abs(j["residual_II"].get<double>()) > 1e-9 * sum_w)
            fail("stored_residual_II");
    } catch (const std::exception& e) {
        failures.push_back(std::string("report_shape: ") + e.what());
    }
    return failures;
}

// --- scenario & okishio schemas -----------------------------------------------------------

inline ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig cfg;
    cfg.base = economy_from_json(j.at("table"));
    cfg.initial_delta_r = j.value("initial_delta_r", 0.0);
    cfg.delta_r_decrement = j.value("delta_r_decrement", 0.0);
    cfg.decrement_branch = branch_index(cfg.base.branch_names,
                                        j.at("decrement_branch").get<std::string>(),
                                        "decrement_branch");
    cfg.initial_capital = j.at("initial_capital").get<double>();
    cfg.capital_decrement = j.value("capital_decrement", 0.0);
    cfg.iterations = j.at("iterations").get<int>();
    cfg.offsets_pattern.assign(cfg.base.size(), 0.0);
    if (j.contains("offsets_pattern"))
        for (const auto& [name, mult] : j["offsets_pattern"].items())
            cfg.offsets_pattern[branch_index(cfg.base.branch_names, name, "offsets_pattern")] =
                mult.get<double>();
    if (j.contains("reference_branch"))
        cfg.reference_branch = branch_index(cfg.base.branch_names,
                                            j["reference_branch"].get<std::string>(),
                                            "reference_branch");
    return cfg;
}

struct OkishioConfig {
    EconomyTable base;
    OkishioPerturbation perturbation;
    std::map<std::size_t, double> freeze;
};

inline OkishioConfig okishio_from_json(const json& j) {
    OkishioConfig cfg;
    cfg.base = economy_from_json(j.at("table"));
    const auto& p = j.at("perturbation");
    cfg.perturbation.branch =
        branch_index(cfg.base.branch_names, p.at("branch").get<std::string>(), "perturbation");
    cfg.perturbation.new_f = p.at("f").get<double>();
    cfg.perturbation.new_v = p.at("v").get<double>();
    for (const auto& [name, amount] : j.at("freeze").items())
        cfg.freeze[branch_index(cfg.base.branch_names, name, "freeze")] = amount.get<double>();
    return cfg;
}

// --- CSV ------------------------------------------------------------------------------

/// Trajectory CSV, one row per iteration. Column order is part of the
/// interface: iteration, K_1..K_N, r_1..r_N, r_avg, sum_S, sum_PL, co_value,
/// co_price, costs_price, dS1_dK1, S1_over_K1.
inline std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    const std::size_t n = traj.branch_count;
    os << "iteration";
    for (std::size_t i = 1; i <= n; ++i) os << ",K_" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",r_" << i;
    os << ",r_avg,sum_S,sum_PL,co_value,co_price,costs_price,dS1_dK1,S1_over_K1\n";
    for (const auto& rec : traj.records) {
        os << rec.iteration;
        for (double v : rec.capital) os << ',' << format_sig(v, 17);
        for (double v : rec.rates) os << ',' << format_sig(v, 17);
        os << ',' << format_sig(rec.rate_avg, 17) << ',' << format_sig(rec.total_profit, 17) << ','
           << format_sig(rec.total_surplus, 17) << ',' << format_sig(rec.co_value, 17) << ','
           << format_sig(rec.co_price, 17) << ',' << format_sig(rec.costs_price, 17) << ','
           << format_sig(rec.dS1_dK1, 17) << ',' << format_sig(rec.S1_over_K1, 17) << '\n';
    }
    return os.str();
}

struct SweepRow {
    double fixed_value = 0.0;
    Vector capital;
    double r_star = 0.0;
    Vector x;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // ascending in the swept value
    std::vector<std::string> skipped;
};

/// Solves the table once per fixed value of one branch's capital over
/// [from, to] in steps. Infeasible points are recorded and skipped.
inline SweepResult run_sweep(const EconomyTable& table, std::size_t branch, double from,
                             double to, double step, const ConstraintSet& extra = {},
                             const SolveOptions& opt = {}) {
    if (!(step > 0.0) || to < from) throw InputError("sweep range is empty");
    SweepResult result;
    for (double v = from; v <= to + 0.5 * step; v += step) {
        ConstraintSet cs = extra;
        cs.fixed_k[branch] = v;
        try {
            const TransformationSolution s = solve(table, cs, opt);
            result.rows.push_back({v, s.capital_value, s.r_star, s.x});
        } catch (const std::exception& e) {
            result.skipped.push_back(format_sig(v, 12) + ": " + e.what());
        }
    }
    return result;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows, std::size_t n) {
    std::ostringstream os;
    os << "fixed_K";
    for (std::size_t i = 1; i <= n; ++i) os << ",K_" << i;
    os << ",r_star";
    for (std::size_t i = 1; i <= n; ++i) os << ",x_" << i;
    os << '\n';
    for (const auto& row : rows) {
        os << format_sig(row.fixed_value, 17);
        for (double v : row.capital) os << ',' << format_sig(v, 17);
        os << ',' << format_sig(row.r_star, 17);
        for (double v : row.x) os << ',' << format_sig(v, 17);
        os << '\n';
    }
    return os.str();
}

}  // namespace valforme

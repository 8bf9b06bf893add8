#pragma once

// Economy tables used across the test suites. Figures are the reference
// absolute tables; coefficients derived from them drive every solve.

#include <optional>

#include "valforme/economy.hpp"

namespace fixtures {

using valforme::EconomyTable;

// Two-branch economy, K_T = 715, n = 5, e = 2/3.
inline EconomyTable table2A() {
    EconomyTable t;
    t.branch_names = {"C", "V"};
    t.wage_index = 1;
    t.n_cycles = 5;
    t.fixed_capital = {125.0, 100.0};
    t.consumption = {{200.0, 90.0}, {80.0, 120.0}};
    t.e_rates = {2.0 / 3.0, 2.0 / 3.0};
    t.k_total = 715.0;
    return t;
}

// Same technique with zero surplus value.
inline EconomyTable table2E() {
    EconomyTable t = table2A();
    t.e_rates = {0.0, 0.0};
    return t;
}

// Three-branch economy of Table 3A, K_T = 1000, n = 10, e = 1.
inline EconomyTable table3A() {
    EconomyTable t;
    t.branch_names = {"E", "C", "V"};
    t.wage_index = 2;
    t.n_cycles = 10;
    t.fixed_capital = {83.15044, 11.96996, 150.73325};
    t.consumption = {{19.401807, 38.803467, 24.94517},
                     {19.949964, 39.899885, 47.879993},
                     {116.355582, 232.711164, 214.2}};
    t.e_rates = {1.0, 1.0, 1.0};
    t.k_total = 1000.0;
    return t;
}

// Zero fixed capital, zero surplus (Table 4A), K_T = 754.147032.
inline EconomyTable table4A() {
    EconomyTable t;
    t.branch_names = {"E", "C", "V"};
    t.wage_index = 2;
    t.n_cycles = 1;
    t.fixed_capital = {0.0, 0.0, 0.0};
    t.consumption = {{19.401807, 38.803467, 24.94517},
                     {19.949964, 39.899885, 47.879993},
                     {116.355582, 232.711164, 214.2}};
    t.e_rates = {0.0, 0.0, 0.0};
    t.k_total = 754.147032;
    return t;
}

// Zero fixed capital with surplus (Table 5A), K_T = 754.147032, e = 1.
inline EconomyTable table5A() {
    EconomyTable t = table4A();
    t.e_rates = {1.0, 1.0, 1.0};
    return t;
}

// Surplus value only in branch 1 (Table 8A).
inline EconomyTable table8A() {
    EconomyTable t;
    t.branch_names = {"E", "C", "V"};
    t.wage_index = 2;
    t.n_cycles = 1;
    t.fixed_capital = {0.0, 0.0, 0.0};
    t.consumption = {{28.66090532, 57.32159349, 36.84972001},
                     {61.3545743, 122.7090164, 147.2512225},
                     {61.97183634, 123.9436727, 114.084491}};
    t.e_rates = {1.0, 0.0, 0.0};
    t.k_total = 754.147032;
    return t;
}

// Five-branch machine economy of Table 12 (M, E, C, V, L), n = 10.
// The luxury branch has V = 10, PL = 20, so e_L = 2.
inline EconomyTable table12() {
    EconomyTable t;
    t.branch_names = {"M", "E", "C", "V", "L"};
    t.wage_index = 3;
    t.machine_index = 0;
    t.n_cycles = 10;
    t.fixed_capital = {100.0, 150.0, 50.0, 30.0, 20.0};
    t.consumption = {{0.0, 30.0, 60.0, 40.0, 0.0},
                     {0.0, 20.0, 50.0, 30.0, 0.0},
                     {0.0, 35.0, 65.0, 80.0, 0.0},
                     {0.0, 32.0, 70.0, 60.0, 0.0},
                     {0.0, 0.5, 1.0, 10.0, 0.0}};
    t.e_rates = {1.0, 1.0, 1.0, 1.0, 2.0};
    t.k_total = 933.5;
    return t;
}

// Four-branch economy with an arbitrary (non-constructed) luxury branch,
// taken from the solved Table 20A rows; n = 10, e = 1.
inline EconomyTable table20A() {
    EconomyTable t;
    t.branch_names = {"E", "C", "V", "L"};
    t.wage_index = 2;
    t.n_cycles = 10;
    t.fixed_capital = {162.5105639, 28.71510536, 61.18836912, 40.81632657};
    t.consumption = {{40.8813405, 77.31916682, 46.53165992, 0.0},
                     {45.45965176, 83.72240806, 114.8607886, 0.0},
                     {50.58938706, 101.1787662, 87.0434776, 0.0},
                     {4.081632657, 18.36734695, 36.73469383, 0.0}};
    t.e_rates = {1.0, 1.0, 1.0, 1.0};
    t.k_total = 1000.0;
    return t;
}

// Marx-type simple reproduction input (Table 20D): zero fixed capital,
// luxury branch unconsumed, e = 1.
inline EconomyTable table20D() {
    EconomyTable t;
    t.branch_names = {"E", "C", "V", "L"};
    t.wage_index = 2;
    t.n_cycles = 1;
    t.fixed_capital = {0.0, 0.0, 0.0, 0.0};
    t.consumption = {{19.401807, 38.803467, 15.0, 0.0},
                     {19.949964, 39.899885, 47.879993, 0.0},
                     {116.355582, 232.711164, 215.0, 0.0},
                     {10.0, 15.0, 8.0, 0.0}};
    t.e_rates = {1.0, 1.0, 1.0, 1.0};
    return t;
}

// Five-branch machine economy for the neutral-element checks:
// M, E, C, V, L with every branch capital 200, n = 10, e = 1.
inline EconomyTable table_h_init() {
    EconomyTable t;
    t.branch_names = {"M", "E", "C", "V", "L"};
    t.wage_index = 3;
    t.machine_index = 0;
    t.n_cycles = 10;
    t.fixed_capital = {66.65533413, 100.0, 20.0, 42.22, 188.88};
    t.consumption = {{0.0, 31.12982091, 62.21764476, 39.9972002, 0.0},
                     {0.0, 23.334, 46.666, 30.0, 0.0},
                     {0.0, 33.334, 66.666, 80.0, 0.0},
                     {0.0, 32.6, 65.18, 60.0, 0.0},
                     {0.0, 0.38, 0.74, 10.0, 0.0}};
    t.e_rates = {1.0, 1.0, 1.0, 1.0, 1.0};
    t.k_total = 1000.0;
    return t;
}

// Fixed-capital convergence base (Table 10), K_T = 1100, n = 10.
inline EconomyTable table10() {
    EconomyTable t;
    t.branch_names = {"E", "C", "V"};
    t.wage_index = 2;
    t.n_cycles = 10;
    t.fixed_capital = {320.36068, 38.49993503, 52.60801586};
    t.consumption = {{33.93699782, 67.87373852, 43.63326468},
                     {64.16665702, 128.3331757, 154.0002322},
                     {40.60972813, 81.21945627, 74.75880071}};
    t.e_rates = {1.0, 1.0, 1.0};
    t.k_total = 1100.0;
    return t;
}

}  // namespace fixtures

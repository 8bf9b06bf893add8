#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "valforme/errors.hpp"

namespace valforme {

using Vector = std::vector<double>;

/// Small dense row-major square matrix. Orders above 16 are rejected: the
/// economy models this library targets never exceed that.
class DenseMatrix {
public:
    static constexpr std::size_t max_order = 16;

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {
        if (n == 0 || n > max_order)
            throw StructuralError("matrix order " + std::to_string(n) + " outside [1, 16]");
    }

    std::size_t order() const { return n_; }
    double& at(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    double norm_inf() const {
        double best = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n_; ++j) row += std::abs(at(i, j));
            best = std::max(best, row);
        }
        return best;
    }

    bool all_finite() const {
        for (double v : a_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Vector multiply(const Vector& x) const {
        Vector y(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) y[i] += at(i, j) * x[j];
        return y;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

namespace detail {

struct LuDecomposition {
    DenseMatrix lu;
    std::vector<std::size_t> perm;  // row permutation applied to the input
    double det_sign = 1.0;
    double smallest_pivot = 0.0;
    std::size_t smallest_pivot_index = 0;
};

inline LuDecomposition lu_factor(const DenseMatrix& a) {
    const std::size_t n = a.order();
    if (!a.all_finite()) throw StructuralError("matrix has non-finite entries");
    LuDecomposition f{a, {}, 1.0, 0.0, 0};
    f.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;

    f.smallest_pivot = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(f.lu.at(i, k)) > std::abs(f.lu.at(piv, k))) piv = i;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu.at(piv, j), f.lu.at(k, j));
            std::swap(f.perm[piv], f.perm[k]);
            f.det_sign = -f.det_sign;
        }
        const double p = f.lu.at(k, k);
        if (std::abs(p) < f.smallest_pivot) {
            f.smallest_pivot = std::abs(p);
            f.smallest_pivot_index = k;
        }
        if (p == 0.0) continue;  // rank-deficient column; leave zeros below
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = f.lu.at(i, k) / p;
            f.lu.at(i, k) = m;
            for (std::size_t j = k + 1; j < n; ++j) f.lu.at(i, j) -= m * f.lu.at(k, j);
        }
    }
    return f;
}

/// Forward/back substitution against an existing factorization. Pivots with
/// magnitude below `clamp` are replaced by +-clamp so that near-singular
/// systems can still be used for inverse iteration.
inline Vector lu_solve(const LuDecomposition& f, const Vector& b, double clamp = 0.0) {
    const std::size_t n = f.lu.order();
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[f.perm[i]];
        for (std::size_t j = 0; j < i; ++j) s -= f.lu.at(i, j) * y[j];
        y[i] = s;
    }
    Vector x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= f.lu.at(ii, j) * x[j];
        double p = f.lu.at(ii, ii);
        if (std::abs(p) < clamp) p = (p < 0.0 ? -clamp : clamp);
        x[ii] = s / p;
    }
    return x;
}

}  // namespace detail

/// Solves A x = b by partially pivoted elimination. Throws SingularSystemError
/// when a pivot falls below 1e-13 * |A|_inf.
inline Vector solve_linear(const DenseMatrix& a, const Vector& b) {
    if (b.size() != a.order()) throw StructuralError("right-hand side not conformable");
    const auto f = detail::lu_factor(a);
    const double threshold = 1e-13 * a.norm_inf();
    if (f.smallest_pivot < threshold)
        throw SingularSystemError("system singular to working precision at pivot " +
                                      std::to_string(f.smallest_pivot_index),
                                  f.smallest_pivot_index);
    return detail::lu_solve(f, b);
}

/// Determinant via the same pivoted elimination; 0 is a valid result.
inline double determinant(const DenseMatrix& a) {
    const auto f = detail::lu_factor(a);
    double det = f.det_sign;
    for (std::size_t k = 0; k < a.order(); ++k) det *= f.lu.at(k, k);
    return det;
}

/// Direction spanning the (numerical) nullspace of a rank-deficient matrix,
/// found by inverse iteration with clamped pivots. Normalized to |x|_2 = 1.
inline Vector nullspace_vector(const DenseMatrix& a) {
    const std::size_t n = a.order();
    const auto f = detail::lu_factor(a);
    const double clamp = std::max(1e-30, 1e-18 * a.norm_inf());
    Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    for (int it = 0; it < 6; ++it) {
        Vector y = detail::lu_solve(f, v, clamp);
        double nrm2 = 0.0;
        for (double c : y) nrm2 += c * c;
        const double nrm = std::sqrt(nrm2);
        if (!(nrm > 0.0) || !std::isfinite(nrm))
            throw SingularSystemError("nullspace iteration broke down", f.smallest_pivot_index);
        for (std::size_t i = 0; i < n; ++i) v[i] = y[i] / nrm;
    }
    if (v[0] < 0.0)
        for (double& c : v) c = -c;
    return v;
}

struct Eigenpair {
    double value = 0.0;
    Vector vector;
    int iterations = 0;
};

/// Dominant eigenpair of a nonnegative matrix by power iteration from the
/// all-ones vector. The returned vector has Euclidean norm 1, first component
/// positive, and must be strictly positive (Perron vector); anything else is
/// reported as an eigen-domain error.
inline Eigenpair dominant_eigenpair(const DenseMatrix& a) {
    const std::size_t n = a.order();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (a.at(i, j) < 0.0 || !std::isfinite(a.at(i, j)))
                throw EigenDomainError("dominant_eigenpair requires a nonnegative matrix");

    Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    const int max_iter = 100000;
    for (int it = 1; it <= max_iter; ++it) {
        Vector u = a.multiply(v);
        double dot = 0.0, nrm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dot += v[i] * u[i];
            nrm2 += u[i] * u[i];
        }
        const double lambda_new = dot;  // Rayleigh quotient, |v| = 1
        const double nrm = std::sqrt(nrm2);
        if (nrm == 0.0) throw EigenDomainError("matrix annihilated the iteration vector");
        for (std::size_t i = 0; i < n; ++i) u[i] /= nrm;

        double resid = 0.0;
        const Vector au = a.multiply(u);
        for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(au[i] - lambda_new * u[i]));

        const bool settled = std::abs(lambda_new - lambda) <= 1e-14 * std::abs(lambda_new);
        lambda = lambda_new;
        v = u;
        if (settled && resid <= 1e-12) {
            if (v[0] < 0.0)
                for (double& c : v) c = -c;
            for (std::size_t i = 0; i < n; ++i)
                if (v[i] <= 1e-12)
                    throw EigenDomainError("dominant eigenvector not strictly positive; "
                                           "matrix appears reducible");
            // Newton-polish the eigenvalue on det(A - lambda I): the power
            // estimate stalls near 1e-12, the characteristic root does not.
            const auto det_at = [&](double l) {
                DenseMatrix m = a;
                for (std::size_t i = 0; i < n; ++i) m.at(i, i) -= l;
                return determinant(m);
            };
            for (int ref = 0; ref < 4; ++ref) {
                const double h = 1e-7 * std::max(1.0, std::abs(lambda));
                const double der = (det_at(lambda + h) - det_at(lambda - h)) / (2.0 * h);
                if (der == 0.0 || !std::isfinite(der)) break;
                const double step = -det_at(lambda) / der;
                if (!std::isfinite(step) || std::abs(step) > 1e-4) break;
                lambda += step;
                if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(lambda))) break;
            }
            DenseMatrix shifted = a;
            for (std::size_t i = 0; i < n; ++i) shifted.at(i, i) -= lambda;
            try {
                Vector w = nullspace_vector(shifted);
                bool positive = true;
                for (double comp : w) positive &= comp > 0.0;
                if (positive) v = std::move(w);
            } catch (const SingularSystemError&) {
                // keep the power-iteration vector
            }
            return {lambda, v, it};
        }
    }
    throw ConvergenceError("power iteration did not converge in 100000 steps", lambda);
}

}  // namespace valforme

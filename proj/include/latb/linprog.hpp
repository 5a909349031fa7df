#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "latb/errors.hpp"

// Dense linear programming in standard equality form:
//
//     optimize c'x   subject to   A x = d,  x >= 0.
//
// The solver is a two-phase primal simplex on a full tableau.  The entering
// column takes the most negative reduced cost (lowest index on ties); the
// leaving row takes the smallest nonnegative ratio, with near-ties broken
// toward the largest pivot entry so the tableau stays well conditioned
// through degenerate stretches.  Every rule is deterministic, so the same
// problem always takes the same pivot path; an iteration cap backstops the
// degenerate worst case.
//
// Scale target: a few hundred variables and rows.  That covers every system
// this library builds (single-step polytopes have 2^m columns and m+1 rows;
// the largest whole-tree systems stay in the hundreds).

namespace latb {

// Row-major dense matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

enum class LpSense { Maximize, Minimize };

struct LpProblem {
    LpSense sense = LpSense::Maximize;
    std::vector<double> objective;
    Matrix constraints;
    std::vector<double> rhs;

    int num_vars() const { return constraints.cols; }
};

struct LpSolution {
    double value = 0.0;
    std::vector<double> point;
    std::vector<int> basis;  // sorted column indices of an optimal basis
};

class SimplexSolver {
public:
    explicit SimplexSolver(double tol = 1e-9) : tol_(tol) {}

    // Solves from scratch (phase 1 finds a feasible basis, phase 2
    // optimizes).  Throws Infeasible or Unbounded.
    LpSolution solve(const LpProblem& lp) {
        validate(lp);
        cold_start(lp);
        return optimize(lp);
    }

    // Starts phase 2 directly from the given basis when it is nonsingular
    // and feasible for this problem; otherwise silently falls back to the
    // two-phase path.  A solver instance holds mutable tableau state, so run
    // one solve at a time per instance; distinct instances are independent.
    LpSolution solve(const LpProblem& lp, const std::vector<int>& start_basis) {
        validate(lp);
        if (!warm_start(lp, start_basis)) {
            cold_start(lp);
        }
        return optimize(lp);
    }

private:
    static constexpr double kPivotTol = 1e-11;

    double tol_;
    int rows_ = 0;      // constraint rows currently in the tableau
    int nv_ = 0;        // tableau variable count (excludes the rhs column)
    std::vector<double> tab_;   // rows_ x (nv_ + 1); last column is the rhs
    std::vector<double> obj_;   // reduced-cost row, nv_ + 1 entries
    std::vector<int> basis_;    // basic variable of each row
    std::vector<double> cost_;  // phase cost of every tableau variable

    double& tab(int r, int c) { return tab_[static_cast<std::size_t>(r) * (nv_ + 1) + c]; }
    double tab(int r, int c) const { return tab_[static_cast<std::size_t>(r) * (nv_ + 1) + c]; }

    static void validate(const LpProblem& lp) {
        const Matrix& A = lp.constraints;
        if (A.cols < 1) {
            throw DimensionMismatch("problem must have at least one variable");
        }
        if (static_cast<int>(lp.objective.size()) != A.cols) {
            throw DimensionMismatch("objective length " + std::to_string(lp.objective.size()) +
                                    " does not match variable count " + std::to_string(A.cols));
        }
        if (static_cast<int>(lp.rhs.size()) != A.rows) {
            throw DimensionMismatch("rhs length " + std::to_string(lp.rhs.size()) +
                                    " does not match row count " + std::to_string(A.rows));
        }
    }

    // Rebuilds the reduced-cost row for the current basis and cost vector.
    void price_out() {
        obj_.assign(nv_ + 1, 0.0);
        for (int j = 0; j <= nv_; ++j) {
            obj_[j] = j < nv_ ? cost_[j] : 0.0;
        }
        for (int r = 0; r < rows_; ++r) {
            const double cb = cost_[basis_[r]];
            if (cb == 0.0) continue;
            for (int j = 0; j <= nv_; ++j) {
                obj_[j] -= cb * tab(r, j);
            }
        }
    }

    void pivot(int row, int col) {
        const double p = tab(row, col);
        const double inv = 1.0 / p;
        for (int j = 0; j <= nv_; ++j) tab(row, j) *= inv;
        tab(row, col) = 1.0;
        for (int r = 0; r < rows_; ++r) {
            if (r == row) continue;
            const double f = tab(r, col);
            if (f == 0.0) continue;
            for (int j = 0; j <= nv_; ++j) tab(r, j) -= f * tab(row, j);
            tab(r, col) = 0.0;
        }
        const double f = obj_[col];
        if (f != 0.0) {
            for (int j = 0; j <= nv_; ++j) obj_[j] -= f * tab(row, j);
            obj_[col] = 0.0;
        }
        basis_[row] = col;
    }

    // Ratio test for the given entering column, or -1 when no row blocks
    // (unbounded direction).  Basic values can sit a hair below zero from
    // roundoff, so ratios are clamped at zero: a negative step would walk
    // out of the feasible region and snowball.  Rows whose pivot entry is
    // large enough to divide by safely are preferred as a class; among
    // near-tied ratios the largest pivot entry wins (lowest basic index on
    // exact ties), which keeps the tableau well conditioned through the
    // long degenerate stretches these problems produce.
    int choose_leaving(int enter) const {
        static constexpr double kStrongPivot = 1e-8;
        double amax = 0.0;
        for (int r = 0; r < rows_; ++r) {
            amax = std::max(amax, tab(r, enter));
        }
        if (amax <= kPivotTol) return -1;
        const double eligible = amax > kStrongPivot ? kStrongPivot : kPivotTol;

        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < rows_; ++r) {
            const double a = tab(r, enter);
            if (a <= eligible) continue;
            best = std::min(best, std::max(tab(r, nv_), 0.0) / a);
        }
        const double window = best + 1e-10 * (1.0 + best);

        int leave = -1;
        double apick = 0.0;
        for (int r = 0; r < rows_; ++r) {
            const double a = tab(r, enter);
            if (a <= eligible) continue;
            if (std::max(tab(r, nv_), 0.0) / a > window) continue;
            if (a > apick || (a == apick && (leave < 0 || basis_[r] < basis_[leave]))) {
                apick = a;
                leave = r;
            }
        }
        return leave;
    }

    // Minimization loop on the current tableau and cost row.  Returns
    // normally at optimality; throws Unbounded when a favourable column has
    // no blocking row.
    void run() {
        const long long max_iters = 1000 + 50LL * (rows_ + nv_) * (rows_ + 4);
        for (long long iter = 0; iter < max_iters; ++iter) {
            int enter = -1;
            double most = -tol_;
            for (int j = 0; j < nv_; ++j) {
                if (obj_[j] < most) {
                    most = obj_[j];
                    enter = j;
                }
            }
            if (enter < 0) return;  // optimal

            const int leave = choose_leaving(enter);
            if (leave < 0) {
                throw Unbounded("objective is unbounded over the feasible region");
            }
            pivot(leave, enter);
        }
        throw Error("simplex iteration limit exceeded");
    }

    // Phase 1: start from an all-artificial basis and minimize the total
    // artificial mass; then drop the artificials and any redundant rows.
    void cold_start(const LpProblem& lp) {
        const Matrix& A = lp.constraints;
        const int n = A.cols;
        rows_ = A.rows;
        nv_ = n + rows_;
        tab_.assign(static_cast<std::size_t>(rows_) * (nv_ + 1), 0.0);
        basis_.resize(rows_);
        for (int r = 0; r < rows_; ++r) {
            const double sign = lp.rhs[r] < 0.0 ? -1.0 : 1.0;
            for (int j = 0; j < n; ++j) tab(r, j) = sign * A.at(r, j);
            tab(r, n + r) = 1.0;
            tab(r, nv_) = sign * lp.rhs[r];
            basis_[r] = n + r;
        }
        cost_.assign(nv_, 0.0);
        for (int r = 0; r < rows_; ++r) cost_[n + r] = 1.0;
        price_out();
        run();

        const double artificial_mass = -obj_[nv_];
        if (artificial_mass > tol_) {
            throw Infeasible("equality system admits no non-negative solution (residual " +
                             std::to_string(artificial_mass) + ")");
        }

        // pivot leftover artificials out of the basis where possible,
        // choosing the largest-magnitude real entry for stability
        for (int r = 0; r < rows_; ++r) {
            if (basis_[r] < n) continue;
            int col = -1;
            double cmax = kPivotTol;
            for (int j = 0; j < n; ++j) {
                const double a = std::abs(tab(r, j));
                if (a > cmax) {
                    cmax = a;
                    col = j;
                }
            }
            if (col >= 0) pivot(r, col);
        }

        // rows still basic in an artificial are identically zero on the real
        // variables: redundant, drop them along with the artificial columns
        std::vector<double> clean;
        std::vector<int> clean_basis;
        int kept = 0;
        for (int r = 0; r < rows_; ++r) {
            if (basis_[r] >= n) continue;
            for (int j = 0; j < n; ++j) clean.push_back(tab(r, j));
            clean.push_back(tab(r, nv_));
            clean_basis.push_back(basis_[r]);
            ++kept;
        }
        rows_ = kept;
        nv_ = n;
        tab_ = std::move(clean);
        basis_ = std::move(clean_basis);
        for (int r = 0; r < rows_; ++r) {
            tab(r, nv_) = std::max(tab(r, nv_), 0.0);
        }
    }

    // Reduces [B | A | d] so the start basis columns become the identity.
    // Returns false (leaving no state commitments) when B is singular or the
    // implied basic point is infeasible.
    bool warm_start(const LpProblem& lp, const std::vector<int>& start_basis) {
        const Matrix& A = lp.constraints;
        const int n = A.cols;
        const int r0 = A.rows;
        if (static_cast<int>(start_basis.size()) != r0) return false;
        for (int j : start_basis) {
            if (j < 0 || j >= n) return false;
        }

        const int wcols = r0 + n + 1;
        std::vector<double> w(static_cast<std::size_t>(r0) * wcols, 0.0);
        auto wat = [&](int r, int c) -> double& {
            return w[static_cast<std::size_t>(r) * wcols + c];
        };
        for (int r = 0; r < r0; ++r) {
            for (int t = 0; t < r0; ++t) wat(r, t) = A.at(r, start_basis[t]);
            for (int j = 0; j < n; ++j) wat(r, r0 + j) = A.at(r, j);
            wat(r, r0 + n) = lp.rhs[r];
        }
        for (int t = 0; t < r0; ++t) {
            int prow = t;
            double pmax = std::abs(wat(t, t));
            for (int r = t + 1; r < r0; ++r) {
                if (std::abs(wat(r, t)) > pmax) {
                    pmax = std::abs(wat(r, t));
                    prow = r;
                }
            }
            if (pmax < kPivotTol) return false;  // singular basis
            if (prow != t) {
                for (int c = t; c < wcols; ++c) std::swap(wat(prow, c), wat(t, c));
            }
            const double inv = 1.0 / wat(t, t);
            for (int c = t; c < wcols; ++c) wat(t, c) *= inv;
            for (int r = 0; r < r0; ++r) {
                if (r == t) continue;
                const double f = wat(r, t);
                if (f == 0.0) continue;
                for (int c = t; c < wcols; ++c) wat(r, c) -= f * wat(t, c);
            }
        }
        for (int r = 0; r < r0; ++r) {
            if (wat(r, r0 + n) < -tol_) return false;  // basis infeasible here
        }

        rows_ = r0;
        nv_ = n;
        tab_.assign(static_cast<std::size_t>(rows_) * (nv_ + 1), 0.0);
        basis_ = start_basis;
        for (int r = 0; r < rows_; ++r) {
            for (int j = 0; j < n; ++j) tab(r, j) = wat(r, r0 + j);
            tab(r, nv_) = std::max(wat(r, r0 + n), 0.0);
        }
        return true;
    }

    // Phase 2 on whatever feasible tableau the start routine left behind.
    LpSolution optimize(const LpProblem& lp) {
        const int n = lp.num_vars();
        cost_.assign(nv_, 0.0);
        for (int j = 0; j < n; ++j) {
            cost_[j] = lp.sense == LpSense::Maximize ? -lp.objective[j] : lp.objective[j];
        }
        price_out();
        run();

        LpSolution sol;
        sol.point.assign(n, 0.0);
        for (int r = 0; r < rows_; ++r) {
            sol.point[basis_[r]] = std::max(tab(r, nv_), 0.0);
        }
        sol.value = std::inner_product(sol.point.begin(), sol.point.end(),
                                       lp.objective.begin(), 0.0);
        sol.basis = basis_;
        std::sort(sol.basis.begin(), sol.basis.end());
        return sol;
    }
};

// C(n, k), saturating at cap + 1 so callers can compare against a budget
// without overflow.
inline std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        if (r > cap) return cap + 1;
    }
    return r;
}

// Every vertex of {x >= 0 : A x = d}, found by checking each basis of the
// row-reduced system.  Output is sorted lexicographically and deduplicated
// within `tol`.  Throws Infeasible when the equalities are inconsistent or no
// non-negative solution exists, and BudgetExceeded when the basis count
// passes `max_bases` (the work grows as C(cols, rank), which is why callers
// must budget).
inline std::vector<std::vector<double>> enumerate_vertices(
    const Matrix& A, const std::vector<double>& d, double tol = 1e-9,
    std::uint64_t max_bases = 2'000'000) {
    if (static_cast<int>(d.size()) != A.rows) {
        throw DimensionMismatch("rhs length does not match row count");
    }
    const int n = A.cols;
    const int m0 = A.rows;

    // row reduce [A | d]
    Matrix red(m0, n + 1);
    for (int r = 0; r < m0; ++r) {
        for (int j = 0; j < n; ++j) red.at(r, j) = A.at(r, j);
        red.at(r, n) = d[r];
    }
    int rank = 0;
    for (int col = 0; col < n && rank < m0; ++col) {
        int prow = -1;
        double pmax = tol;
        for (int r = rank; r < m0; ++r) {
            if (std::abs(red.at(r, col)) > pmax) {
                pmax = std::abs(red.at(r, col));
                prow = r;
            }
        }
        if (prow < 0) continue;
        if (prow != rank) {
            for (int c = 0; c <= n; ++c) std::swap(red.at(prow, c), red.at(rank, c));
        }
        const double inv = 1.0 / red.at(rank, col);
        for (int c = 0; c <= n; ++c) red.at(rank, c) *= inv;
        for (int r = 0; r < m0; ++r) {
            if (r == rank) continue;
            const double f = red.at(r, col);
            if (f == 0.0) continue;
            for (int c = 0; c <= n; ++c) red.at(r, c) -= f * red.at(rank, c);
        }
        ++rank;
    }
    for (int r = rank; r < m0; ++r) {
        if (std::abs(red.at(r, n)) > tol) {
            throw Infeasible("equality system is inconsistent");
        }
    }

    if (binomial_capped(n, rank, max_bases) > max_bases) {
        throw BudgetExceeded("vertex enumeration would inspect more than " +
                             std::to_string(max_bases) + " bases");
    }

    // column-major copy of the reduced rows for fast basis assembly
    std::vector<double> colmaj(static_cast<std::size_t>(n) * rank);
    for (int j = 0; j < n; ++j) {
        for (int r = 0; r < rank; ++r) {
            colmaj[static_cast<std::size_t>(j) * rank + r] = red.at(r, j);
        }
    }
    std::vector<double> rhs(rank);
    for (int r = 0; r < rank; ++r) rhs[r] = red.at(r, n);

    std::vector<std::vector<double>> vertices;
    if (rank == 0) {
        // A = 0: the only candidate vertex is the origin (requires d = 0,
        // already checked above)
        vertices.push_back(std::vector<double>(n, 0.0));
        return vertices;
    }

    std::vector<int> comb(rank);
    std::iota(comb.begin(), comb.end(), 0);
    std::vector<double> work(static_cast<std::size_t>(rank) * (rank + 1));
    std::vector<double> weights(rank);

    const auto try_basis = [&]() {
        // gather the candidate basis columns and solve B w = rhs in place
        for (int t = 0; t < rank; ++t) {
            const double* src = &colmaj[static_cast<std::size_t>(comb[t]) * rank];
            for (int r = 0; r < rank; ++r) {
                work[static_cast<std::size_t>(r) * (rank + 1) + t] = src[r];
            }
        }
        for (int r = 0; r < rank; ++r) {
            work[static_cast<std::size_t>(r) * (rank + 1) + rank] = rhs[r];
        }
        auto wat = [&](int r, int c) -> double& {
            return work[static_cast<std::size_t>(r) * (rank + 1) + c];
        };
        for (int t = 0; t < rank; ++t) {
            int prow = t;
            double pmax = std::abs(wat(t, t));
            for (int r = t + 1; r < rank; ++r) {
                if (std::abs(wat(r, t)) > pmax) {
                    pmax = std::abs(wat(r, t));
                    prow = r;
                }
            }
            if (pmax < 1e-11) return;  // singular: not a basis
            if (prow != t) {
                for (int c = t; c <= rank; ++c) std::swap(wat(prow, c), wat(t, c));
            }
            for (int r = t + 1; r < rank; ++r) {
                const double f = wat(r, t) / wat(t, t);
                if (f == 0.0) continue;
                for (int c = t; c <= rank; ++c) wat(r, c) -= f * wat(t, c);
            }
        }
        for (int t = rank - 1; t >= 0; --t) {
            double s = wat(t, rank);
            for (int c = t + 1; c < rank; ++c) s -= wat(t, c) * weights[c];
            weights[t] = s / wat(t, t);
        }
        for (int t = 0; t < rank; ++t) {
            if (weights[t] < -tol) return;  // negative weight: outside the cone
        }
        std::vector<double> x(n, 0.0);
        for (int t = 0; t < rank; ++t) {
            x[comb[t]] = std::max(weights[t], 0.0);
        }
        vertices.push_back(std::move(x));
    };

    while (true) {
        try_basis();
        // next lexicographic combination
        int i = rank - 1;
        while (i >= 0 && comb[i] == n - rank + i) --i;
        if (i < 0) break;
        ++comb[i];
        for (int t = i + 1; t < rank; ++t) comb[t] = comb[t - 1] + 1;
    }

    std::sort(vertices.begin(), vertices.end());
    std::vector<std::vector<double>> unique;
    for (auto& v : vertices) {
        if (!unique.empty()) {
            double diff = 0.0;
            for (int j = 0; j < n; ++j) {
                diff = std::max(diff, std::abs(v[j] - unique.back()[j]));
            }
            if (diff <= tol) continue;
        }
        unique.push_back(std::move(v));
    }
    if (unique.empty()) {
        throw Infeasible("polytope has no vertices (empty feasible set)");
    }
    return unique;
}

}  // namespace latb

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "latb/errors.hpp"
#include "latb/linprog.hpp"
#include "latb/market.hpp"

// Probability measures on the one-step move columns, the martingale
// conditions that constrain them, and expectations taken under per-step
// product measures.
//
// A measure here assigns a weight to each of the 2^m joint move columns.  It
// is a one-step martingale measure when, for every asset, the weighted mean
// of its gross returns equals the riskless gross return.  Those m conditions
// plus normalization are linear, so the martingale measures form a polytope
// in standard equality form — exactly what the simplex layer consumes.

namespace latb {

// ---------------------------------------------------------------------------
// Measures on move columns
// ---------------------------------------------------------------------------

struct Measure {
    int num_assets = 0;
    std::vector<double> weights;  // one per column, in column order

    int num_columns() const { return static_cast<int>(weights.size()); }
    double at(int j0) const { return weights[j0]; }

    double expect(const std::vector<double>& values) const {
        if (values.size() != weights.size()) {
            throw DimensionMismatch("value vector length does not match column count");
        }
        return std::inner_product(weights.begin(), weights.end(), values.begin(), 0.0);
    }

    bool operator==(const Measure&) const = default;

    // Validates and normalizes: weights must be non-negative up to `tol`
    // (tiny negatives are clamped to zero) and sum to one up to `tol` (the
    // sum is then scaled out exactly).  Throws WrongDimension or OutOfRange.
    static Measure from_weights(int num_assets, std::vector<double> w, double tol = 1e-9) {
        if (num_assets < 1 || num_assets > kMaxAssets) {
            throw DimensionError("number of assets must be in [1, " +
                                 std::to_string(kMaxAssets) + "]");
        }
        if (static_cast<int>(w.size()) != column_count(num_assets)) {
            throw WrongDimension("expected " + std::to_string(column_count(num_assets)) +
                                 " weights, got " + std::to_string(w.size()));
        }
        double sum = 0.0;
        for (double& x : w) {
            if (x < -tol || !std::isfinite(x)) {
                throw OutOfRange("measure weight out of range: " + std::to_string(x));
            }
            x = std::max(x, 0.0);
            sum += x;
        }
        if (std::abs(sum - 1.0) > tol) {
            throw OutOfRange("measure weights sum to " + std::to_string(sum) + ", not 1");
        }
        if (sum != 1.0) {
            for (double& x : w) x /= sum;
        }
        return Measure{num_assets, std::move(w)};
    }
};

// ---------------------------------------------------------------------------
// Gross-return matrix and martingale conditions
// ---------------------------------------------------------------------------

// Row i holds asset i's gross one-step return in every column: the up ratio
// where the column moves the asset up, the down ratio elsewhere.
struct PsiMatrix {
    Matrix ratios;

    int num_assets() const { return ratios.rows; }
    int num_columns() const { return ratios.cols; }
    double at(int asset, int j0) const { return ratios.at(asset, j0); }
};

inline PsiMatrix build_psi(const MarketParams& p) {
    validate_params(p);
    const int m = p.num_assets();
    const int cols = column_count(m);
    PsiMatrix psi;
    psi.ratios = Matrix(m, cols);
    for (int i = 0; i < m; ++i) {
        for (int j0 = 0; j0 < cols; ++j0) {
            psi.ratios.at(i, j0) =
                column_up(m, j0, i) ? p.assets[i].up_ratio : p.assets[i].down_ratio;
        }
    }
    return psi;
}

// True when every asset's expected gross return under `q` equals the
// market's riskless gross return, within `tol`.
inline bool is_martingale(const Measure& q, const MarketParams& p, double tol = 1e-9) {
    PsiMatrix psi = build_psi(p);
    if (q.num_columns() != psi.num_columns()) {
        throw DimensionMismatch("measure and market column counts differ");
    }
    for (int i = 0; i < psi.num_assets(); ++i) {
        double mean = 0.0;
        for (int j0 = 0; j0 < psi.num_columns(); ++j0) {
            mean += psi.at(i, j0) * q.at(j0);
        }
        if (std::abs(mean - p.growth_factor) > tol) return false;
    }
    return true;
}

// The one-step martingale polytope as an equality system: m return rows plus
// a normalization row.  Feed straight into SimplexSolver or
// enumerate_vertices.
struct MartingaleSystem {
    Matrix constraints;
    std::vector<double> rhs;
};

inline MartingaleSystem martingale_constraints(const MarketParams& p) {
    PsiMatrix psi = build_psi(p);
    const int m = psi.num_assets();
    const int cols = psi.num_columns();
    MartingaleSystem sys;
    sys.constraints = Matrix(m + 1, cols);
    for (int i = 0; i < m; ++i) {
        for (int j0 = 0; j0 < cols; ++j0) {
            sys.constraints.at(i, j0) = psi.at(i, j0);
        }
    }
    for (int j0 = 0; j0 < cols; ++j0) {
        sys.constraints.at(m, j0) = 1.0;
    }
    sys.rhs.assign(m + 1, p.growth_factor);
    sys.rhs[m] = 1.0;
    return sys;
}

// ---------------------------------------------------------------------------
// Expectations under a per-step product measure
// ---------------------------------------------------------------------------

// Mixed-radix helpers for grids of per-asset extra up counts.
namespace detail {

inline std::uint64_t grid_size(int num_assets, int steps) {
    std::uint64_t s = 1;
    for (int i = 0; i < num_assets; ++i) s *= static_cast<std::uint64_t>(steps + 1);
    return s;
}

}  // namespace detail

// Conditional expectation of a terminal-node function under the product of
// one measure per remaining step, given the lattice node reached so far.
// Works backward one step at a time, so the cost is the number of lattice
// nodes below `node`, not the number of paths.  `terminal_value` is called
// with every level-n node reachable from `node`.
template <class TerminalFn>
double conditional_expectation(TerminalFn&& terminal_value, const NodeId& node,
                               const Measure& step_measure, const MarketParams& p) {
    check_node(node, p);
    const int m = p.num_assets();
    if (step_measure.num_assets != m) {
        throw DimensionMismatch("measure and market asset counts differ");
    }
    const int h = p.num_steps - node.level;
    if (detail::grid_size(m, h) > (std::uint64_t{1} << 28)) {
        throw BudgetExceeded("conditional expectation grid is too large");
    }

    // values over the "extra ups per asset" grid at the deepest level
    const int cols = column_count(m);
    std::vector<double> values(detail::grid_size(m, h));
    {
        NodeId leaf{p.num_steps, std::vector<int>(m)};
        std::vector<int> extra(m, 0);
        for (std::uint64_t idx = 0; idx < values.size(); ++idx) {
            for (int i = 0; i < m; ++i) leaf.up_counts[i] = node.up_counts[i] + extra[i];
            values[idx] = terminal_value(leaf);
            for (int i = m - 1; i >= 0; --i) {
                if (++extra[i] <= h) break;
                extra[i] = 0;
            }
        }
    }

    // fold one step at a time: a grid point at depth t collects its 2^m
    // successors at depth t+1
    for (int t = h - 1; t >= 0; --t) {
        std::vector<double> folded(detail::grid_size(m, t));
        std::vector<int> extra(m, 0);
        std::vector<std::uint64_t> radix(m);  // strides of the depth-t+1 grid
        {
            std::uint64_t s = 1;
            for (int i = m - 1; i >= 0; --i) {
                radix[i] = s;
                s *= static_cast<std::uint64_t>(t + 2);
            }
        }
        for (std::uint64_t idx = 0; idx < folded.size(); ++idx) {
            std::uint64_t base = 0;
            for (int i = 0; i < m; ++i) base += radix[i] * static_cast<std::uint64_t>(extra[i]);
            double acc = 0.0;
            for (int j0 = 0; j0 < cols; ++j0) {
                const double wj = step_measure.at(j0);
                if (wj == 0.0) continue;
                std::uint64_t succ = base;
                for (int i = 0; i < m; ++i) {
                    if (column_up(m, j0, i)) succ += radix[i];
                }
                acc += wj * values[succ];
            }
            folded[idx] = acc;
            for (int i = m - 1; i >= 0; --i) {
                if (++extra[i] <= t) break;
                extra[i] = 0;
            }
        }
        values = std::move(folded);
    }
    return values[0];
}

// Conditional expectation of a whole-path function given the first
// `prefix.size()` move columns, under the product of `step_measure` over the
// remaining steps.  Enumerates every completion, so the remaining scenario
// space must fit `max_bits` binary digits.  `path_value` is called with a
// full Scenario.
template <class PathFn>
double conditional_expectation(PathFn&& path_value, const std::vector<int>& prefix,
                               const Measure& step_measure, const MarketParams& p,
                               int max_bits = 24) {
    validate_params(p);
    const int m = p.num_assets();
    const int n = p.num_steps;
    const int k = static_cast<int>(prefix.size());
    if (k > n) {
        throw PrefixLevelMismatch("prefix has " + std::to_string(k) + " steps, market has " +
                                  std::to_string(n));
    }
    if (step_measure.num_assets != m) {
        throw DimensionMismatch("measure and market asset counts differ");
    }
    for (int j0 : prefix) check_column_index0(m, j0);
    const int h = n - k;
    if (static_cast<long long>(m) * h > max_bits) {
        throw BudgetExceeded("completion space needs " + std::to_string(m * h) +
                             " bits; budget is " + std::to_string(max_bits));
    }

    Scenario s;
    s.num_assets = m;
    s.cols.resize(n);
    std::copy(prefix.begin(), prefix.end(), s.cols.begin());

    const int cols = column_count(m);
    const std::uint64_t completions = std::uint64_t{1} << (m * h);
    double acc = 0.0;
    for (std::uint64_t c = 0; c < completions; ++c) {
        double weight = 1.0;
        std::uint64_t rest = c;
        for (int t = h - 1; t >= 0; --t) {
            const int j0 = static_cast<int>(rest & static_cast<std::uint64_t>(cols - 1));
            s.cols[k + t] = j0;
            weight *= step_measure.at(j0);
            rest >>= m;
        }
        if (weight == 0.0) continue;
        acc += weight * path_value(s);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Conditionals of a measure on whole scenarios
// ---------------------------------------------------------------------------

// Given a probability vector over all (2^m)^n scenarios and a realized
// prefix, returns the conditional distribution of the next move column.
// Throws ZeroMassEvent when the prefix has no mass.
inline Measure single_step_conditionals(const std::vector<double>& p_multi,
                                        const std::vector<int>& prefix, int num_assets,
                                        int num_steps) {
    const std::uint64_t total = scenario_count(num_assets, num_steps);
    if (p_multi.size() != total) {
        throw WrongDimension("expected " + std::to_string(total) + " scenario weights, got " +
                             std::to_string(p_multi.size()));
    }
    const int k = static_cast<int>(prefix.size());
    if (k > num_steps - 1) {
        throw PrefixLevelMismatch("prefix must leave at least one step open");
    }
    std::uint64_t prefix_index = 0;
    for (int j0 : prefix) {
        check_column_index0(num_assets, j0);
        prefix_index = (prefix_index << num_assets) | static_cast<std::uint64_t>(j0);
    }

    const int cols = column_count(num_assets);
    const int tail_bits = num_assets * (num_steps - k - 1);
    const std::uint64_t tail = std::uint64_t{1} << tail_bits;
    std::vector<double> mass(cols, 0.0);
    for (int j0 = 0; j0 < cols; ++j0) {
        const std::uint64_t start = ((prefix_index << num_assets) | static_cast<std::uint64_t>(j0))
                                    << tail_bits;
        double s = 0.0;
        for (std::uint64_t t = 0; t < tail; ++t) {
            s += p_multi[start + t];
        }
        mass[j0] = s;
    }
    const double denom = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(denom > 0.0)) {
        throw ZeroMassEvent("conditioning prefix has zero probability");
    }
    for (double& x : mass) x /= denom;
    return Measure::from_weights(num_assets, std::move(mass));
}

}  // namespace latb

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "latb/errors.hpp"
#include "latb/market.hpp"
#include "latb/measures.hpp"

// Set functions on asset subsets and the structure tests the pricing routes
// depend on.
//
// A one-step claim is a function of which assets moved up, i.e. a set
// function.  When that set function is supermodular (complements rather than
// substitutes: f(S∪T) + f(S∩T) >= f(S) + f(T)), the extreme expectations
// over all one-step martingale measures are attained at two explicit
// vertices, built here from the per-asset up weights:
//
//   * upper_vertex_measure: mass on the nested chain of "top i assets up"
//     columns, with weights b_i - b_{i+1} (b sorted non-increasing);
//   * lower_vertex_measure: mass b_i on each "only asset i up" column and
//     the remainder 1 - sum(b) on the all-down column.
//
// Multi-step claims use the fibrewise test: freeze all steps but one and ask
// that every such one-step fibre be supermodular.  All tests are exhaustive
// (every subset pair, every fibre), so they carry explicit size budgets.

namespace latb {

// A set function tabulated over the move columns: values[j0] is the value on
// the up-set of column j0.  Column order matches Measure, so expectations are
// plain dot products.
struct SetFunction {
    int num_assets = 0;
    std::vector<double> values;

    static SetFunction from_column_values(int num_assets, std::vector<double> v) {
        if (num_assets < 1 || num_assets > kMaxAssets) {
            throw DimensionError("number of assets must be in [1, " +
                                 std::to_string(kMaxAssets) + "]");
        }
        if (static_cast<int>(v.size()) != column_count(num_assets)) {
            throw WrongDimension("expected " + std::to_string(column_count(num_assets)) +
                                 " values, got " + std::to_string(v.size()));
        }
        return SetFunction{num_assets, std::move(v)};
    }

    // value on a subset given as a bit mask (asset a on bit m-1-a)
    double at_mask(std::uint32_t subset) const {
        return values[column_index0_of_mask(num_assets, subset)];
    }
};

// A pair of subsets violating the supermodular inequality.
struct SupermodularViolation {
    std::uint32_t set_a = 0;
    std::uint32_t set_b = 0;
};

// Exhaustive check of f(S|T) + f(S&T) >= f(S) + f(T) - tol over every subset
// pair.  Optionally reports the first violating pair (lowest masks first).
inline bool is_supermodular(const SetFunction& f, double tol = 1e-9,
                            SupermodularViolation* violation = nullptr) {
    const int m = f.num_assets;
    if (m > 13) {
        throw BudgetExceeded("pairwise subset check is quadratic in 2^m; m=" +
                             std::to_string(m) + " is past the supported budget");
    }
    const std::uint32_t full = static_cast<std::uint32_t>(column_count(m) - 1);
    // re-index by mask so the pair loop is cache friendly
    std::vector<double> g(full + 1);
    for (std::uint32_t s = 0; s <= full; ++s) {
        g[s] = f.values[full - s];  // column of mask s is at index full - s
    }
    for (std::uint32_t s = 0; s <= full; ++s) {
        for (std::uint32_t t = s + 1; t <= full; ++t) {
            if (g[s | t] + g[s & t] < g[s] + g[t] - tol) {
                if (violation) *violation = {s, t};
                return false;
            }
        }
    }
    return true;
}

// Location of a failing one-step fibre of a multi-step claim.
struct FibreWitness {
    int step = 0;                 // 1-based step whose fibre fails
    std::vector<int> fixed_cols;  // 0-based column per step; -1 marks `step`
    SupermodularViolation sets;   // offending subset pair within the fibre
};

// Estimated operation count of the fibrewise sweep, used against budgets.
inline double fibrewise_check_cost(int num_assets, int num_steps) {
    const double fibres = static_cast<double>(num_steps) *
                          std::pow(2.0, static_cast<double>(num_assets) * (num_steps - 1));
    return fibres * std::pow(4.0, static_cast<double>(num_assets));
}

// Checks that every one-step fibre of `path_value` (all other steps frozen)
// is supermodular in the step's up-set.  `path_value` is called with full
// Scenarios.  Throws BudgetExceeded when the sweep would pass `max_ops`.
template <class ScenarioFn>
bool is_fibrewise_supermodular(ScenarioFn&& path_value, const MarketParams& p,
                               double tol = 1e-9, double max_ops = 268435456.0,
                               FibreWitness* witness = nullptr) {
    validate_params(p);
    const int m = p.num_assets();
    const int n = p.num_steps;
    if (fibrewise_check_cost(m, n) > max_ops) {
        throw BudgetExceeded("fibrewise check needs about " +
                             std::to_string(fibrewise_check_cost(m, n)) +
                             " operations; budget is " + std::to_string(max_ops));
    }

    const int cols = column_count(m);
    Scenario s;
    s.num_assets = m;
    s.cols.assign(n, 0);
    std::vector<double> fibre(cols);

    for (int step = 0; step < n; ++step) {
        // odometer over the frozen steps
        std::vector<int> frozen(n - 1, 0);
        const std::uint64_t assignments = scenario_count(m, n - 1);
        for (std::uint64_t a = 0; a < assignments; ++a) {
            int t = 0;
            for (int other = 0; other < n; ++other) {
                if (other == step) continue;
                s.cols[other] = frozen[t++];
            }
            for (int j0 = 0; j0 < cols; ++j0) {
                s.cols[step] = j0;
                fibre[j0] = path_value(s);
            }
            SupermodularViolation v;
            if (!is_supermodular(SetFunction{m, fibre}, tol, &v)) {
                if (witness) {
                    witness->step = step + 1;
                    witness->fixed_cols = s.cols;
                    witness->fixed_cols[step] = -1;
                    witness->sets = v;
                }
                return false;
            }
            for (int i = n - 2; i >= 0; --i) {
                if (++frozen[i] < cols) break;
                frozen[i] = 0;
            }
        }
    }
    return true;
}

namespace detail {

inline void check_weights_in_unit_interval(const std::vector<double>& b) {
    const int m = static_cast<int>(b.size());
    if (m < 1 || m > kMaxAssets) {
        throw WrongDimension("weight vector must have between 1 and " +
                             std::to_string(kMaxAssets) + " entries");
    }
    for (double x : b) {
        if (!(x > 0.0) || !(x < 1.0)) {
            throw OutOfRange("up weights must lie strictly inside (0, 1), got " +
                             std::to_string(x));
        }
    }
}

}  // namespace detail

// Measure putting weight b_i - b_{i+1} on the column whose first i assets
// (by the given order, which must be non-increasing) move up, for i = 0..m
// with b_0 = 1 and b_{m+1} = 0.  Under it, asset i moves up with probability
// exactly b_i.  Throws NotSorted or OutOfRange.
inline Measure upper_vertex_measure(const std::vector<double>& sorted_b) {
    detail::check_weights_in_unit_interval(sorted_b);
    const int m = static_cast<int>(sorted_b.size());
    for (int i = 0; i + 1 < m; ++i) {
        if (sorted_b[i] < sorted_b[i + 1]) {
            throw NotSorted("weights must be non-increasing");
        }
    }
    std::vector<double> w(column_count(m), 0.0);
    for (int i = 0; i <= m; ++i) {
        const double hi = i == 0 ? 1.0 : sorted_b[i - 1];
        const double lo = i == m ? 0.0 : sorted_b[i];
        const std::uint32_t mask = i == 0 ? 0u
                                          : static_cast<std::uint32_t>(((1u << i) - 1u)
                                                                       << (m - i));
        w[column_index0_of_mask(m, mask)] += hi - lo;
    }
    return Measure::from_weights(m, std::move(w));
}

// Measure putting weight b_i on the column where only asset i moves up and
// the remaining 1 - sum(b) on the all-down column.  Asset i again moves up
// with probability exactly b_i.  Requires sum(b) <= 1 (MassOverflow
// otherwise); any order is accepted.
inline Measure lower_vertex_measure(const std::vector<double>& b, double tol = 1e-9) {
    detail::check_weights_in_unit_interval(b);
    const int m = static_cast<int>(b.size());
    double total = 0.0;
    for (double x : b) total += x;
    if (total > 1.0 + tol) {
        throw MassOverflow("up weights sum to " + std::to_string(total) +
                           "; the singleton construction needs at most 1");
    }
    std::vector<double> w(column_count(m), 0.0);
    for (int a = 0; a < m; ++a) {
        const std::uint32_t mask = 1u << (m - 1 - a);
        w[column_index0_of_mask(m, mask)] = b[a];
    }
    w[column_index0_of_mask(m, 0u)] = std::max(1.0 - total, 0.0);
    return Measure::from_weights(m, std::move(w));
}

// Piecewise-linear extension of a set function evaluated at a sorted weight
// vector.  Computed as the expectation under upper_vertex_measure, so the
// two agree bit for bit.
inline double lovasz_value(const SetFunction& f, const std::vector<double>& sorted_b) {
    if (f.num_assets != static_cast<int>(sorted_b.size())) {
        throw WrongDimension("set function and weight vector sizes differ");
    }
    return upper_vertex_measure(sorted_b).expect(f.values);
}

}  // namespace latb

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "latb/errors.hpp"
#include "latb/linprog.hpp"
#include "latb/market.hpp"
#include "latb/measures.hpp"
#include "latb/payoffs.hpp"
#include "latb/supermodular.hpp"

// Price bounds for European claims in the incomplete multi-asset binomial
// market.
//
// The market pins down no single fair price: every one-step martingale
// measure is admissible, so a claim has an interval of no-arbitrage prices.
// Its endpoints obey a backward recursion — a node's upper bound is the
// discounted maximum, over the one-step polytope, of the expected upper
// bounds one level deeper (and dually for the lower bound).  This file
// implements that recursion two ways:
//
//   * backward_induction_bounds: exact per-node linear programs, on the
//     recombinant lattice for path-independent claims and on the full prefix
//     tree otherwise.  Works for every claim.
//   * product_bounds_*: closed forms that price in one pass when the claim's
//     fibres are supermodular — the optimal measure is then the same
//     extremal vertex at every node, so the bound is an expectation under a
//     product measure, reduced to a multinomial sum over the support.
//
// The submodular_bounds wrappers reuse the same closed forms with the two
// supports swapped, which is the correct routing for fibrewise submodular
// claims.

namespace latb {

enum class Bound { Lower, Upper };

struct PriceInterval {
    double lower = 0.0;
    double upper = 0.0;
    // one-step measures attaining each bound at this node; empty (zero
    // assets) at terminal nodes and when a surface skips storing them
    Measure lower_measure;
    Measure upper_measure;
};

// ---------------------------------------------------------------------------
// Reusable one-step solver
// ---------------------------------------------------------------------------

// Holds one market's single-step polytope and prices claim-value vectors
// against it.  Every solve warm-starts phase 2 from the nested-chain support
// (sorted by up weight), which is a feasible basis of this system for every
// market, so repeated calls skip phase 1 entirely.  One instance per thread:
// the embedded solver holds mutable state.
class SingleStepLp {
public:
    explicit SingleStepLp(const MarketParams& p, double tol = 1e-9)
        : growth_(p.growth_factor), num_assets_(p.num_assets()), solver_(tol) {
        MartingaleSystem sys = martingale_constraints(p);
        lp_.constraints = std::move(sys.constraints);
        lp_.rhs = std::move(sys.rhs);
        lp_.objective.assign(lp_.constraints.cols, 0.0);

        RiskNeutralWeights w = risk_neutral_weights(p);
        std::uint32_t mask = 0;
        warm_basis_.push_back(column_index0_of_mask(num_assets_, mask));
        for (int i = 0; i < num_assets_; ++i) {
            mask |= 1u << (num_assets_ - 1 - w.by_weight[i]);
            warm_basis_.push_back(column_index0_of_mask(num_assets_, mask));
        }
    }

    int num_columns() const { return lp_.constraints.cols; }

    // Discounted extreme expectations of `claim_values` (one value per move
    // column) over the martingale polytope, with the attaining measures.
    PriceInterval bounds(const std::vector<double>& claim_values) {
        if (static_cast<int>(claim_values.size()) != num_columns()) {
            throw DimensionMismatch("expected " + std::to_string(num_columns()) +
                                    " claim values, got " + std::to_string(claim_values.size()));
        }
        lp_.objective = claim_values;
        lp_.sense = LpSense::Maximize;
        LpSolution hi = solver_.solve(lp_, warm_basis_);
        lp_.sense = LpSense::Minimize;
        LpSolution lo = solver_.solve(lp_, warm_basis_);

        PriceInterval out;
        out.upper = hi.value / growth_;
        out.lower = lo.value / growth_;
        out.upper_measure = Measure::from_weights(num_assets_, std::move(hi.point), 1e-7);
        out.lower_measure = Measure::from_weights(num_assets_, std::move(lo.point), 1e-7);
        return out;
    }

private:
    double growth_;
    int num_assets_;
    LpProblem lp_;
    std::vector<int> warm_basis_;
    SimplexSolver solver_;
};

// One-shot convenience wrapper.
inline PriceInterval single_step_bounds(const MarketParams& p,
                                        const std::vector<double>& claim_values,
                                        double tol = 1e-9) {
    return SingleStepLp(p, tol).bounds(claim_values);
}

// ---------------------------------------------------------------------------
// Two-asset interval
// ---------------------------------------------------------------------------

// For two assets the one-step polytope is a segment: measures
// (t, b1-t, b2-t, 1-b1-b2+t) for t between t_min = max(b1+b2-1, 0) and
// t_max = min(b1, b2).  Every extreme expectation sits at an endpoint.
struct TwoAssetInterval {
    double t_min = 0.0;
    double t_max = 0.0;
    Measure at_t_min;
    Measure at_t_max;
};

inline TwoAssetInterval two_asset_interval(const MarketParams& p) {
    if (p.num_assets() != 2) {
        throw DimensionError("the interval form needs exactly two assets");
    }
    RiskNeutralWeights w = risk_neutral_weights(p);
    const double b1 = w.b[0], b2 = w.b[1];
    TwoAssetInterval out;
    out.t_min = std::max(b1 + b2 - 1.0, 0.0);
    out.t_max = std::min(b1, b2);
    // endpoint weights written in cancellation-free form
    if (b1 + b2 > 1.0) {
        out.at_t_min = Measure::from_weights(2, {b1 + b2 - 1.0, 1.0 - b2, 1.0 - b1, 0.0});
    } else {
        out.at_t_min = Measure::from_weights(2, {0.0, b1, b2, 1.0 - b1 - b2});
    }
    if (b1 <= b2) {
        out.at_t_max = Measure::from_weights(2, {b1, 0.0, b2 - b1, 1.0 - b2});
    } else {
        out.at_t_max = Measure::from_weights(2, {b2, b1 - b2, 0.0, 1.0 - b1});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Extremal product supports
// ---------------------------------------------------------------------------

// A single-step measure listed by support: parallel arrays of column indices
// and masses.  The closed-form prices iterate over exactly these entries.
struct SupportMeasure {
    int num_assets = 0;
    std::vector<int> cols;
    std::vector<double> mass;

    Measure as_measure() const {
        std::vector<double> w(column_count(num_assets), 0.0);
        for (std::size_t i = 0; i < cols.size(); ++i) w[cols[i]] += mass[i];
        return Measure::from_weights(num_assets, std::move(w));
    }
};

// The chain support: entry i puts weight b_(i) - b_(i+1) on the column whose
// top i assets (by up weight) move up.  Maximizes every fibrewise
// supermodular claim.  Ties produce zero-mass entries, which stay listed so
// the entry count is always m+1.
inline SupportMeasure upper_support(const MarketParams& p) {
    RiskNeutralWeights w = risk_neutral_weights(p);
    const int m = p.num_assets();
    SupportMeasure sup;
    sup.num_assets = m;
    std::uint32_t mask = 0;
    for (int i = 0; i <= m; ++i) {
        const double hi = i == 0 ? 1.0 : w.b[w.by_weight[i - 1]];
        const double lo = i == m ? 0.0 : w.b[w.by_weight[i]];
        if (i > 0) mask |= 1u << (m - 1 - w.by_weight[i - 1]);
        sup.cols.push_back(column_index0_of_mask(m, mask));
        sup.mass.push_back(std::max(hi - lo, 0.0));
    }
    return sup;
}

// The singleton support: weight b_i on "only asset i up" plus the remainder
// on the all-down column; minimizes fibrewise supermodular claims.  Needs
// sum(b) <= 1.  For two assets the polytope is a segment, so the other
// interval endpoint takes over when the weights overflow; with more assets
// that case has no product-measure form and MassOverflow is thrown.
inline SupportMeasure lower_support(const MarketParams& p, double tol = 1e-9) {
    RiskNeutralWeights w = risk_neutral_weights(p);
    const int m = p.num_assets();
    const double total = w.total();
    SupportMeasure sup;
    sup.num_assets = m;
    if (total <= 1.0 + tol) {
        sup.cols.push_back(column_index0_of_mask(m, 0u));
        sup.mass.push_back(std::max(1.0 - total, 0.0));
        for (int a = 0; a < m; ++a) {
            sup.cols.push_back(column_index0_of_mask(m, 1u << (m - 1 - a)));
            sup.mass.push_back(w.b[a]);
        }
        return sup;
    }
    if (m == 2) {
        // interval endpoint t_min = b1 + b2 - 1 > 0: the all-down column
        // carries no mass
        sup.cols = {0, 1, 2};
        sup.mass = {w.b[0] + w.b[1] - 1.0, 1.0 - w.b[1], 1.0 - w.b[0]};
        return sup;
    }
    throw MassOverflow("up weights sum to " + std::to_string(total) +
                       " > 1 with " + std::to_string(m) +
                       " assets: no minimizing product measure exists");
}

inline Measure upper_extremal_measure(const MarketParams& p) {
    return upper_support(p).as_measure();
}

inline Measure lower_extremal_measure(const MarketParams& p) {
    return lower_support(p).as_measure();
}

// ---------------------------------------------------------------------------
// Closed-form product-measure prices
// ---------------------------------------------------------------------------

namespace detail {

// Sum of multinomial_coefficient * prod(mass^k) * terminal(node + moves)
// over all ways to split `horizon` steps among the support entries.  The
// coefficient is built incrementally as a product of binomials, so no
// factorial ever materializes.
template <class TerminalFn>
double composition_sum(const SupportMeasure& sup, const NodeId& node, int horizon,
                       TerminalFn&& terminal_at) {
    const int s = static_cast<int>(sup.cols.size());
    const int m = sup.num_assets;
    std::vector<std::uint32_t> up_masks(s);
    for (int j = 0; j < s; ++j) up_masks[j] = column_up_mask(m, sup.cols[j]);

    NodeId leaf{node.level + horizon, node.up_counts};
    double total = 0.0;
    auto bump = [&](int entry, int times) {
        for (int a = 0; a < m; ++a) {
            if (up_masks[entry] & (1u << (m - 1 - a))) leaf.up_counts[a] += times;
        }
    };
    auto rec = [&](auto&& self, int entry, int rem, double weight) -> void {
        if (entry == s - 1) {
            bump(entry, rem);
            double w = weight;
            for (int t = 0; t < rem; ++t) w *= sup.mass[entry];
            if (w != 0.0) total += w * terminal_at(leaf);
            bump(entry, -rem);
            return;
        }
        double binom = 1.0;  // C(rem, k), updated as k grows
        double mass_pow = 1.0;
        self(self, entry + 1, rem, weight);
        for (int k = 1; k <= rem; ++k) {
            bump(entry, 1);
            binom *= static_cast<double>(rem - k + 1) / static_cast<double>(k);
            mass_pow *= sup.mass[entry];
            self(self, entry + 1, rem - k, weight * binom * mass_pow);
        }
        bump(entry, -rem);
    };
    rec(rec, 0, horizon, 1.0);
    return total;
}

inline void check_composition_budget(int entries, int horizon, double max_terms) {
    const std::uint64_t cap = max_terms >= 1e18 ? std::uint64_t{1} << 62
                                                : static_cast<std::uint64_t>(max_terms);
    if (binomial_capped(horizon + entries - 1, entries - 1, cap) > cap) {
        throw BudgetExceeded("closed-form sum would exceed " + std::to_string(cap) + " terms");
    }
}

}  // namespace detail

// Closed-form bound for a path-independent claim at a lattice node, using
// the chain support (Bound::Upper) or singleton support (Bound::Lower).
// Correct exactly when the claim is fibrewise supermodular — callers route
// via certify().  Throws KindMismatch for path-dependent claims and
// MassOverflow when the lower support does not exist.
inline double product_bounds_path_independent(const MarketParams& p, const PayoffFn& payoff,
                                              const NodeId& node, Bound which,
                                              double max_terms = 16777216.0) {
    validate_params(p);
    payoff.validate(p);
    if (payoff.path_dependent()) {
        throw KindMismatch("path-dependent claims need the prefix-based closed form");
    }
    check_node(node, p);
    const int h = p.num_steps - node.level;
    SupportMeasure sup = which == Bound::Upper ? upper_support(p) : lower_support(p);
    detail::check_composition_budget(static_cast<int>(sup.cols.size()), h, max_terms);
    const double total = detail::composition_sum(
        sup, node, h, [&](const NodeId& leaf) { return evaluate_terminal(payoff, leaf, p); });
    return total / ipow(p.growth_factor, h);
}

// Same bound for any claim given a realized path prefix: sums over every
// support-valued completion of the path.
inline double product_bounds_path_dependent(const MarketParams& p, const PayoffFn& payoff,
                                            const std::vector<int>& prefix, Bound which,
                                            double max_terms = 16777216.0) {
    validate_params(p);
    payoff.validate(p);
    const int m = p.num_assets();
    const int n = p.num_steps;
    const int k = static_cast<int>(prefix.size());
    if (k > n) {
        throw PrefixLevelMismatch("prefix has " + std::to_string(k) + " steps, market has " +
                                  std::to_string(n));
    }
    for (int j0 : prefix) check_column_index0(m, j0);
    const int h = n - k;
    SupportMeasure sup = which == Bound::Upper ? upper_support(p) : lower_support(p);
    const int s = static_cast<int>(sup.cols.size());
    if (std::pow(static_cast<double>(s), h) > max_terms) {
        throw BudgetExceeded("closed-form sum would exceed " + std::to_string(max_terms) +
                             " terms");
    }

    Scenario scen;
    scen.num_assets = m;
    scen.cols.resize(n);
    std::copy(prefix.begin(), prefix.end(), scen.cols.begin());

    std::vector<int> digit(h, 0);
    double total = 0.0;
    while (true) {
        double weight = 1.0;
        for (int t = 0; t < h; ++t) {
            weight *= sup.mass[digit[t]];
            scen.cols[k + t] = sup.cols[digit[t]];
        }
        if (weight != 0.0) total += weight * evaluate(payoff, scen, p);
        int i = h - 1;
        while (i >= 0 && digit[i] == s - 1) digit[i--] = 0;
        if (i < 0) break;
        ++digit[i];
    }
    return total / ipow(p.growth_factor, h);
}

// Closed-form bounds for plain basket claims; a thin wrapper so callers who
// know their claim is a basket need not build a PayoffFn.  Identical to the
// general path-independent closed form, summand for summand.
inline double basket_bounds(const MarketParams& p, const std::vector<double>& weights,
                            double strike, const NodeId& node, PayoffKind kind, Bound which,
                            double max_terms = 16777216.0) {
    if (kind != PayoffKind::BasketCall && kind != PayoffKind::BasketPut) {
        throw KindMismatch("basket_bounds prices basket calls and puts only");
    }
    PayoffFn f = kind == PayoffKind::BasketCall ? PayoffFn::basket_call(weights, strike)
                                                : PayoffFn::basket_put(weights, strike);
    return product_bounds_path_independent(p, f, node, which, max_terms);
}

// Closed forms for fibrewise submodular claims: the optimal supports swap
// roles (the chain support now minimizes), so Upper needs the singleton
// support to exist — with more than two assets and overflowing weights it
// does not, and MassOverflow propagates.
inline double submodular_bounds(const MarketParams& p, const PayoffFn& payoff,
                                const NodeId& node, Bound which,
                                double max_terms = 16777216.0) {
    return product_bounds_path_independent(
        p, payoff, node, which == Bound::Upper ? Bound::Lower : Bound::Upper, max_terms);
}

inline double submodular_bounds(const MarketParams& p, const PayoffFn& payoff,
                                const std::vector<int>& prefix, Bound which,
                                double max_terms = 16777216.0) {
    return product_bounds_path_dependent(
        p, payoff, prefix, which == Bound::Upper ? Bound::Lower : Bound::Upper, max_terms);
}

// ---------------------------------------------------------------------------
// Backward induction over the whole lattice / tree
// ---------------------------------------------------------------------------

struct PricerOptions {
    double tol = 1e-9;
    int threads = 1;
    bool store_measures = true;    // keep per-node attaining measures
    int max_scenario_bits = 24;    // cap on m*n for full-tree runs
};

// Bounds at every node.  Path-independent claims live on the recombinant
// lattice (levels indexed by node_rank); path-dependent ones on the prefix
// tree (levels indexed by the prefix's scenario index).
struct BoundsSurface {
    bool path_dependent = false;
    int num_assets = 0;
    int num_steps = 0;
    bool has_measures = false;
    std::vector<std::vector<double>> lower;
    std::vector<std::vector<double>> upper;
    std::vector<std::vector<Measure>> lower_measures;  // empty at the terminal level
    std::vector<std::vector<Measure>> upper_measures;

    PriceInterval at(const NodeId& v) const {
        if (path_dependent) {
            throw KindMismatch("this surface is indexed by path prefix, not lattice node");
        }
        if (v.num_assets() != num_assets) {
            throw DimensionMismatch("node has " + std::to_string(v.num_assets()) +
                                    " assets, surface has " + std::to_string(num_assets));
        }
        if (v.level < 0 || v.level > num_steps) {
            throw LevelOverflow("level " + std::to_string(v.level) + " outside the surface");
        }
        for (int u : v.up_counts) {
            if (u < 0 || u > v.level) throw IndexOutOfRange("up count outside [0, level]");
        }
        return make_interval(v.level, node_rank(v));
    }

    PriceInterval at_prefix(const std::vector<int>& prefix) const {
        if (!path_dependent) {
            throw KindMismatch("this surface is indexed by lattice node, not path prefix");
        }
        const int k = static_cast<int>(prefix.size());
        if (k > num_steps) {
            throw PrefixLevelMismatch("prefix longer than the market's horizon");
        }
        std::uint64_t idx = 0;
        for (int j0 : prefix) {
            check_column_index0(num_assets, j0);
            idx = (idx << num_assets) | static_cast<std::uint64_t>(j0);
        }
        return make_interval(k, idx);
    }

    PriceInterval root() const { return make_interval(0, 0); }

private:
    PriceInterval make_interval(int level, std::uint64_t idx) const {
        if (idx >= lower[level].size()) {
            throw IndexOutOfRange("node index outside its level");
        }
        PriceInterval out;
        out.lower = lower[level][idx];
        out.upper = upper[level][idx];
        if (has_measures && level < num_steps) {
            out.lower_measure = lower_measures[level][idx];
            out.upper_measure = upper_measures[level][idx];
        }
        return out;
    }
};

// Exact per-node bounds by LP backward induction.  `force_tree` prices a
// path-independent claim on the full prefix tree anyway (the values then
// coincide across prefixes reaching the same node).
inline BoundsSurface backward_induction_bounds(const MarketParams& p, const PayoffFn& payoff,
                                               bool force_tree, PricerOptions opts = {}) {
    validate_params(p);
    payoff.validate(p);
    const int m = p.num_assets();
    const int n = p.num_steps;
    const int cols = column_count(m);
    const bool tree = payoff.path_dependent() || force_tree;

    BoundsSurface surface;
    surface.path_dependent = tree;
    surface.num_assets = m;
    surface.num_steps = n;
    surface.has_measures = opts.store_measures;
    surface.lower.resize(n + 1);
    surface.upper.resize(n + 1);
    if (opts.store_measures) {
        surface.lower_measures.resize(n + 1);
        surface.upper_measures.resize(n + 1);
    }

    if (tree && static_cast<long long>(m) * n > opts.max_scenario_bits) {
        throw BudgetExceeded("full-tree induction needs " + std::to_string(m * n) +
                             " scenario bits; budget is " +
                             std::to_string(opts.max_scenario_bits));
    }

    // ----- terminal values -----
    if (tree) {
        const std::uint64_t leaves = scenario_count(m, n);
        surface.lower[n].resize(leaves);
        Scenario scen;
        scen.num_assets = m;
        scen.cols.assign(n, 0);
        for (std::uint64_t idx = 0; idx < leaves; ++idx) {
            surface.lower[n][idx] = evaluate(payoff, scen, p);
            for (int t = n - 1; t >= 0; --t) {
                if (++scen.cols[t] < cols) break;
                scen.cols[t] = 0;
            }
        }
        surface.upper[n] = surface.lower[n];
    } else {
        const std::uint64_t leaves = level_node_count(m, n);
        surface.lower[n].resize(leaves);
        NodeId leaf{n, std::vector<int>(m, 0)};
        for (std::uint64_t idx = 0; idx < leaves; ++idx) {
            surface.lower[n][idx] = evaluate_terminal(payoff, leaf, p);
            for (int a = m - 1; a >= 0; --a) {
                if (++leaf.up_counts[a] <= n) break;
                leaf.up_counts[a] = 0;
            }
        }
        surface.upper[n] = surface.lower[n];
    }

    // ----- fold one level at a time -----
    for (int level = n - 1; level >= 0; --level) {
        const std::uint64_t count =
            tree ? scenario_count(m, level) : level_node_count(m, level);
        surface.lower[level].resize(count);
        surface.upper[level].resize(count);
        if (opts.store_measures) {
            surface.lower_measures[level].resize(count);
            surface.upper_measures[level].resize(count);
        }

        // successor rank machinery for the recombinant case
        std::vector<std::uint64_t> stride(m, 1);
        std::vector<std::uint64_t> succ_offset(cols, 0);
        if (!tree) {
            for (int i = m - 2; i >= 0; --i) {
                stride[i] = stride[i + 1] * static_cast<std::uint64_t>(level + 2);
            }
            for (int j0 = 0; j0 < cols; ++j0) {
                for (int i = 0; i < m; ++i) {
                    if (column_up(m, j0, i)) succ_offset[j0] += stride[i];
                }
            }
        }

        const auto fold_chunk = [&](SingleStepLp& lp, std::uint64_t idx) {
            std::vector<double> up_values(cols), lo_values(cols);
            if (tree) {
                const std::uint64_t base = idx << m;
                for (int j0 = 0; j0 < cols; ++j0) {
                    up_values[j0] = surface.upper[level + 1][base + j0];
                    lo_values[j0] = surface.lower[level + 1][base + j0];
                }
            } else {
                // decode the node's up counts from its rank, then place
                // successors by precomputed offsets
                std::uint64_t rest = idx;
                std::uint64_t base = 0;
                for (int i = m - 1; i >= 0; --i) {
                    const std::uint64_t u = rest % static_cast<std::uint64_t>(level + 1);
                    rest /= static_cast<std::uint64_t>(level + 1);
                    base += u * stride[i];
                }
                for (int j0 = 0; j0 < cols; ++j0) {
                    up_values[j0] = surface.upper[level + 1][base + succ_offset[j0]];
                    lo_values[j0] = surface.lower[level + 1][base + succ_offset[j0]];
                }
            }
            PriceInterval up_side = lp.bounds(up_values);
            PriceInterval lo_side = lp.bounds(lo_values);
            surface.upper[level][idx] = up_side.upper;
            surface.lower[level][idx] = lo_side.lower;
            if (opts.store_measures) {
                surface.upper_measures[level][idx] = std::move(up_side.upper_measure);
                surface.lower_measures[level][idx] = std::move(lo_side.lower_measure);
            }
        };

        if (opts.threads <= 1 || count < 32) {
            SingleStepLp lp(p, opts.tol);
            for (std::uint64_t idx = 0; idx < count; ++idx) fold_chunk(lp, idx);
        } else {
            const int workers = opts.threads;
            std::exception_ptr first_error;
            std::mutex error_mutex;
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int t = 0; t < workers; ++t) {
                const std::uint64_t begin = count * t / workers;
                const std::uint64_t end = count * (t + 1) / workers;
                pool.emplace_back([&, begin, end]() {
                    try {
                        SingleStepLp lp(p, opts.tol);
                        for (std::uint64_t i = begin; i < end; ++i) fold_chunk(lp, i);
                    } catch (...) {
                        std::lock_guard<std::mutex> hold(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            if (first_error) std::rethrow_exception(first_error);
        }
    }
    return surface;
}

inline BoundsSurface backward_induction_bounds(const MarketParams& p, const PayoffFn& payoff,
                                               PricerOptions opts = {}) {
    return backward_induction_bounds(p, payoff, /*force_tree=*/false, opts);
}

}  // namespace latb

// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Prints a summary and exits non-zero when any criterion fails.  Each
// criterion has a wall-clock budget that is part of the check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "latb/cli.hpp"
#include "latb/linprog.hpp"
#include "latb/market.hpp"
#include "latb/measures.hpp"
#include "latb/payoffs.hpp"
#include "latb/pricer.hpp"
#include "latb/supermodular.hpp"
#include "test_support.hpp"

using namespace latb;
using latb::testing::market_from_weights;
using latb::testing::random_market;
using latb::testing::random_supermodular;
using latb::testing::spread_market;

namespace {

struct Checker {
    bool ok = true;
    int failures = 0;
    std::string first;

    void expect(bool cond, const std::string& msg) {
        if (cond) return;
        ++failures;
        if (ok) first = msg;
        ok = false;
    }

    void near(double a, double b, double tol, const std::string& msg) {
        std::ostringstream os;
        os << msg << ": " << a << " vs " << b << " (tol " << tol << ")";
        expect(std::abs(a - b) <= tol, os.str());
    }
};

std::vector<double> equal_weights(int m) { return std::vector<double>(m, 1.0 / m); }

// every path prefix of the given length, in scenario-index order
std::vector<std::vector<int>> prefixes_of(int m, int len) {
    std::vector<std::vector<int>> out;
    const std::uint64_t count = scenario_count(m, len);
    for (std::uint64_t q = 0; q < count; ++q) {
        std::vector<int> prefix(len);
        for (int t = 0; t < len; ++t) {
            prefix[t] = static_cast<int>((q >> (static_cast<unsigned>(m) * (len - 1 - t))) &
                                         ((std::uint64_t{1} << m) - 1));
        }
        out.push_back(std::move(prefix));
    }
    return out;
}

// ---------------------------------------------------------------------------
// 1. the standing two-asset example: hand-computed claim vectors behind the
//    first two moves, and a certificate refusing both labels
// ---------------------------------------------------------------------------
Checker criterion_worked_example() {
    Checker c;
    MarketParams p = spread_market(2);
    PayoffFn f = PayoffFn::spread({0.5, 0.5}, 100.0, 110.0);

    const std::vector<double> after_both_up = {10.0, 10.0, 7.5125, 0.0};
    const std::vector<double> after_up_down = {10.0, 8.45, 0.0, 0.0};
    NodeId both_up = node_successor(root_node(2), 0);
    NodeId up_down = node_successor(root_node(2), 1);
    for (int j0 = 0; j0 < 4; ++j0) {
        c.near(evaluate_terminal(f, node_successor(both_up, j0), p), after_both_up[j0], 1e-12,
               "claim behind the both-up move, column " + std::to_string(j0 + 1));
        c.near(evaluate_terminal(f, node_successor(up_down, j0), p), after_up_down[j0], 1e-12,
               "claim behind the up-down move, column " + std::to_string(j0 + 1));
    }

    CertifyResult cert = certify(f, p);
    c.expect(cert.certificate == Certificate::Neither,
             std::string("spread certificate should be neither, got ") +
                 certificate_name(cert.certificate));
    c.expect(cert.witness.has_value(), "a refusal must carry a witness");
    return c;
}

// ---------------------------------------------------------------------------
// 2. single-step bounds coincide with the two-asset interval endpoints
// ---------------------------------------------------------------------------
Checker criterion_interval_endpoints() {
    Checker c;
    std::mt19937 rng(101);
    std::uniform_real_distribution<double> val(-10.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        MarketParams p = random_market(rng, 2, 1);
        std::vector<double> claim(4);
        for (double& x : claim) x = val(rng);
        TwoAssetInterval seg = two_asset_interval(p);
        const double a = seg.at_t_min.expect(claim);
        const double b = seg.at_t_max.expect(claim);
        PriceInterval iv = single_step_bounds(p, claim);
        c.near(iv.upper, std::max(a, b) / p.growth_factor, 1e-9,
               "upper endpoint, trial " + std::to_string(trial));
        c.near(iv.lower, std::min(a, b) / p.growth_factor, 1e-9,
               "lower endpoint, trial " + std::to_string(trial));
        if (!c.ok) break;
    }
    return c;
}

// ---------------------------------------------------------------------------
// 3. the extremal product measures are unit-mass martingale measures with
//    the market's up-weight moments
// ---------------------------------------------------------------------------
Checker criterion_extremal_moments() {
    Checker c;
    std::mt19937 rng(202);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 8);
        std::vector<double> b(m);
        for (double& x : b) x = 0.05 + 0.9 * u01(rng);
        const bool shrink = trial % 2 == 0;
        if (shrink) {
            double total = 0.0;
            for (double x : b) total += x;
            const double target = 0.2 + 0.75 * u01(rng);
            for (double& x : b) x *= target / total;
        }
        MarketParams p = market_from_weights(b, 1);
        RiskNeutralWeights w = risk_neutral_weights(p);

        auto check_support = [&](const SupportMeasure& sup, const char* label) {
            double total = 0.0;
            std::vector<double> moment(m, 0.0);
            for (std::size_t i = 0; i < sup.cols.size(); ++i) {
                total += sup.mass[i];
                for (int a = 0; a < m; ++a) {
                    if (column_up(m, sup.cols[i], a)) moment[a] += sup.mass[i];
                }
            }
            c.near(total, 1.0, 1e-12, std::string(label) + " total mass, trial " +
                                          std::to_string(trial));
            for (int a = 0; a < m; ++a) {
                c.near(moment[a], w.b[a], 1e-12,
                       std::string(label) + " moment of asset " + std::to_string(a + 1) +
                           ", trial " + std::to_string(trial));
            }
            c.expect(is_martingale(sup.as_measure(), p),
                     std::string(label) + " must be a martingale measure, trial " +
                         std::to_string(trial));
        };

        check_support(upper_support(p), "chain support");
        if (w.total() <= 1.0 || m == 2) check_support(lower_support(p), "singleton support");
        if (!c.ok) break;
    }
    return c;
}

// ---------------------------------------------------------------------------
// 4. the LP induction and the closed forms agree at every node for basket
//    and average claims
// ---------------------------------------------------------------------------
Checker criterion_route_agreement() {
    Checker c;
    for (int n = 1; n <= 4 && c.ok; ++n) {
        std::vector<MarketParams> markets = {spread_market(n),
                                             market_from_weights({0.4, 0.3, 0.2}, n)};
        for (const MarketParams& p : markets) {
            const int m = p.num_assets();
            const bool lower_ok = risk_neutral_weights(p).total() <= 1.0 || m == 2;

            for (PayoffFn f : {PayoffFn::basket_call(equal_weights(m), 95.0),
                               PayoffFn::basket_put(equal_weights(m), 105.0)}) {
                BoundsSurface s = backward_induction_bounds(p, f);
                for (int level = 0; level <= n; ++level) {
                    for (const NodeId& v : enumerate_level(m, level)) {
                        c.near(s.at(v).upper,
                               product_bounds_path_independent(p, f, v, Bound::Upper), 1e-8,
                               payoff_kind_name(f.kind) + std::string(" upper, m=") +
                                   std::to_string(m) + " n=" + std::to_string(n));
                        if (lower_ok) {
                            c.near(s.at(v).lower,
                                   product_bounds_path_independent(p, f, v, Bound::Lower),
                                   1e-8,
                                   payoff_kind_name(f.kind) + std::string(" lower, m=") +
                                       std::to_string(m) + " n=" + std::to_string(n));
                        }
                    }
                }
                if (!c.ok) return c;
            }

            for (PayoffFn f : {PayoffFn::asian_call({equal_weights(m)}, 95.0),
                               PayoffFn::asian_put({equal_weights(m)}, 100.0)}) {
                BoundsSurface s = backward_induction_bounds(p, f);
                for (int level = 0; level <= n; ++level) {
                    for (const auto& prefix : prefixes_of(m, level)) {
                        PriceInterval iv = s.at_prefix(prefix);
                        c.near(iv.upper,
                               product_bounds_path_dependent(p, f, prefix, Bound::Upper),
                               1e-8,
                               payoff_kind_name(f.kind) + std::string(" upper, m=") +
                                   std::to_string(m) + " n=" + std::to_string(n));
                        if (lower_ok) {
                            c.near(iv.lower,
                                   product_bounds_path_dependent(p, f, prefix, Bound::Lower),
                                   1e-8,
                                   payoff_kind_name(f.kind) + std::string(" lower, m=") +
                                       std::to_string(m) + " n=" + std::to_string(n));
                        }
                    }
                }
                if (!c.ok) return c;
            }
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 5. for supermodular single-step claims the LP optimum sits at an
//    enumerated polytope vertex, and the chain measure attains the maximum
// ---------------------------------------------------------------------------
Checker criterion_vertex_optimality() {
    Checker c;
    std::mt19937 rng(303);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 200 && c.ok; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 5);
        std::vector<double> b(m);
        for (double& x : b) x = 0.1 + 0.8 * u01(rng);
        MarketParams p = market_from_weights(b, 1);
        SetFunction f = random_supermodular(rng, m);

        PriceInterval iv = single_step_bounds(p, f.values);
        MartingaleSystem sys = martingale_constraints(p);
        std::vector<std::vector<double>> verts =
            enumerate_vertices(sys.constraints, sys.rhs);
        c.expect(!verts.empty(), "no vertices found, trial " + std::to_string(trial));

        double best = -1e300, worst = 1e300;
        for (const auto& q : verts) {
            double e = 0.0;
            for (std::size_t j = 0; j < q.size(); ++j) e += q[j] * f.values[j];
            best = std::max(best, e);
            worst = std::min(worst, e);
        }
        const double R = p.growth_factor;
        c.near(iv.upper * R, best, 1e-9, "max vs best vertex, trial " + std::to_string(trial));
        c.near(iv.lower * R, worst, 1e-9,
               "min vs worst vertex, trial " + std::to_string(trial));

        SupportMeasure chain = upper_support(p);
        double chain_value = 0.0;
        for (std::size_t i = 0; i < chain.cols.size(); ++i) {
            chain_value += chain.mass[i] * f.values[chain.cols[i]];
        }
        c.near(chain_value, best, 1e-9,
               "chain measure must attain the max, trial " + std::to_string(trial));

        RiskNeutralWeights w = risk_neutral_weights(p);
        if (w.total() <= 1.0 || m == 2) {
            SupportMeasure single = lower_support(p);
            double low_value = 0.0;
            for (std::size_t i = 0; i < single.cols.size(); ++i) {
                low_value += single.mass[i] * f.values[single.cols[i]];
            }
            c.near(low_value, worst, 1e-9,
                   "singleton measure must attain the min, trial " + std::to_string(trial));
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 6. iterating the extremal one-step measure over the lattice reproduces the
//    closed-form bound at every node
// ---------------------------------------------------------------------------
Checker criterion_iterated_expectations() {
    Checker c;
    for (int m = 1; m <= 3 && c.ok; ++m) {
        for (int n = 1; n <= 3 && c.ok; ++n) {
            MarketParams p = m == 1   ? market_from_weights({0.7}, n)
                             : m == 2 ? spread_market(n)
                                      : market_from_weights({0.4, 0.3, 0.2}, n);
            PayoffFn f = PayoffFn::basket_call(equal_weights(m), 95.0);
            auto terminal = [&](const NodeId& v) { return evaluate_terminal(f, v, p); };

            Measure hi = upper_extremal_measure(p);
            Measure lo = lower_extremal_measure(p);  // m<=2 here, so it always exists
            for (int level = 0; level <= n; ++level) {
                for (const NodeId& v : enumerate_level(m, level)) {
                    const double growth = ipow(p.growth_factor, n - level);
                    c.near(conditional_expectation(terminal, v, hi, p),
                           product_bounds_path_independent(p, f, v, Bound::Upper) * growth,
                           1e-8,
                           "upper fold m=" + std::to_string(m) + " n=" + std::to_string(n));
                    c.near(conditional_expectation(terminal, v, lo, p),
                           product_bounds_path_independent(p, f, v, Bound::Lower) * growth,
                           1e-8,
                           "lower fold m=" + std::to_string(m) + " n=" + std::to_string(n));
                }
            }
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 7. the per-node recursion solves the global problem: a single LP over
//    whole-path measures with every conditional constraint gives the same
//    root bounds
// ---------------------------------------------------------------------------
struct GlobalSystem {
    Matrix constraints;
    std::vector<double> rhs;
};

GlobalSystem global_martingale_system(const MarketParams& p) {
    const int m = p.num_assets();
    const int n = p.num_steps;
    const std::uint64_t vars = scenario_count(m, n);
    std::size_t rows = 1;
    for (int k = 0; k < n; ++k) rows += static_cast<std::size_t>(scenario_count(m, k)) * m;

    PsiMatrix psi = build_psi(p);
    GlobalSystem g{Matrix(static_cast<int>(rows), static_cast<int>(vars)),
                   std::vector<double>(rows, 0.0)};
    int row = 0;
    for (int k = 0; k < n; ++k) {
        const std::uint64_t prefix_count = scenario_count(m, k);
        for (std::uint64_t q = 0; q < prefix_count; ++q) {
            for (int i = 0; i < m; ++i, ++row) {
                for (std::uint64_t s = 0; s < vars; ++s) {
                    if ((s >> (static_cast<unsigned>(m) * (n - k))) != q) continue;
                    const int col = static_cast<int>(
                        (s >> (static_cast<unsigned>(m) * (n - k - 1))) &
                        ((std::uint64_t{1} << m) - 1));
                    g.constraints.at(row, static_cast<int>(s)) =
                        psi.ratios.at(i, col) - p.growth_factor;
                }
            }
        }
    }
    for (std::uint64_t s = 0; s < vars; ++s) g.constraints.at(row, static_cast<int>(s)) = 1.0;
    g.rhs[row] = 1.0;
    return g;
}

Checker criterion_global_program() {
    Checker c;
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> val(0.0, 10.0);

    std::vector<std::pair<int, int>> shapes;
    for (int m = 1; m <= 8; ++m) {
        for (int n = 1; m * n <= 8; ++n) shapes.emplace_back(m, n);
    }
    // shapes whose global polytope is small enough to enumerate outright
    auto can_enumerate = [](int m, int n) {
        if (m == 1) return true;
        if (m == 2) return n <= 2;
        return n == 1 && m <= 5;
    };

    for (auto [m, n] : shapes) {
        std::vector<double> b(m);
        for (int i = 0; i < m; ++i) b[i] = 0.15 + 0.6 * (i + 1.0) / (m + 1.0);
        MarketParams p = market_from_weights(b, n);
        GlobalSystem g = global_martingale_system(p);
        const std::uint64_t vars = scenario_count(m, n);

        // one path-independent and one path-dependent claim
        std::vector<double> node_table(level_node_count(m, n));
        for (double& x : node_table) x = val(rng);
        std::vector<double> path_table(vars);
        for (double& x : path_table) x = val(rng);

        for (int which = 0; which < 2; ++which) {
            PayoffFn f = which == 0 ? PayoffFn::table_terminal(node_table)
                                    : PayoffFn::table_path(path_table);
            // objective per scenario
            LpProblem lp;
            lp.constraints = g.constraints;
            lp.rhs = g.rhs;
            lp.objective.resize(vars);
            Scenario scen;
            scen.num_assets = m;
            scen.cols.assign(n, 0);
            for (std::uint64_t s = 0; s < vars; ++s) {
                lp.objective[s] = evaluate(f, scen, p);
                for (int t = n - 1; t >= 0; --t) {
                    if (++scen.cols[t] < column_count(m)) break;
                    scen.cols[t] = 0;
                }
            }

            SimplexSolver solver;
            lp.sense = LpSense::Maximize;
            const double global_hi = solver.solve(lp).value;
            lp.sense = LpSense::Minimize;
            const double global_lo = solver.solve(lp).value;

            BoundsSurface s = backward_induction_bounds(p, f);
            const double disc = ipow(p.growth_factor, n);
            const std::string tag = std::string(which == 0 ? "node" : "path") + " claim m=" +
                                    std::to_string(m) + " n=" + std::to_string(n);
            c.near(s.root().upper, global_hi / disc, 1e-8, "global max, " + tag);
            c.near(s.root().lower, global_lo / disc, 1e-8, "global min, " + tag);

            if (can_enumerate(m, n)) {
                std::vector<std::vector<double>> verts =
                    enumerate_vertices(g.constraints, g.rhs);
                double best = -1e300, worst = 1e300;
                for (const auto& q : verts) {
                    double e = 0.0;
                    for (std::uint64_t s2 = 0; s2 < vars; ++s2) e += q[s2] * lp.objective[s2];
                    best = std::max(best, e);
                    worst = std::min(worst, e);
                }
                c.near(global_hi, best, 1e-8, "vertex max, " + tag);
                c.near(global_lo, worst, 1e-8, "vertex min, " + tag);
            }
            if (!c.ok) return c;
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 8. the composition sums are exactly normalized: the unit claim prices to
//    one (after undoing the discount) through every support
// ---------------------------------------------------------------------------
Checker criterion_unit_claim() {
    Checker c;
    std::vector<std::vector<double>> weight_sets = {
        {0.6},
        {0.55, 0.48},          // two assets, overflowing: fallback lower support
        {0.3, 0.25},           // two assets, slack
        {0.35, 0.3, 0.25},     // three assets, slack
        {0.3, 0.3, 0.3},       // tied weights
        {0.3, 0.25, 0.2, 0.15},
        {0.5, 0.45, 0.4, 0.35},  // overflowing with four assets: upper only
    };
    for (const auto& b : weight_sets) {
        const int m = static_cast<int>(b.size());
        double total = 0.0;
        for (double x : b) total += x;
        const bool lower_ok = total <= 1.0 || m == 2;
        for (int n = 1; n <= 10 && c.ok; ++n) {
            MarketParams p = market_from_weights(b, n);
            PayoffFn f =
                PayoffFn::table_terminal(std::vector<double>(level_node_count(m, n), 1.0));
            const double growth = ipow(p.growth_factor, n);
            const std::string tag = "m=" + std::to_string(m) + " n=" + std::to_string(n);
            c.near(product_bounds_path_independent(p, f, root_node(m), Bound::Upper) * growth,
                   1.0, 1e-12, "unit claim through the chain support, " + tag);
            if (lower_ok) {
                c.near(product_bounds_path_independent(p, f, root_node(m), Bound::Lower) *
                           growth,
                       1.0, 1e-12, "unit claim through the singleton support, " + tag);
            }
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// 9. scale: vertex reporting stays responsive at twelve assets, and the full
//    LP induction handles five assets over eight steps
// ---------------------------------------------------------------------------
Checker criterion_scale() {
    Checker c;
    using clock = std::chrono::steady_clock;

    {
        RunConfig cfg;
        cfg.market.growth_factor = 1.01;
        cfg.market.num_steps = 1;
        for (int i = 0; i < 12; ++i) {
            cfg.market.assets.push_back({100.0, 1.2 + 0.01 * i, 0.8 + 0.005 * i});
        }
        cfg.payoff = PayoffFn::basket_call(equal_weights(12), 100.0);
        const auto start = clock::now();
        RunResult r = run_vertices(cfg);
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        c.expect(r.exit_code == 0, "vertex command failed: " + r.err);
        c.expect(r.out.find(",extremal,") != std::string::npos,
                 "twelve assets should fall back to the extremal rows");
        c.expect(secs < 60.0,
                 "vertex command took " + std::to_string(secs) + "s (budget 60s)");
    }

    {
        MarketParams p = market_from_weights({0.3, 0.25, 0.2, 0.15, 0.05}, 8);
        PayoffFn f = PayoffFn::basket_call(equal_weights(5), 100.0);
        PricerOptions opts;
        opts.store_measures = false;
        const auto start = clock::now();
        BoundsSurface s = backward_induction_bounds(p, f, opts);
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        c.expect(secs < 60.0,
                 "five-asset induction took " + std::to_string(secs) + "s (budget 60s)");
        c.expect(s.root().lower <= s.root().upper + 1e-9, "bounds out of order at the root");
        c.near(s.root().upper,
               product_bounds_path_independent(p, f, root_node(5), Bound::Upper), 1e-8,
               "five-asset upper vs closed form");
        c.near(s.root().lower,
               product_bounds_path_independent(p, f, root_node(5), Bound::Lower), 1e-8,
               "five-asset lower vs closed form");
    }
    return c;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        double budget_seconds;
        Checker (*run)();
    };
    const Entry entries[] = {
        {"1. worked two-asset example and its certificate", 1.0, criterion_worked_example},
        {"2. single-step bounds hit the interval endpoints", 5.0,
         criterion_interval_endpoints},
        {"3. extremal measures carry the up-weight moments", 5.0, criterion_extremal_moments},
        {"4. LP induction agrees with the closed forms", 60.0, criterion_route_agreement},
        {"5. single-step optima sit at polytope vertices", 30.0, criterion_vertex_optimality},
        {"6. iterated extremal expectations match node bounds", 30.0,
         criterion_iterated_expectations},
        {"7. root bounds solve the global path-measure program", 60.0,
         criterion_global_program},
        {"8. composition sums stay normalized on the unit claim", 10.0,
         criterion_unit_claim},
        {"9. large instances finish within budget", 120.0, criterion_scale},
    };

    bool all_ok = true;
    for (const Entry& e : entries) {
        const auto start = std::chrono::steady_clock::now();
        Checker c;
        try {
            c = e.run();
        } catch (const std::exception& ex) {
            c.expect(false, std::string("unexpected exception: ") + ex.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs > e.budget_seconds) {
            c.expect(false, "criterion exceeded its " + std::to_string(e.budget_seconds) +
                                "s budget (" + std::to_string(secs) + "s)");
        }
        if (c.ok) {
            std::printf("PASS  %s (%.2fs)\n", e.name, secs);
        } else {
            std::printf("FAIL  %s (%.2fs): %d check(s) failed; first: %s\n", e.name, secs,
                        c.failures, c.first.c_str());
            all_ok = false;
        }
    }
    return all_ok ? 0 : 1;
}

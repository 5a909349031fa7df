#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "latb/errors.hpp"
#include "latb/market.hpp"
#include "latb/supermodular.hpp"

// The claim catalogue.  A PayoffFn is a tagged value describing one European
// claim; `evaluate` prices it on a full scenario and `evaluate_terminal` on a
// terminal lattice node (path-independent kinds only).  `certify` classifies
// the claim's one-step fibres — supermodular, submodular, both (modular), or
// neither — which is what decides whether the closed-form pricing routes
// apply.  Standard kinds are certified structurally; tabulated claims go
// through the exhaustive fibre sweep.

namespace latb {

enum class PayoffKind {
    BasketCall,      // (sum_i a_i S_i(n) - K)^+
    BasketPut,       // (K - sum_i a_i S_i(n))^+
    AsianArithCall,  // ((1/n) sum_k sum_i a_ki S_i(k) - K)^+
    AsianArithPut,
    Spread,          // basket call at strike_low minus basket call at strike_high
    TableTerminal,   // arbitrary values per terminal node
    TablePath,       // arbitrary values per scenario
};

inline const char* payoff_kind_name(PayoffKind k) {
    switch (k) {
        case PayoffKind::BasketCall: return "basket_call";
        case PayoffKind::BasketPut: return "basket_put";
        case PayoffKind::AsianArithCall: return "asian_arith_call";
        case PayoffKind::AsianArithPut: return "asian_arith_put";
        case PayoffKind::Spread: return "spread";
        case PayoffKind::TableTerminal: return "table_terminal";
        case PayoffKind::TablePath: return "table_path";
    }
    return "unknown";
}

struct PayoffFn {
    PayoffKind kind = PayoffKind::BasketCall;
    std::vector<double> weights;                   // basket/spread: one weight per asset
    std::vector<std::vector<double>> step_weights; // Asian: per step (or one broadcast row)
    double strike = 0.0;
    double strike_high = 0.0;                      // spread only
    std::vector<double> table;                     // table kinds

    static PayoffFn basket_call(std::vector<double> w, double k) {
        PayoffFn f;
        f.kind = PayoffKind::BasketCall;
        f.weights = std::move(w);
        f.strike = k;
        return f;
    }
    static PayoffFn basket_put(std::vector<double> w, double k) {
        PayoffFn f = basket_call(std::move(w), k);
        f.kind = PayoffKind::BasketPut;
        return f;
    }
    static PayoffFn asian_call(std::vector<std::vector<double>> w, double k) {
        PayoffFn f;
        f.kind = PayoffKind::AsianArithCall;
        f.step_weights = std::move(w);
        f.strike = k;
        return f;
    }
    static PayoffFn asian_put(std::vector<std::vector<double>> w, double k) {
        PayoffFn f = asian_call(std::move(w), k);
        f.kind = PayoffKind::AsianArithPut;
        return f;
    }
    static PayoffFn spread(std::vector<double> w, double k_low, double k_high) {
        PayoffFn f;
        f.kind = PayoffKind::Spread;
        f.weights = std::move(w);
        f.strike = k_low;
        f.strike_high = k_high;
        return f;
    }
    static PayoffFn table_terminal(std::vector<double> values) {
        PayoffFn f;
        f.kind = PayoffKind::TableTerminal;
        f.table = std::move(values);
        return f;
    }
    static PayoffFn table_path(std::vector<double> values) {
        PayoffFn f;
        f.kind = PayoffKind::TablePath;
        f.table = std::move(values);
        return f;
    }

    bool path_dependent() const {
        return kind == PayoffKind::AsianArithCall || kind == PayoffKind::AsianArithPut ||
               kind == PayoffKind::TablePath;
    }

    // Checks the payoff against a market.  Throws WeightError, WrongDimension,
    // or OutOfRange.
    void validate(const MarketParams& p) const {
        const int m = p.num_assets();
        auto check_weight_row = [&](const std::vector<double>& w) {
            if (static_cast<int>(w.size()) != m) {
                throw WeightError("expected " + std::to_string(m) + " weights, got " +
                                  std::to_string(w.size()));
            }
            bool any = false;
            for (double x : w) {
                if (!std::isfinite(x) || x < 0.0) {
                    throw WeightError("weights must be finite and non-negative");
                }
                any = any || x > 0.0;
            }
            if (!any) throw WeightError("weights must not all be zero");
        };
        switch (kind) {
            case PayoffKind::BasketCall:
            case PayoffKind::BasketPut:
                check_weight_row(weights);
                break;
            case PayoffKind::Spread:
                check_weight_row(weights);
                if (!(strike_high >= strike)) {
                    throw OutOfRange("spread needs strike_low <= strike_high");
                }
                break;
            case PayoffKind::AsianArithCall:
            case PayoffKind::AsianArithPut: {
                if (step_weights.empty() ||
                    (step_weights.size() != 1 &&
                     static_cast<int>(step_weights.size()) != p.num_steps)) {
                    throw WeightError("per-step weights need 1 or " +
                                      std::to_string(p.num_steps) + " rows, got " +
                                      std::to_string(step_weights.size()));
                }
                bool any = false;
                for (const auto& row : step_weights) {
                    if (static_cast<int>(row.size()) != m) {
                        throw WeightError("per-step weight rows need " + std::to_string(m) +
                                          " entries");
                    }
                    for (double x : row) {
                        if (!std::isfinite(x) || x < 0.0) {
                            throw WeightError("weights must be finite and non-negative");
                        }
                        any = any || x > 0.0;
                    }
                }
                if (!any) throw WeightError("weights must not all be zero");
                break;
            }
            case PayoffKind::TableTerminal:
                if (table.size() != level_node_count(m, p.num_steps)) {
                    throw WrongDimension("terminal table needs " +
                                         std::to_string(level_node_count(m, p.num_steps)) +
                                         " values, got " + std::to_string(table.size()));
                }
                break;
            case PayoffKind::TablePath:
                if (table.size() != scenario_count(m, p.num_steps)) {
                    throw WrongDimension("path table needs " +
                                         std::to_string(scenario_count(m, p.num_steps)) +
                                         " values, got " + std::to_string(table.size()));
                }
                break;
        }
    }
};

namespace detail {

inline double basket_at(const std::vector<double>& w, const MarketParams& p, const NodeId& v) {
    double s = 0.0;
    for (int i = 0; i < p.num_assets(); ++i) {
        if (w[i] != 0.0) s += w[i] * asset_price(p, v, i);
    }
    return s;
}

}  // namespace detail

// Value of a path-independent claim at a terminal node (level must equal the
// market's step count).  Throws KindMismatch for path-dependent kinds.
inline double evaluate_terminal(const PayoffFn& f, const NodeId& v, const MarketParams& p) {
    f.validate(p);
    check_node(v, p);
    if (v.level != p.num_steps) {
        throw LevelOverflow("terminal payoffs are defined at level " +
                            std::to_string(p.num_steps) + ", got " + std::to_string(v.level));
    }
    switch (f.kind) {
        case PayoffKind::BasketCall:
            return std::max(detail::basket_at(f.weights, p, v) - f.strike, 0.0);
        case PayoffKind::BasketPut:
            return std::max(f.strike - detail::basket_at(f.weights, p, v), 0.0);
        case PayoffKind::Spread: {
            const double b = detail::basket_at(f.weights, p, v);
            return std::max(b - f.strike, 0.0) - std::max(b - f.strike_high, 0.0);
        }
        case PayoffKind::TableTerminal:
            return f.table[node_rank(v)];
        default:
            throw KindMismatch(std::string(payoff_kind_name(f.kind)) +
                               " is path dependent; evaluate it on a scenario");
    }
}

// Value of any claim on a full scenario.
inline double evaluate(const PayoffFn& f, const Scenario& s, const MarketParams& p) {
    f.validate(p);
    const int m = p.num_assets();
    const int n = p.num_steps;
    if (s.num_assets != m || s.num_steps() != n) {
        throw DimensionMismatch("scenario does not match the market's dimensions");
    }
    switch (f.kind) {
        case PayoffKind::BasketCall:
        case PayoffKind::BasketPut:
        case PayoffKind::Spread:
        case PayoffKind::TableTerminal:
            return evaluate_terminal(f, node_after_prefix(m, s.cols, n), p);
        case PayoffKind::TablePath:
            return f.table[index_of_scenario(s)];
        case PayoffKind::AsianArithCall:
        case PayoffKind::AsianArithPut: {
            std::vector<double> price(m);
            for (int i = 0; i < m; ++i) price[i] = p.assets[i].initial_price;
            double avg = 0.0;
            for (int k = 0; k < n; ++k) {
                const auto& row = f.step_weights[f.step_weights.size() == 1 ? 0 : k];
                for (int i = 0; i < m; ++i) {
                    price[i] *= s.up(k, i) ? p.assets[i].up_ratio : p.assets[i].down_ratio;
                    avg += row[i] * price[i];
                }
            }
            avg /= n;
            return f.kind == PayoffKind::AsianArithCall ? std::max(avg - f.strike, 0.0)
                                                        : std::max(f.strike - avg, 0.0);
        }
    }
    throw KindMismatch("unhandled payoff kind");
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

enum class Certificate { Supermodular, Submodular, Modular, Neither, Unknown };

inline const char* certificate_name(Certificate c) {
    switch (c) {
        case Certificate::Supermodular: return "Supermodular";
        case Certificate::Submodular: return "Submodular";
        case Certificate::Modular: return "Modular";
        case Certificate::Neither: return "Neither";
        case Certificate::Unknown: return "Unknown";
    }
    return "Unknown";
}

struct CertifyResult {
    Certificate certificate = Certificate::Unknown;
    bool exhaustive = false;                // true when found by the fibre sweep
    std::optional<FibreWitness> witness;    // failing fibre when Neither
};

// Classifies the claim's one-step fibres.  Basket and arithmetic-average
// kinds are supermodular by construction (convex increasing or decreasing
// transforms of per-asset sums with non-negative weights), so they certify
// without a sweep.  Spreads and tables are swept exhaustively in both
// directions; when the sweep would exceed `max_ops` the result is Unknown
// rather than an error.
inline CertifyResult certify(const PayoffFn& f, const MarketParams& p, double tol = 1e-9,
                             double max_ops = 268435456.0) {
    f.validate(p);
    validate_params(p);
    switch (f.kind) {
        case PayoffKind::BasketCall:
        case PayoffKind::BasketPut:
        case PayoffKind::AsianArithCall:
        case PayoffKind::AsianArithPut:
            return {Certificate::Supermodular, false, std::nullopt};
        default:
            break;
    }

    auto value = [&](const Scenario& s) { return evaluate(f, s, p); };
    auto negated = [&](const Scenario& s) { return -evaluate(f, s, p); };
    try {
        FibreWitness witness;
        const bool super = is_fibrewise_supermodular(value, p, tol, max_ops, &witness);
        const bool sub = is_fibrewise_supermodular(negated, p, tol, max_ops);
        if (super && sub) return {Certificate::Modular, true, std::nullopt};
        if (super) return {Certificate::Supermodular, true, std::nullopt};
        if (sub) return {Certificate::Submodular, true, std::nullopt};
        return {Certificate::Neither, true, witness};
    } catch (const BudgetExceeded&) {
        return {Certificate::Unknown, false, std::nullopt};
    }
}

}  // namespace latb

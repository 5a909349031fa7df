#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "latb/errors.hpp"
#include "latb/linprog.hpp"
#include "latb/market.hpp"
#include "latb/measures.hpp"
#include "latb/payoffs.hpp"
#include "latb/pricer.hpp"

// The command layer: JSON configuration in, CSV on stdout, diagnostics on
// stderr.  Everything returns a fully buffered RunResult so the commands are
// directly testable; the binary's main() only reads the file and prints.
//
// Exit codes: 0 success, 1 configuration or input error, 2 closed-form
// pricing requested for a claim whose certificate does not support it,
// 3 a work budget was exceeded.

namespace latb {

enum class Method { Auto, Lp, Closed, Both };
enum class NodeScope { Root, All };

// Caps on the work a single run may do; all overridable from the config.
struct Budgets {
    int max_scenario_bits = 24;             // full-tree runs need m*n bits
    double max_certify_ops = 268435456.0;   // fibre-sweep operation cap
    std::uint64_t max_vertex_bases = 2000000;  // candidate bases for vertex enumeration
    double max_product_terms = 16777216.0;  // terms in one closed-form sum
};

struct RunConfig {
    MarketParams market;
    PayoffFn payoff;
    Method method = Method::Auto;
    NodeScope nodes = NodeScope::Root;
    double tolerance = 1e-9;
    int threads = 1;
    Budgets budgets;
};

// Command-line overrides applied on top of the config file.
struct CliOverrides {
    std::optional<std::string> method;
    std::optional<std::string> nodes;
    std::optional<int> threads;
};

struct RunResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

// Closed-form pricing was requested but the claim's certificate or the
// market's weights rule it out.
struct ClosedFormUnavailable : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace cli_detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
        }
    }
}

inline const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw ConfigError("missing \"" + std::string(key) + "\" in " + where);
    }
    return *it;
}

inline double as_number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    return j.get<double>();
}

inline int as_int(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ConfigError(what + " must be an integer");
    return j.get<int>();
}

inline std::vector<double> as_number_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) out.push_back(as_number(x, what + " entry"));
    return out;
}

inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline MarketParams parse_market(const json& j) {
    if (!j.is_object()) throw ConfigError("\"market\" must be an object");
    reject_unknown(j, {"growth_factor", "num_steps", "assets"}, "market");
    MarketParams p;
    p.growth_factor = as_number(need(j, "growth_factor", "market"), "market.growth_factor");
    p.num_steps = as_int(need(j, "num_steps", "market"), "market.num_steps");
    const json& assets = need(j, "assets", "market");
    if (!assets.is_array() || assets.empty()) {
        throw ConfigError("market.assets must be a non-empty array");
    }
    for (const auto& a : assets) {
        if (!a.is_object()) throw ConfigError("each market asset must be an object");
        reject_unknown(a, {"initial_price", "up", "down"}, "market asset");
        AssetParams ap;
        ap.initial_price = as_number(need(a, "initial_price", "market asset"),
                                     "asset initial_price");
        ap.up_ratio = as_number(need(a, "up", "market asset"), "asset up");
        ap.down_ratio = as_number(need(a, "down", "market asset"), "asset down");
        p.assets.push_back(ap);
    }
    return p;
}

inline PayoffFn parse_payoff(const json& j) {
    if (!j.is_object()) throw ConfigError("\"payoff\" must be an object");
    reject_unknown(j, {"kind", "weights", "strike", "strike_high", "step_weights", "table"},
                   "payoff");
    const json& kind_j = need(j, "kind", "payoff");
    if (!kind_j.is_string()) throw ConfigError("payoff.kind must be a string");
    const std::string kind = kind_j.get<std::string>();

    auto weights = [&]() { return as_number_list(need(j, "weights", "payoff"), "payoff.weights"); };
    auto strike = [&]() { return as_number(need(j, "strike", "payoff"), "payoff.strike"); };

    if (kind == "basket_call") return PayoffFn::basket_call(weights(), strike());
    if (kind == "basket_put") return PayoffFn::basket_put(weights(), strike());
    if (kind == "spread") {
        return PayoffFn::spread(weights(), strike(),
                                as_number(need(j, "strike_high", "payoff"),
                                          "payoff.strike_high"));
    }
    if (kind == "asian_arith_call" || kind == "asian_arith_put") {
        std::vector<std::vector<double>> rows;
        if (auto it = j.find("step_weights"); it != j.end()) {
            if (!it->is_array()) throw ConfigError("payoff.step_weights must be an array");
            for (const auto& row : *it) {
                rows.push_back(as_number_list(row, "payoff.step_weights row"));
            }
        } else {
            rows.push_back(weights());
        }
        return kind == "asian_arith_call" ? PayoffFn::asian_call(std::move(rows), strike())
                                          : PayoffFn::asian_put(std::move(rows), strike());
    }
    if (kind == "table_terminal") {
        return PayoffFn::table_terminal(
            as_number_list(need(j, "table", "payoff"), "payoff.table"));
    }
    if (kind == "table_path") {
        return PayoffFn::table_path(as_number_list(need(j, "table", "payoff"), "payoff.table"));
    }
    throw ConfigError("unknown payoff kind \"" + kind + "\"");
}

inline Budgets parse_budgets(const json& j) {
    if (!j.is_object()) throw ConfigError("\"budgets\" must be an object");
    reject_unknown(
        j, {"max_scenario_bits", "max_certify_ops", "max_vertex_bases", "max_product_terms"},
        "budgets");
    Budgets b;
    if (auto it = j.find("max_scenario_bits"); it != j.end()) {
        b.max_scenario_bits = as_int(*it, "budgets.max_scenario_bits");
    }
    if (auto it = j.find("max_certify_ops"); it != j.end()) {
        b.max_certify_ops = as_number(*it, "budgets.max_certify_ops");
    }
    if (auto it = j.find("max_vertex_bases"); it != j.end()) {
        const double v = as_number(*it, "budgets.max_vertex_bases");
        if (v < 1.0) throw ConfigError("budgets.max_vertex_bases must be at least 1");
        b.max_vertex_bases = static_cast<std::uint64_t>(v);
    }
    if (auto it = j.find("max_product_terms"); it != j.end()) {
        b.max_product_terms = as_number(*it, "budgets.max_product_terms");
    }
    return b;
}

}  // namespace cli_detail

inline Method parse_method(const std::string& s) {
    if (s == "auto") return Method::Auto;
    if (s == "lp") return Method::Lp;
    if (s == "closed") return Method::Closed;
    if (s == "both") return Method::Both;
    throw ConfigError("method must be one of auto, lp, closed, both (got \"" + s + "\")");
}

inline NodeScope parse_nodes(const std::string& s) {
    if (s == "root") return NodeScope::Root;
    if (s == "all") return NodeScope::All;
    throw ConfigError("nodes must be root or all (got \"" + s + "\")");
}

inline RunConfig parse_config(const nlohmann::json& j) {
    using cli_detail::as_int;
    using cli_detail::as_number;
    using cli_detail::need;
    if (!j.is_object()) throw ConfigError("the configuration must be a JSON object");
    cli_detail::reject_unknown(
        j, {"market", "payoff", "method", "nodes", "tolerance", "threads", "budgets"},
        "the configuration");
    RunConfig cfg;
    cfg.market = cli_detail::parse_market(need(j, "market", "the configuration"));
    cfg.payoff = cli_detail::parse_payoff(need(j, "payoff", "the configuration"));
    if (auto it = j.find("method"); it != j.end()) {
        if (!it->is_string()) throw ConfigError("\"method\" must be a string");
        cfg.method = parse_method(it->get<std::string>());
    }
    if (auto it = j.find("nodes"); it != j.end()) {
        if (!it->is_string()) throw ConfigError("\"nodes\" must be a string");
        cfg.nodes = parse_nodes(it->get<std::string>());
    }
    if (auto it = j.find("tolerance"); it != j.end()) {
        cfg.tolerance = as_number(*it, "tolerance");
        if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
    }
    if (auto it = j.find("threads"); it != j.end()) {
        cfg.threads = as_int(*it, "threads");
        if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
    }
    if (auto it = j.find("budgets"); it != j.end()) {
        cfg.budgets = cli_detail::parse_budgets(*it);
    }
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

namespace cli_detail {

template <class Fn>
RunResult guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ClosedFormUnavailable& e) {
        return {2, "", std::string("error: ") + e.what() + "\n"};
    } catch (const BudgetExceeded& e) {
        return {3, "", std::string("error: ") + e.what() + "\n"};
    } catch (const Error& e) {
        return {1, "", std::string("error: ") + e.what() + "\n"};
    } catch (const std::exception& e) {
        return {1, "", std::string("error: ") + e.what() + "\n"};
    }
}

inline std::string join_dash(const std::vector<int>& xs, int offset = 0) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(xs[i] + offset);
    }
    return out;
}

inline std::string mask_bits(std::uint32_t mask, int num_assets) {
    std::string out;
    for (int a = 0; a < num_assets; ++a) {
        out += (mask >> (num_assets - 1 - a)) & 1u ? '1' : '0';
    }
    return out;
}

// How the closed forms should be steered for this claim, decided once from
// the certificate.
struct ClosedRoute {
    bool available = false;
    bool swap = false;        // submodular claims swap the two supports
    bool chain_only = false;  // modular claims price both sides off the chain
    std::string refusal;      // why `available` is false
};

inline ClosedRoute decide_closed_route(const RunConfig& cfg) {
    ClosedRoute route;
    CertifyResult cert =
        certify(cfg.payoff, cfg.market, cfg.tolerance, cfg.budgets.max_certify_ops);
    const bool singleton_ok =
        risk_neutral_weights(cfg.market).total() <= 1.0 + cfg.tolerance ||
        cfg.market.num_assets() == 2;
    switch (cert.certificate) {
        case Certificate::Modular:
            route.available = true;
            route.chain_only = true;
            break;
        case Certificate::Supermodular:
        case Certificate::Submodular:
            route.swap = cert.certificate == Certificate::Submodular;
            if (singleton_ok) {
                route.available = true;
            } else {
                route.refusal =
                    "the up weights sum past one with more than two assets, so the "
                    "minimizing product measure does not exist";
            }
            break;
        default:
            route.refusal = std::string("the claim certifies as ") +
                            lowercase(certificate_name(cert.certificate));
            break;
    }
    return route;
}

inline Bound support_for(const ClosedRoute& route, Bound price_side) {
    if (route.chain_only) return Bound::Upper;
    if (route.swap) {
        return price_side == Bound::Upper ? Bound::Lower : Bound::Upper;
    }
    return price_side;
}

}  // namespace cli_detail

inline RunResult run_price(const RunConfig& cfg) {
    using cli_detail::fmt_num;
    return cli_detail::guarded([&]() -> RunResult {
        validate_params(cfg.market);
        cfg.payoff.validate(cfg.market);
        const int m = cfg.market.num_assets();
        const int n = cfg.market.num_steps;
        const bool tree = cfg.payoff.path_dependent();

        cli_detail::ClosedRoute route;
        if (cfg.method != Method::Lp) route = cli_detail::decide_closed_route(cfg);

        Method chosen = cfg.method;
        if (cfg.method == Method::Auto) {
            chosen = route.available ? Method::Closed : Method::Lp;
        } else if ((cfg.method == Method::Closed || cfg.method == Method::Both) &&
                   !route.available) {
            throw ClosedFormUnavailable("closed-form pricing unavailable: " + route.refusal);
        }
        const bool need_lp = chosen == Method::Lp || chosen == Method::Both;
        const bool need_closed = chosen == Method::Closed || chosen == Method::Both;

        if (tree && cfg.nodes == NodeScope::All &&
            static_cast<long long>(m) * n > cfg.budgets.max_scenario_bits) {
            throw BudgetExceeded("listing every path prefix needs " + std::to_string(m * n) +
                                 " scenario bits; budget is " +
                                 std::to_string(cfg.budgets.max_scenario_bits));
        }

        std::optional<BoundsSurface> surface;
        if (need_lp) {
            PricerOptions po;
            po.tol = cfg.tolerance;
            po.threads = cfg.threads;
            po.store_measures = false;
            po.max_scenario_bits = cfg.budgets.max_scenario_bits;
            surface = backward_induction_bounds(cfg.market, cfg.payoff, po);
        }

        auto closed_pair = [&](const NodeId* node,
                               const std::vector<int>* prefix) -> std::pair<double, double> {
            const Bound up_side = cli_detail::support_for(route, Bound::Upper);
            const Bound lo_side = cli_detail::support_for(route, Bound::Lower);
            double hi, lo;
            if (node != nullptr) {
                hi = product_bounds_path_independent(cfg.market, cfg.payoff, *node, up_side,
                                                     cfg.budgets.max_product_terms);
                lo = route.chain_only
                         ? hi
                         : product_bounds_path_independent(cfg.market, cfg.payoff, *node,
                                                           lo_side,
                                                           cfg.budgets.max_product_terms);
            } else {
                hi = product_bounds_path_dependent(cfg.market, cfg.payoff, *prefix, up_side,
                                                   cfg.budgets.max_product_terms);
                lo = route.chain_only
                         ? hi
                         : product_bounds_path_dependent(cfg.market, cfg.payoff, *prefix,
                                                         lo_side,
                                                         cfg.budgets.max_product_terms);
            }
            return {lo, hi};
        };

        RunResult res;
        const char* key_col = tree ? "prefix" : "up_counts";
        if (chosen == Method::Both) {
            res.out = std::string("level,") + key_col +
                      ",c_min_lp,c_max_lp,c_min_closed,c_max_closed,abs_diff\n";
        } else {
            res.out = std::string("level,") + key_col + ",c_min,c_max,method_used\n";
        }
        const char* method_used = chosen == Method::Closed ? "closed" : "lp";

        auto emit = [&](int level, const std::string& key, const NodeId* node,
                        const std::vector<int>* prefix) {
            double lp_lo = 0.0, lp_hi = 0.0, cl_lo = 0.0, cl_hi = 0.0;
            if (need_lp) {
                PriceInterval iv = tree ? surface->at_prefix(*prefix) : surface->at(*node);
                lp_lo = iv.lower;
                lp_hi = iv.upper;
            }
            if (need_closed) {
                std::tie(cl_lo, cl_hi) = closed_pair(node, prefix);
            }
            res.out += std::to_string(level);
            res.out += ',';
            res.out += key;
            res.out += ',';
            if (chosen == Method::Both) {
                const double diff =
                    std::max(std::abs(lp_lo - cl_lo), std::abs(lp_hi - cl_hi));
                res.out += fmt_num(lp_lo) + "," + fmt_num(lp_hi) + "," + fmt_num(cl_lo) +
                           "," + fmt_num(cl_hi) + "," + fmt_num(diff);
            } else if (chosen == Method::Closed) {
                res.out += fmt_num(cl_lo) + "," + fmt_num(cl_hi) + "," + method_used;
            } else {
                res.out += fmt_num(lp_lo) + "," + fmt_num(lp_hi) + "," + method_used;
            }
            res.out += '\n';
        };

        if (cfg.nodes == NodeScope::Root) {
            if (tree) {
                const std::vector<int> empty;
                emit(0, "", nullptr, &empty);
            } else {
                const NodeId root = root_node(m);
                emit(0, cli_detail::join_dash(root.up_counts), &root, nullptr);
            }
            return res;
        }

        for (int level = 0; level <= n; ++level) {
            if (tree) {
                const std::uint64_t count = scenario_count(m, level);
                std::vector<int> prefix(level, 0);
                for (std::uint64_t q = 0; q < count; ++q) {
                    for (int t = 0; t < level; ++t) {
                        prefix[t] = static_cast<int>(
                            (q >> (static_cast<unsigned>(m) * (level - 1 - t))) &
                            ((std::uint64_t{1} << m) - 1));
                    }
                    emit(level, cli_detail::join_dash(prefix, 1), nullptr, &prefix);
                }
            } else {
                for (const NodeId& v : enumerate_level(m, level)) {
                    emit(level, cli_detail::join_dash(v.up_counts), &v, nullptr);
                }
            }
        }
        return res;
    });
}

inline RunResult run_certify(const RunConfig& cfg) {
    return cli_detail::guarded([&]() -> RunResult {
        CertifyResult cert =
            certify(cfg.payoff, cfg.market, cfg.tolerance, cfg.budgets.max_certify_ops);
        RunResult res;
        res.out += "certificate," + cli_detail::lowercase(certificate_name(cert.certificate)) +
                   "\n";
        res.out += std::string("exhaustive,") + (cert.exhaustive ? "true" : "false") + "\n";
        if (cert.witness) {
            const FibreWitness& w = *cert.witness;
            const int m = cfg.market.num_assets();
            res.out += "witness_step," + std::to_string(w.step) + "\n";
            std::string fixed;
            for (std::size_t t = 0; t < w.fixed_cols.size(); ++t) {
                if (t) fixed += '-';
                fixed += w.fixed_cols[t] < 0 ? "*" : std::to_string(w.fixed_cols[t] + 1);
            }
            res.out += "witness_fixed," + fixed + "\n";
            res.out += "witness_S," + cli_detail::mask_bits(w.sets.set_a, m) + "\n";
            res.out += "witness_T," + cli_detail::mask_bits(w.sets.set_b, m) + "\n";
        }
        return res;
    });
}

inline RunResult run_vertices(const RunConfig& cfg) {
    using cli_detail::fmt_num;
    return cli_detail::guarded([&]() -> RunResult {
        validate_params(cfg.market);
        const int m = cfg.market.num_assets();
        MartingaleSystem sys = martingale_constraints(cfg.market);

        Measure hi = upper_extremal_measure(cfg.market);
        std::optional<Measure> lo;
        try {
            lo = lower_extremal_measure(cfg.market);
        } catch (const MassOverflow&) {
            // no singleton-support measure; the flag column stays false
        }
        auto matches = [&](const std::vector<double>& w, const Measure& q) {
            double worst = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                worst = std::max(worst, std::abs(w[i] - q.weights[i]));
            }
            return worst <= 1e-7;
        };

        std::vector<std::vector<double>> rows;
        std::string mode;
        try {
            rows = enumerate_vertices(sys.constraints, sys.rhs, cfg.tolerance,
                                      cfg.budgets.max_vertex_bases);
            mode = "exhaustive";
        } catch (const BudgetExceeded&) {
            // too many candidate bases: fall back to the two closed-form
            // extremal measures
            mode = "extremal";
            rows.push_back(hi.weights);
            if (lo && !matches(lo->weights, hi)) rows.push_back(lo->weights);
        }

        RunResult res;
        res.out = "vertex,mode,is_upper_vertex,is_lower_vertex";
        for (int j0 = 0; j0 < column_count(m); ++j0) {
            res.out += ",w" + std::to_string(j0 + 1);
        }
        res.out += '\n';
        for (std::size_t i = 0; i < rows.size(); ++i) {
            res.out += std::to_string(i + 1) + "," + mode;
            res.out += matches(rows[i], hi) ? ",true" : ",false";
            res.out += lo && matches(rows[i], *lo) ? ",true" : ",false";
            for (double w : rows[i]) res.out += "," + fmt_num(w);
            res.out += '\n';
        }
        return res;
    });
}

// ---------------------------------------------------------------------------
// text-level entry points (what main() and the tests call)
// ---------------------------------------------------------------------------

namespace cli_detail {

inline RunResult parse_and_run(const std::string& config_text, const CliOverrides& ov,
                               RunResult (*command)(const RunConfig&)) {
    return guarded([&]() -> RunResult {
        RunConfig cfg = parse_config_text(config_text);
        if (ov.method) cfg.method = parse_method(*ov.method);
        if (ov.nodes) cfg.nodes = parse_nodes(*ov.nodes);
        if (ov.threads) {
            if (*ov.threads < 1) throw ConfigError("threads must be at least 1");
            cfg.threads = *ov.threads;
        }
        return command(cfg);
    });
}

}  // namespace cli_detail

inline RunResult price_command(const std::string& config_text, const CliOverrides& ov = {}) {
    return cli_detail::parse_and_run(config_text, ov, &run_price);
}

inline RunResult certify_command(const std::string& config_text, const CliOverrides& ov = {}) {
    return cli_detail::parse_and_run(config_text, ov, &run_certify);
}

inline RunResult vertices_command(const std::string& config_text, const CliOverrides& ov = {}) {
    return cli_detail::parse_and_run(config_text, ov, &run_vertices);
}

}  // namespace latb

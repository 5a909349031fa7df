#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "latb/errors.hpp"

// Core market model: an m-asset binomial lattice observed over n steps.
//
// Each step, every asset independently multiplies its price by its up ratio or
// its down ratio, so a joint one-step move is a column of m up/down flags and
// there are 2^m of them.  Columns are enumerated so that column 1 (1-based)
// has every asset up and the flags, read from asset 1 downward, spell the
// binary digits of 2^m - j; the all-down column therefore comes last.  The
// same bit layout (asset a on bit m-1-a, asset 1 most significant) is used
// wherever a subset of assets is encoded as a mask.

namespace latb {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Per-asset data: initial spot price and the two gross one-step returns.
struct AssetParams {
    double initial_price = 0.0;
    double up_ratio = 0.0;
    double down_ratio = 0.0;
};

// A complete market description.  growth_factor is the gross riskless return
// per step (one plus the interest rate).
struct MarketParams {
    double growth_factor = 1.0;
    int num_steps = 1;
    std::vector<AssetParams> assets;

    int num_assets() const { return static_cast<int>(assets.size()); }
};

// Largest asset count the column/mask machinery supports (masks and column
// counts must fit comfortably in 32-bit integers).
inline constexpr int kMaxAssets = 25;

// Checks that the market admits no riskless profit and the dimensions are
// sane.  Throws DimensionError, NonpositivePrice, or ArbitrageViolation.
inline void validate_params(const MarketParams& p) {
    const int m = p.num_assets();
    if (m < 1 || m > kMaxAssets) {
        throw DimensionError("number of assets must be in [1, " + std::to_string(kMaxAssets) +
                             "], got " + std::to_string(m));
    }
    if (p.num_steps < 1) {
        throw DimensionError("number of steps must be at least 1, got " +
                             std::to_string(p.num_steps));
    }
    for (int i = 0; i < m; ++i) {
        const AssetParams& a = p.assets[i];
        if (!(a.initial_price > 0.0)) {
            throw NonpositivePrice("asset " + std::to_string(i + 1) +
                                   " must have a positive initial price");
        }
        if (!(0.0 < a.down_ratio && a.down_ratio < p.growth_factor &&
              p.growth_factor < a.up_ratio)) {
            throw ArbitrageViolation("asset " + std::to_string(i + 1) +
                                     " needs 0 < down < growth < up, got down=" +
                                     std::to_string(a.down_ratio) + " growth=" +
                                     std::to_string(p.growth_factor) + " up=" +
                                     std::to_string(a.up_ratio));
        }
    }
}

// ---------------------------------------------------------------------------
// Risk-neutral up weights
// ---------------------------------------------------------------------------

// For each asset, the unique weight b with b*U + (1-b)*D = growth_factor.
// Arbitrage-free parameters put every b strictly inside (0, 1).  by_weight
// lists asset indices sorted by non-increasing weight; the sort is stable, so
// equal weights keep their original relative order.
struct RiskNeutralWeights {
    std::vector<double> b;
    std::vector<int> by_weight;

    double total() const { return std::accumulate(b.begin(), b.end(), 0.0); }
};

inline RiskNeutralWeights risk_neutral_weights(const MarketParams& p) {
    validate_params(p);
    RiskNeutralWeights w;
    const int m = p.num_assets();
    w.b.resize(m);
    for (int i = 0; i < m; ++i) {
        const AssetParams& a = p.assets[i];
        w.b[i] = (p.growth_factor - a.down_ratio) / (a.up_ratio - a.down_ratio);
    }
    w.by_weight.resize(m);
    std::iota(w.by_weight.begin(), w.by_weight.end(), 0);
    std::stable_sort(w.by_weight.begin(), w.by_weight.end(),
                     [&](int i, int j) { return w.b[i] > w.b[j]; });
    return w;
}

// ---------------------------------------------------------------------------
// Columns (joint one-step moves)
// ---------------------------------------------------------------------------

struct Column {
    int num_assets = 0;
    std::vector<int> up;  // up[a] == 1 iff asset a moves up

    bool operator==(const Column&) const = default;
};

inline int column_count(int num_assets) { return 1 << num_assets; }

inline void check_column_index0(int num_assets, int j0) {
    if (j0 < 0 || j0 >= column_count(num_assets)) {
        throw IndexOutOfRange("column index out of range: " + std::to_string(j0));
    }
}

// True iff `asset` (0-based) moves up in 0-based column j0.
inline bool column_up(int num_assets, int j0, int asset) {
    return ((~static_cast<unsigned>(j0)) >> (num_assets - 1 - asset)) & 1u;
}

// Mask of the assets that move up in column j0, in the canonical bit layout.
// The map is an involution: mask -> column index uses the same XOR.
inline std::uint32_t column_up_mask(int num_assets, int j0) {
    return static_cast<std::uint32_t>(column_count(num_assets) - 1 - j0);
}

inline int column_index0_of_mask(int num_assets, std::uint32_t up_mask) {
    return column_count(num_assets) - 1 - static_cast<int>(up_mask);
}

// Builds the 1-based j-th column.  Throws IndexOutOfRange.
inline Column column_of_index(int j, int num_assets) {
    if (num_assets < 1 || num_assets > kMaxAssets) {
        throw DimensionError("number of assets must be in [1, " + std::to_string(kMaxAssets) + "]");
    }
    check_column_index0(num_assets, j - 1);
    Column c;
    c.num_assets = num_assets;
    c.up.resize(num_assets);
    for (int a = 0; a < num_assets; ++a) {
        c.up[a] = column_up(num_assets, j - 1, a) ? 1 : 0;
    }
    return c;
}

// Inverse of column_of_index; returns the 1-based position of the column.
inline int index_of_column(const Column& c) {
    const int m = c.num_assets;
    if (m < 1 || m > kMaxAssets || static_cast<int>(c.up.size()) != m) {
        throw DimensionMismatch("column has inconsistent dimensions");
    }
    std::uint32_t mask = 0;
    for (int a = 0; a < m; ++a) {
        if (c.up[a] != 0 && c.up[a] != 1) {
            throw OutOfRange("column flags must be 0 or 1");
        }
        if (c.up[a]) mask |= 1u << (m - 1 - a);
    }
    return column_index0_of_mask(m, mask) + 1;
}

// ---------------------------------------------------------------------------
// Scenarios (full joint paths)
// ---------------------------------------------------------------------------

// A path of `num_steps()` joint moves, stored as one 0-based column index per
// step.  Step 0 is the first move.
struct Scenario {
    int num_assets = 0;
    std::vector<int> cols;

    int num_steps() const { return static_cast<int>(cols.size()); }
    bool up(int step, int asset) const { return column_up(num_assets, cols[step], asset); }

    bool operator==(const Scenario&) const = default;
};

// Number of scenarios (2^m)^n; throws DimensionError when it would not fit a
// 64-bit count.
inline std::uint64_t scenario_count(int num_assets, int num_steps) {
    const long long bits = static_cast<long long>(num_assets) * num_steps;
    if (bits < 0 || bits > 62) {
        throw DimensionError("scenario space needs " + std::to_string(bits) +
                             " bits; limit is 62");
    }
    return std::uint64_t{1} << bits;
}

// Flat scenario numbering: step 1's column index is the most significant
// base-2^m digit.  Scenario 0 is the all-up path; the all-down path is last.
inline std::uint64_t index_of_scenario(const Scenario& s) {
    const int m = s.num_assets;
    std::uint64_t idx = 0;
    for (int k = 0; k < s.num_steps(); ++k) {
        check_column_index0(m, s.cols[k]);
        idx = (idx << m) | static_cast<std::uint64_t>(s.cols[k]);
    }
    return idx;
}

inline Scenario scenario_of_index(std::uint64_t idx, int num_assets, int num_steps) {
    if (idx >= scenario_count(num_assets, num_steps)) {
        throw IndexOutOfRange("scenario index out of range");
    }
    Scenario s;
    s.num_assets = num_assets;
    s.cols.resize(num_steps);
    for (int k = num_steps - 1; k >= 0; --k) {
        s.cols[k] = static_cast<int>(idx & (column_count(num_assets) - 1));
        idx >>= num_assets;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Recombinant lattice nodes
// ---------------------------------------------------------------------------

// A node of the recombinant lattice: how many steps have elapsed and how many
// up moves each asset has made.  Many scenarios map to one node; every
// path-independent quantity lives here.
struct NodeId {
    int level = 0;
    std::vector<int> up_counts;

    int num_assets() const { return static_cast<int>(up_counts.size()); }

    bool operator==(const NodeId&) const = default;
};

inline NodeId root_node(int num_assets) {
    return NodeId{0, std::vector<int>(num_assets, 0)};
}

// Validates a node against a market.  Throws LevelOverflow or IndexOutOfRange.
inline void check_node(const NodeId& v, const MarketParams& p) {
    if (v.level < 0 || v.level > p.num_steps) {
        throw LevelOverflow("node level " + std::to_string(v.level) +
                            " outside [0, " + std::to_string(p.num_steps) + "]");
    }
    if (v.num_assets() != p.num_assets()) {
        throw DimensionMismatch("node has " + std::to_string(v.num_assets()) +
                                " assets, market has " + std::to_string(p.num_assets()));
    }
    for (int u : v.up_counts) {
        if (u < 0 || u > v.level) {
            throw IndexOutOfRange("up count " + std::to_string(u) +
                                  " outside [0, " + std::to_string(v.level) + "]");
        }
    }
}

// x^e for small non-negative integer e, by repeated multiplication.  Every
// call with equal arguments performs the identical rounding sequence, which
// keeps independently computed prices bit-for-bit comparable.
inline double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

// Price of one asset at a node: initial price compounded by the recorded up
// and down moves.
inline double asset_price(const MarketParams& p, const NodeId& v, int asset) {
    check_node(v, p);
    if (asset < 0 || asset >= p.num_assets()) {
        throw IndexOutOfRange("asset index out of range: " + std::to_string(asset));
    }
    const AssetParams& a = p.assets[asset];
    const int ups = v.up_counts[asset];
    return a.initial_price * ipow(a.up_ratio, ups) * ipow(a.down_ratio, v.level - ups);
}

// The node reached from v by one joint move along 0-based column j0.
inline NodeId node_successor(const NodeId& v, int j0) {
    const int m = v.num_assets();
    check_column_index0(m, j0);
    NodeId next{v.level + 1, v.up_counts};
    for (int a = 0; a < m; ++a) {
        if (column_up(m, j0, a)) ++next.up_counts[a];
    }
    return next;
}

inline NodeId node_successor(const NodeId& v, const Column& c) {
    if (c.num_assets != v.num_assets()) {
        throw DimensionMismatch("column and node asset counts differ");
    }
    return node_successor(v, index_of_column(c) - 1);
}

// Number of nodes at a level: (level+1)^m.
inline std::uint64_t level_node_count(int num_assets, int level) {
    std::uint64_t n = 1;
    for (int a = 0; a < num_assets; ++a) n *= static_cast<std::uint64_t>(level + 1);
    return n;
}

// Position of a node in the lexicographic ordering of its level (up_counts
// read as digits base level+1, asset 1 most significant).
inline std::uint64_t node_rank(const NodeId& v) {
    std::uint64_t r = 0;
    for (int u : v.up_counts) {
        r = r * static_cast<std::uint64_t>(v.level + 1) + static_cast<std::uint64_t>(u);
    }
    return r;
}

// All nodes of a level in lexicographic order, so enumerate_level(m, k)[i]
// has node_rank i.
inline std::vector<NodeId> enumerate_level(int num_assets, int level) {
    if (num_assets < 1 || num_assets > kMaxAssets) {
        throw DimensionError("number of assets must be in [1, " + std::to_string(kMaxAssets) + "]");
    }
    if (level < 0) {
        throw LevelOverflow("level must be non-negative");
    }
    const std::uint64_t total = level_node_count(num_assets, level);
    if (total > (std::uint64_t{1} << 31)) {
        throw BudgetExceeded("level has too many nodes to enumerate: " + std::to_string(total));
    }
    std::vector<NodeId> nodes;
    nodes.reserve(static_cast<std::size_t>(total));
    NodeId v{level, std::vector<int>(num_assets, 0)};
    for (std::uint64_t i = 0; i < total; ++i) {
        nodes.push_back(v);
        for (int a = num_assets - 1; a >= 0; --a) {
            if (++v.up_counts[a] <= level) break;
            v.up_counts[a] = 0;
        }
    }
    return nodes;
}

// Node reached from the root by the first `len` columns of a path.
inline NodeId node_after_prefix(int num_assets, const std::vector<int>& cols, int len) {
    NodeId v = root_node(num_assets);
    for (int k = 0; k < len; ++k) {
        v = node_successor(v, cols[k]);
    }
    return v;
}

}  // namespace latb

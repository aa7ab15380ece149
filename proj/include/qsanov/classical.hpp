#pragma once

#include <cstdint>
#include <vector>

#include "qsanov/source_models.hpp"

namespace qsanov {

// Grouped-outcome table for length-n strings over the site alphabet: groups
// collect strings that share one probability under EVERY tracked model, so
// masses over exponentially large outcome spaces reduce to sums over groups.
// Everything is kept in log space (natural logs, -inf = probability zero).
struct TypeTable {
    int n = 0;
    int alphabet = 0;
    std::vector<double> log_mult;               // ln(#strings) per group
    std::vector<std::vector<double>> log_prob;  // [model][group]: per-string ln prob
    // Linear side channels: mult is the exact count while it fits in a double
    // (NaN once past 2^53), prob the directly multiplied per-string probability
    // (0 on underflow). table_mass prefers them so dyadic models sum exactly.
    std::vector<double> mult;
    std::vector<std::vector<double>> prob;
    int group_count() const { return static_cast<int>(log_mult.size()); }
};

enum class TableKind {
    iid_types,      // composition classes; all models iid (or mixtures of iid)
    markov_binary,  // run-structure classes; binary alphabet, markov/iid models
    paths,          // exhaustive enumeration, site.dim^n <= kTablePathGuard
    none,
};

inline constexpr long long kTablePathGuard = 1 << 20;  // exhaustive string cap
inline constexpr int kTableMarkovGuard = 1024;         // run-structure length cap
inline constexpr double kTableGroupGuard = 5e6;        // composition-class cap

// Largest engine that can serve all models at this n (TableKind::none if none).
TableKind select_table_kind(const std::vector<const SourceModel*>& models, int n);

TypeTable build_type_table(const std::vector<const SourceModel*>& models, int n,
                           TableKind kind = TableKind::none);  // none = auto-select

double logsumexp(const std::vector<double>& xs);

// ln of the number of strings in the selection.
double table_log_rank(const TypeTable& t, const std::vector<uint8_t>& sel);
// Mass of the selection under model `im`: compensated linear sum (exact enough
// for masses near 1) and the log-space form (exact for tiny masses).
double table_mass(const TypeTable& t, int im, const std::vector<uint8_t>& sel);
double table_log_mass(const TypeTable& t, int im, const std::vector<uint8_t>& sel);

}  // namespace qsanov

#pragma once

#include "laradb/physplan.hpp"

namespace lara::rewrite {

using plan::PhysPlan;

/// The rewrite rules. Letters name what they do here:
///   F  push a range filter into the Load it scans
///   M  replace Sort-after-Ext with the streaming re-order (monotone f)
///   Z* identify null with zero (per operator family) so zero rows drop
///   R  share structurally equal subplans (common sub-expression)
///   S  compute only the upper triangle of a symmetric self-join product
///   A  fuse a Sort with the aggregation that consumes it
///   D  defer the tail before a Store into a scan-time view
///   P  pre-split new tables with the partition splits of their sources
///   E  store all-numeric non-nullable values in packed bytes
enum class Rule { F, M, ZSort, ZMap, ZAgg, ZJoin, R, S, A, D, P, E };

std::vector<Rule> allRules();
const char* toText(Rule rule);
Rule parseRule(const std::string& text);
/// Comma-separated rule names; "Z" expands to the four Z rules; "all" to
/// every rule. Empty text means no rules.
std::vector<Rule> parseRuleList(const std::string& text);

struct RewriteReport {
    Rule rule = Rule::F;
    bool applied = false;
    std::string detail; // which pattern matched where, or why nothing did
};

/// Applies the first match of `rule` (leftmost-deepest node order) and
/// reports. `force` skips the sampled semantic guards — the Z equivalence
/// checks, M's monotonicity, S's commutativity — while still requiring the
/// structural pattern; it exists so tests can demonstrate that a guard is
/// load-bearing. Returns whether the plan changed.
bool applyRule(PhysPlan& plan, Rule rule, RewriteReport* report = nullptr, bool force = false);

struct OptimizeResult {
    PhysPlan plan;
    std::vector<RewriteReport> log; // every application, in order
    std::map<Rule, int> fired;
};

/// Applies the enabled rules in priority order (F, M, Z, R, S, A, D, P, E)
/// until none fires. Terminates: every rule strictly shrinks the plan or
/// consumes a one-shot opportunity, and a safety cap of nodes x rules x 10
/// applications backstops that.
OptimizeResult optimizeFixpoint(PhysPlan plan, const std::vector<Rule>& enabled);

} // namespace lara::rewrite

#pragma once

#include <functional>
#include <set>

#include "laradb/oracle.hpp"
#include "laradb/store.hpp"

namespace lara::plan {

using core::AssociativeTable;
using core::ScalarValue;
using core::TableSchema;
using storage::AccessPath;

/// The logical operators. Sort carries no meaning for the result (tables are
/// maps, not sequences); it is a physical directive that survives here so a
/// plan can pin an access path explicitly.
enum class LogicalOp { Load, Map, Ext, Agg, Union, Join, Rename, Sort, Store };

const char* toText(LogicalOp op);

struct LogicalNode {
    LogicalOp op = LogicalOp::Load;
    std::string name;       // binding introduced (Store: the target table name)
    double label = 0;       // plan line label; drives explain ordering
    std::vector<int> in;    // input node ids
    TableSchema schema;     // inferred output schema

    std::string table;                          // Load source / Store target
    std::optional<ScalarValue> lo, hi;          // Load range on the leading path attribute
    AccessPath accessPath;                      // Load: stored path; Sort: target
    std::optional<udf::ExtFn> fn;               // Map / Ext
    std::vector<std::string> onKeys;            // Agg: keys kept (empty = scalar result)
    std::map<std::string, udf::PlusFn> plus;    // Agg / Union folds
    std::map<std::string, udf::TimesFn> times;  // Join combiners
    std::string renameFrom, renameTo;           // Rename
    bool upperTriangle = false;                 // Store: upper-triangle relaxation
};

/// A DAG of logical nodes in construction order (inputs always precede
/// consumers). Store nodes are the roots.
struct LogicalPlan {
    std::vector<LogicalNode> nodes;
    std::vector<int> roots;
    std::map<std::string, int> bindings; // latest binding of each name

    const LogicalNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
    std::vector<int> consumersOf(int id) const;
};

/// How Load statements resolve table names to schemas and stored paths.
struct TableType {
    TableSchema schema;
    AccessPath path;
};
using TableResolver = std::function<std::optional<TableType>(const std::string&)>;

TableResolver catalogResolver(const storage::Catalog& catalog);
TableResolver mapResolver(std::map<std::string, TableType> types);

/// Incremental plan construction with schema inference at every step. The
/// plan parser and the RA/LA constructors both build through this, so every
/// node in existence has been shape-checked. Methods return the new node id.
/// A label of 0 means "next integer after the previous label".
class PlanBuilder {
public:
    int load(const std::string& table, const TableType& type,
             std::optional<ScalarValue> lo = std::nullopt,
             std::optional<ScalarValue> hi = std::nullopt, double label = 0);
    int map(int in, udf::ExtFn fn, double label = 0);
    int ext(int in, udf::ExtFn fn, double label = 0);
    int agg(int in, std::vector<std::string> onKeys, std::map<std::string, udf::PlusFn> plus,
            double label = 0);
    int unionOp(int a, int b, std::map<std::string, udf::PlusFn> plus, double label = 0);
    int join(int a, int b, std::map<std::string, udf::TimesFn> times, double label = 0);
    int rename(int in, const std::string& from, const std::string& to, double label = 0);
    int sort(int in, AccessPath to, double label = 0);
    int store(int in, const std::string& table, bool upperTriangle = false, double label = 0);

    /// Names a node; later nodes can look it up, and results report under it.
    void bindName(const std::string& name, int id);
    int lookup(const std::string& name) const; // -1 when unbound

    const TableSchema& schemaOf(int id) const { return plan_.node(id).schema; }
    const LogicalPlan& plan() const { return plan_; }
    LogicalPlan finish();

private:
    int add(LogicalNode node, double label);

    LogicalPlan plan_;
    double lastLabel_ = 0;
};

/// Parses the textual plan language. One statement per line:
///
///   <id> = LOAD '<table>' [FROM <lit> TO <lit>]
///   <id> = MAP <id> BY [<attr>: <expr>, ...]
///   <id> = EXT <id> BY {KEYS [...] VALS [...]} (ROW {...})* [MONOTONE [...]]
///   <id> = AGG <id> [ON <attr>, ...] BY [<attr>: <fn>, ...]
///   <id> = UNION <a>, <b> BY [<attr>: <fn>, ...]
///   <id> = JOIN <a>, <b> BY [<attr>: <fn>, ...]
///   <id> = RENAME <id> FROM <attr> TO <attr>
///   <id> = SORT <id> TO [<attr>, ...]     (also: SORT <id> TO [...] rebinding <id>)
///   STORE <id> [AS '<table>'] [UPPER_TRIANGLE]
///
/// Keywords are case-insensitive, identifiers case-sensitive (trailing
/// apostrophes allowed: t', c''). `// ...` comments. A statement may carry an
/// explicit decimal label prefix ("6.1:"); labels must increase through the
/// file, and unlabeled statements take the next integer. Errors carry
/// line/column positions; schema clashes name the offending statement.
LogicalPlan parsePlanDsl(const std::string& text, const TableResolver& resolve);
LogicalPlan parsePlanDsl(const std::string& text, const storage::Catalog& catalog);

/// Renders a plan back to the statement language (labels preserved).
/// parsePlanDsl(printPlanDsl(p)) reproduces the plan.
std::string printPlanDsl(const LogicalPlan& plan);

/// Reference whole-plan evaluation: every node computed with the reference
/// operators over in-memory tables. Returns every named binding plus each
/// Store target. Load takes its table from `inputs`.
std::map<std::string, AssociativeTable> oracleEvaluate(
    const LogicalPlan& plan, const std::map<std::string, AssociativeTable>& inputs);

} // namespace lara::plan

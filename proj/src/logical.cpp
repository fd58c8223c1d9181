#include "laradb/logical.hpp"

#include <algorithm>
#include <cmath>

#include "laradb/shape.hpp"

namespace lara::plan {

using core::AttributeSchema;
using core::ScalarType;

const char* toText(LogicalOp op) {
    switch (op) {
        case LogicalOp::Load: return "Load";
        case LogicalOp::Map: return "Map";
        case LogicalOp::Ext: return "Ext";
        case LogicalOp::Agg: return "Agg";
        case LogicalOp::Union: return "Union";
        case LogicalOp::Join: return "Join";
        case LogicalOp::Rename: return "Rename";
        case LogicalOp::Sort: return "Sort";
        case LogicalOp::Store: return "Store";
    }
    return "?";
}

std::vector<int> LogicalPlan::consumersOf(int id) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (int in : nodes[i].in)
            if (in == id) {
                out.push_back(static_cast<int>(i));
                break;
            }
    return out;
}

TableResolver catalogResolver(const storage::Catalog& catalog) {
    // Views resolve through their definition so a plan can load one like a
    // table; the executor replays the view's plan at scan time. The view's
    // schema is the schema its replayed plan stores under the view's name,
    // and its order is the path recorded when the view was saved.
    return [&catalog](const std::string& name) -> std::optional<TableType> {
        if (!catalog.exists(name)) return std::nullopt;
        if (catalog.isView(name)) {
            storage::ViewDef view = catalog.openView(name);
            LogicalPlan replay = parsePlanDsl(view.planText, catalog);
            for (auto it = replay.nodes.rbegin(); it != replay.nodes.rend(); ++it)
                if (it->op == LogicalOp::Store && it->table == name)
                    return TableType{it->schema, view.outPath.empty()
                                                     ? AccessPath(it->schema.keyNames())
                                                     : view.outPath};
            throw PlanError("view '" + name + "' has a plan that never stores it");
        }
        storage::SortedTableStore store = catalog.open(name);
        return TableType{store.schema(), store.path()};
    };
}

TableResolver mapResolver(std::map<std::string, TableType> types) {
    return [types = std::move(types)](const std::string& name) -> std::optional<TableType> {
        auto it = types.find(name);
        if (it == types.end()) return std::nullopt;
        return it->second;
    };
}

// ---------------------------------------------------------------------------
// PlanBuilder

int PlanBuilder::add(LogicalNode node, double label) {
    for (int in : node.in)
        if (in < 0 || in >= static_cast<int>(plan_.nodes.size()))
            throw PlanError("plan node input id out of range");
    if (label == 0) {
        label = std::floor(lastLabel_) + 1;
    } else if (label <= lastLabel_) {
        throw PlanError("plan labels must increase: " + std::to_string(label) + " after " +
                        std::to_string(lastLabel_));
    }
    node.label = label;
    lastLabel_ = label;
    plan_.nodes.push_back(std::move(node));
    return static_cast<int>(plan_.nodes.size()) - 1;
}

int PlanBuilder::load(const std::string& table, const TableType& type,
                      std::optional<ScalarValue> lo, std::optional<ScalarValue> hi, double label) {
    if (type.path.attrs.size() != type.schema.keyCount())
        throw PlanError("load of '" + table + "': access path must order all key attributes");
    for (const auto& n : type.path.attrs)
        if (!type.schema.hasKey(n))
            throw PlanError("load of '" + table + "': path attribute " + n + " is not a key");
    auto checkBound = [&](std::optional<ScalarValue>& b, const char* which) {
        if (!b) return;
        if (type.path.empty())
            throw PlanError("load of '" + table + "': range bounds need a key attribute");
        if (b->isNull()) throw PlanError("load range bound may not be null");
        const ScalarType want = type.schema.at(type.path.attrs.front()).type;
        if (b->type() == ScalarType::Int64 && want == ScalarType::Float64)
            b = ScalarValue::f64(static_cast<double>(b->asI64()));
        if (b->type() != want)
            throw PlanError(std::string("load range ") + which + " bound has type " +
                            core::typeName(b->type()) + " but " + type.path.attrs.front() +
                            " has type " + core::typeName(want));
    };
    checkBound(lo, "lower");
    checkBound(hi, "upper");

    LogicalNode node;
    node.op = LogicalOp::Load;
    node.table = table;
    node.schema = type.schema;
    node.accessPath = type.path;
    node.lo = std::move(lo);
    node.hi = std::move(hi);
    return add(std::move(node), label);
}

int PlanBuilder::map(int in, udf::ExtFn fn, double label) {
    if (!fn.newKeyNames().empty() || fn.rows().size() != 1)
        throw PlanError("map takes a single-row tableau with no new key attributes");
    fn.bind(schemaOf(in));
    LogicalNode node;
    node.op = LogicalOp::Map;
    node.in = {in};
    node.schema = core::extShape(schemaOf(in), fn);
    node.fn = std::move(fn);
    return add(std::move(node), label);
}

int PlanBuilder::ext(int in, udf::ExtFn fn, double label) {
    fn.bind(schemaOf(in));
    LogicalNode node;
    node.op = LogicalOp::Ext;
    node.in = {in};
    node.schema = core::extShape(schemaOf(in), fn);
    node.fn = std::move(fn);
    return add(std::move(node), label);
}

int PlanBuilder::agg(int in, std::vector<std::string> onKeys,
                     std::map<std::string, udf::PlusFn> plus, double label) {
    core::UnionShape shape =
        core::unionShape(schemaOf(in), core::aggKeySchema(schemaOf(in), onKeys), plus);
    LogicalNode node;
    node.op = LogicalOp::Agg;
    node.in = {in};
    node.schema = shape.schema;
    node.onKeys = std::move(onKeys);
    node.plus = std::move(plus);
    return add(std::move(node), label);
}

int PlanBuilder::unionOp(int a, int b, std::map<std::string, udf::PlusFn> plus, double label) {
    core::UnionShape shape = core::unionShape(schemaOf(a), schemaOf(b), plus);
    LogicalNode node;
    node.op = LogicalOp::Union;
    node.in = {a, b};
    node.schema = shape.schema;
    node.plus = std::move(plus);
    return add(std::move(node), label);
}

int PlanBuilder::join(int a, int b, std::map<std::string, udf::TimesFn> times, double label) {
    core::JoinShape shape = core::joinShape(schemaOf(a), schemaOf(b), times);
    LogicalNode node;
    node.op = LogicalOp::Join;
    node.in = {a, b};
    node.schema = shape.schema;
    node.times = std::move(times);
    return add(std::move(node), label);
}

int PlanBuilder::rename(int in, const std::string& from, const std::string& to, double label) {
    LogicalNode node;
    node.op = LogicalOp::Rename;
    node.in = {in};
    node.schema = core::renameShape(schemaOf(in), from, to);
    node.renameFrom = from;
    node.renameTo = to;
    return add(std::move(node), label);
}

int PlanBuilder::sort(int in, AccessPath to, double label) {
    const TableSchema& s = schemaOf(in);
    std::vector<std::string> keys = s.keyNames();
    if (to.attrs.size() != keys.size() ||
        !std::is_permutation(to.attrs.begin(), to.attrs.end(), keys.begin()))
        throw PlanError("sort target " + to.toText() + " is not a permutation of the keys of " +
                        s.describe());
    LogicalNode node;
    node.op = LogicalOp::Sort;
    node.in = {in};
    node.schema = s;
    node.accessPath = std::move(to);
    return add(std::move(node), label);
}

int PlanBuilder::store(int in, const std::string& table, bool upperTriangle, double label) {
    if (table.empty()) throw PlanError("store needs a table name");
    LogicalNode node;
    node.op = LogicalOp::Store;
    node.in = {in};
    node.schema = schemaOf(in);
    node.name = table;
    node.table = table;
    node.upperTriangle = upperTriangle;
    return add(std::move(node), label);
}

void PlanBuilder::bindName(const std::string& name, int id) {
    if (id < 0 || id >= static_cast<int>(plan_.nodes.size()))
        throw PlanError("cannot bind " + name + ": no such node");
    plan_.nodes[static_cast<std::size_t>(id)].name = name;
    plan_.bindings[name] = id;
}

int PlanBuilder::lookup(const std::string& name) const {
    auto it = plan_.bindings.find(name);
    return it == plan_.bindings.end() ? -1 : it->second;
}

LogicalPlan PlanBuilder::finish() {
    LogicalPlan out = std::move(plan_);
    plan_ = LogicalPlan{};
    lastLabel_ = 0;
    for (std::size_t i = 0; i < out.nodes.size(); ++i)
        if (out.nodes[i].op == LogicalOp::Store) out.roots.push_back(static_cast<int>(i));
    if (out.roots.empty()) {
        // No stores: the sinks (nodes nothing consumes) are the results.
        std::vector<bool> consumed(out.nodes.size(), false);
        for (const auto& n : out.nodes)
            for (int in : n.in) consumed[static_cast<std::size_t>(in)] = true;
        for (std::size_t i = 0; i < out.nodes.size(); ++i)
            if (!consumed[i]) out.roots.push_back(static_cast<int>(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reference evaluation

std::map<std::string, AssociativeTable> oracleEvaluate(
    const LogicalPlan& plan, const std::map<std::string, AssociativeTable>& inputs) {
    std::vector<AssociativeTable> value(plan.nodes.size());
    std::map<std::string, AssociativeTable> out;

    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        const LogicalNode& n = plan.nodes[i];
        auto in = [&](std::size_t k) -> const AssociativeTable& {
            return value[static_cast<std::size_t>(n.in.at(k))];
        };
        switch (n.op) {
            case LogicalOp::Load: {
                auto it = inputs.find(n.table);
                if (it == inputs.end())
                    throw UsageError("oracleEvaluate: no input table named '" + n.table + "'");
                if (!(it->second.schema() == n.schema))
                    throw UsageError("oracleEvaluate: input '" + n.table +
                                     "' does not match the schema the plan was built against");
                if (!n.lo && !n.hi) {
                    value[i] = it->second;
                    break;
                }
                // Range restriction on the leading path attribute: rows
                // outside the range drop out of the support.
                AssociativeTable t(n.schema);
                const std::string& attr = n.accessPath.attrs.front();
                for (const auto& row : it->second.rows()) {
                    const ScalarValue& v = row.get(attr);
                    if (n.lo && v < *n.lo) continue;
                    if (n.hi && *n.hi < v) continue;
                    std::vector<ScalarValue> key, vals;
                    for (const auto& kn : n.schema.keyNames()) key.push_back(row.get(kn));
                    for (const auto& vn : n.schema.valueNames()) vals.push_back(row.get(vn));
                    t.put(std::move(key), std::move(vals));
                }
                value[i] = std::move(t);
                break;
            }
            case LogicalOp::Map:
                value[i] = core::oracleMap(in(0), *n.fn);
                break;
            case LogicalOp::Ext:
                value[i] = core::oracleExt(in(0), *n.fn);
                break;
            case LogicalOp::Agg:
                value[i] = core::oracleAgg(in(0), n.onKeys, n.plus);
                break;
            case LogicalOp::Union:
                value[i] = core::oracleUnion(in(0), in(1), n.plus);
                break;
            case LogicalOp::Join:
                value[i] = core::oracleJoin(in(0), in(1), n.times);
                break;
            case LogicalOp::Rename:
                value[i] = core::oracleRename(in(0), n.renameFrom, n.renameTo);
                break;
            case LogicalOp::Sort:
                value[i] = in(0); // order is physical; the table is the same
                break;
            case LogicalOp::Store:
                value[i] = in(0);
                out.insert_or_assign(n.table, value[i]);
                break;
        }
    }
    for (const auto& [name, id] : plan.bindings)
        out.insert_or_assign(name, value[static_cast<std::size_t>(id)]);
    return out;
}

} // namespace lara::plan

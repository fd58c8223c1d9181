#include "laradb/physplan.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace lara::plan {

using core::AttrKind;

const char* toText(PhysOp op) {
    switch (op) {
        case PhysOp::Load: return "Load";
        case PhysOp::Map: return "Map";
        case PhysOp::Ext: return "Ext";
        case PhysOp::ExtOver: return "ExtOver";
        case PhysOp::Sort: return "Sort";
        case PhysOp::SortAgg: return "SortAgg";
        case PhysOp::MergeAgg: return "MergeAgg";
        case PhysOp::MergeUnion: return "MergeUnion";
        case PhysOp::MergeJoin: return "MergeJoin";
        case PhysOp::Rename: return "Rename";
        case PhysOp::Store: return "Store";
    }
    return "?";
}

std::vector<int> PhysPlan::consumersOf(int id) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (int in : nodes[i].in)
            if (in == id) {
                out.push_back(static_cast<int>(i));
                break;
            }
    return out;
}

std::vector<int> PhysPlan::topoOrder() const {
    std::vector<int> order;
    order.reserve(nodes.size());
    std::vector<char> state(nodes.size(), 0); // 0 unseen, 1 on stack, 2 done
    std::function<void(int)> visit = [&](int id) {
        if (id < 0 || id >= static_cast<int>(nodes.size()))
            throw PlanError("plan references node " + std::to_string(id) + " outside the plan");
        char& st = state[static_cast<std::size_t>(id)];
        if (st == 2) return;
        if (st == 1) throw PlanError("plan has a cycle through node " + std::to_string(id));
        st = 1;
        for (int in : nodes[static_cast<std::size_t>(id)].in) visit(in);
        st = 2;
        order.push_back(id);
    };
    for (int r : roots) visit(r);
    return order;
}

void PhysPlan::gc() {
    std::vector<int> keep = topoOrder();
    std::vector<int> remap(nodes.size(), -1);
    std::vector<PhysNode> next;
    next.reserve(keep.size());
    for (int id : keep) {
        remap[static_cast<std::size_t>(id)] = static_cast<int>(next.size());
        next.push_back(std::move(nodes[static_cast<std::size_t>(id)]));
    }
    for (PhysNode& n : next)
        for (int& in : n.in) in = remap[static_cast<std::size_t>(in)];
    for (int& r : roots) r = remap[static_cast<std::size_t>(r)];
    nodes = std::move(next);
}

namespace {

std::string describeNode(const PhysPlan& plan, int id) {
    const PhysNode& n = plan.node(id);
    std::string name = n.name.empty() ? ("node " + std::to_string(id)) : n.name;
    return std::string(toText(n.op)) + " " + name;
}

void requireInputs(const PhysPlan& plan, int id, std::size_t count) {
    const PhysNode& n = plan.node(id);
    if (n.in.size() != count)
        throw PlanError(describeNode(plan, id) + " needs " + std::to_string(count) +
                        " input(s), has " + std::to_string(n.in.size()));
}

bool isPermutationOfKeys(const AccessPath& path, const TableSchema& schema) {
    if (path.size() != schema.keyCount()) return false;
    std::set<std::string> seen;
    for (const std::string& a : path.attrs) {
        if (!schema.hasKey(a) || !seen.insert(a).second) return false;
    }
    return true;
}

/// The shared-key prefix a merge join needs: both inputs sorted by the
/// intersection of their key attributes, in the same order, before anything
/// else. Returns that order (a's path prefix).
std::vector<std::string> mergePrefix(const PhysPlan& plan, int id) {
    const PhysNode& n = plan.node(id);
    const TableSchema& a = plan.node(n.in[0]).schema;
    const TableSchema& b = plan.node(n.in[1]).schema;
    std::set<std::string> bKeys;
    for (const auto& attr : b.attrs())
        if (attr.kind == AttrKind::Key) bKeys.insert(attr.name);
    std::size_t shared = 0;
    for (const auto& attr : a.attrs())
        if (attr.kind == AttrKind::Key && bKeys.count(attr.name)) ++shared;

    const AccessPath& pa = plan.node(n.in[0]).path;
    const AccessPath& pb = plan.node(n.in[1]).path;
    for (std::size_t i = 0; i < shared; ++i) {
        if (i >= pa.size() || i >= pb.size() || pa.attrs[i] != pb.attrs[i] ||
            !bKeys.count(pa.attrs[i]))
            throw PlanError(describeNode(plan, id) +
                            ": inputs are not sorted by their shared keys in a common order (" +
                            pa.toText() + " vs " + pb.toText() + ")");
    }
    return {pa.attrs.begin(), pa.attrs.begin() + static_cast<std::ptrdiff_t>(shared)};
}

void validateNode(const PhysPlan& plan, int id) {
    const PhysNode& n = plan.node(id);
    const auto input = [&](std::size_t i) -> const PhysNode& { return plan.node(n.in[i]); };

    if (n.op != PhysOp::Load && !isPermutationOfKeys(n.path, n.schema))
        throw PlanError(describeNode(plan, id) + ": path " + n.path.toText() +
                        " is not a permutation of its key attributes");

    switch (n.op) {
        case PhysOp::Load: {
            requireInputs(plan, id, 0);
            if (n.table.empty()) throw PlanError(describeNode(plan, id) + ": no source table");
            if (!isPermutationOfKeys(n.path, n.schema))
                throw PlanError(describeNode(plan, id) + ": path does not cover the keys");
            if ((n.lo || n.hi) && n.path.empty())
                throw PlanError(describeNode(plan, id) + ": range bounds need a key attribute");
            break;
        }
        case PhysOp::Map: {
            requireInputs(plan, id, 1);
            if (!n.fn) throw PlanError(describeNode(plan, id) + ": missing function");
            if (!n.fn->newKeyNames().empty())
                throw PlanError(describeNode(plan, id) + ": a map must not add key attributes");
            if (n.path != input(0).path)
                throw PlanError(describeNode(plan, id) + ": map must keep its input order");
            break;
        }
        case PhysOp::Ext: {
            requireInputs(plan, id, 1);
            if (!n.fn) throw PlanError(describeNode(plan, id) + ": missing function");
            AccessPath expect = input(0).path;
            for (const std::string& k : n.fn->newKeyNames()) expect.attrs.push_back(k);
            if (n.path != expect)
                throw PlanError(describeNode(plan, id) + ": ext emits " + expect.toText() +
                                ", node claims " + n.path.toText());
            break;
        }
        case PhysOp::ExtOver: {
            requireInputs(plan, id, 1);
            if (!n.fn) throw PlanError(describeNode(plan, id) + ": missing function");
            const AccessPath& inPath = input(0).path;
            if (inPath.empty())
                throw PlanError(describeNode(plan, id) + ": input has no leading attribute");
            const auto& mono = n.fn->monotoneIn();
            if (std::find(mono.begin(), mono.end(), inPath.attrs.front()) == mono.end())
                throw PlanError(describeNode(plan, id) + ": function is not declared monotone in " +
                                inPath.attrs.front());
            const auto& newKeys = n.fn->newKeyNames();
            if (n.path.size() < newKeys.size() ||
                !std::equal(newKeys.begin(), newKeys.end(), n.path.attrs.begin()))
                throw PlanError(describeNode(plan, id) +
                                ": target path must start with the new key attributes");
            break;
        }
        case PhysOp::Sort: {
            requireInputs(plan, id, 1);
            if (n.schema != input(0).schema)
                throw PlanError(describeNode(plan, id) + ": sort must not change the schema");
            break;
        }
        case PhysOp::SortAgg:
        case PhysOp::MergeAgg: {
            requireInputs(plan, id, 1);
            if (n.on != n.path.attrs)
                throw PlanError(describeNode(plan, id) + ": grouped keys " + AccessPath(n.on).toText() +
                                " must equal the output path " + n.path.toText());
            if (n.op == PhysOp::MergeAgg) {
                const AccessPath& inPath = input(0).path;
                if (!n.path.isPrefixOf(inPath))
                    throw PlanError(describeNode(plan, id) + ": input arrives as " + inPath.toText() +
                                    "; a merge aggregation needs its keys " + n.path.toText() +
                                    " as the leading prefix");
            } else {
                for (const auto& [attr, fn] : n.plus)
                    if (!fn.associative() || !fn.commutative())
                        throw PlanError(describeNode(plan, id) + ": fold for " + attr +
                                        " must be associative and commutative to fold inside sort runs");
            }
            for (const auto& attr : n.schema.attrs())
                if (attr.kind == AttrKind::Value && !n.plus.count(attr.name))
                    throw PlanError(describeNode(plan, id) + ": no fold for value " + attr.name);
            break;
        }
        case PhysOp::MergeUnion: {
            requireInputs(plan, id, 2);
            std::vector<std::string> prefix = mergePrefix(plan, id);
            if (n.on != prefix)
                throw PlanError(describeNode(plan, id) + ": union keys must be the shared prefix");
            if (n.path.attrs != n.on)
                throw PlanError(describeNode(plan, id) + ": output path must equal the union keys");
            break;
        }
        case PhysOp::MergeJoin: {
            requireInputs(plan, id, 2);
            std::vector<std::string> prefix = mergePrefix(plan, id);
            AccessPath expect = input(0).path;
            for (const std::string& attr : input(1).path.attrs)
                if (std::find(prefix.begin(), prefix.end(), attr) == prefix.end())
                    expect.attrs.push_back(attr);
            if (n.path != expect)
                throw PlanError(describeNode(plan, id) + ": join emits " + expect.toText() +
                                ", node claims " + n.path.toText());
            if (n.joinFilter) {
                for (const std::string& ref : n.joinFilter->referencedAttrs())
                    if (!n.schema.hasKey(ref))
                        throw PlanError(describeNode(plan, id) + ": join filter references " + ref +
                                        ", which is not an output key attribute");
            }
            break;
        }
        case PhysOp::Rename: {
            requireInputs(plan, id, 1);
            if (n.renameFrom.empty() || n.renameTo.empty())
                throw PlanError(describeNode(plan, id) + ": missing attribute names");
            AccessPath expect = input(0).path;
            for (std::string& attr : expect.attrs)
                if (attr == n.renameFrom) attr = n.renameTo;
            if (n.path != expect)
                throw PlanError(describeNode(plan, id) + ": rename path must follow the renaming");
            break;
        }
        case PhysOp::Store: {
            requireInputs(plan, id, 1);
            if (n.table.empty()) throw PlanError(describeNode(plan, id) + ": no target table");
            if (n.schema != input(0).schema || n.path != input(0).path)
                throw PlanError(describeNode(plan, id) + ": store must not change schema or order");
            break;
        }
    }
}

bool truthy(const ScalarValue& v) {
    if (v.isNull()) return false;
    switch (v.type()) {
        case core::ScalarType::Bool: return v.asBool();
        case core::ScalarType::Int64: return v.asI64() != 0;
        case core::ScalarType::Float64: return v.asF64() != 0.0;
        default: return true;
    }
}

AssociativeTable filterLeadingRange(const AssociativeTable& t, const std::string& attr,
                                    const std::optional<ScalarValue>& lo,
                                    const std::optional<ScalarValue>& hi) {
    if (!lo && !hi) return t;
    std::vector<std::string> keyNames = t.schema().keyNames();
    std::size_t idx = 0;
    while (idx < keyNames.size() && keyNames[idx] != attr) ++idx;
    LARA_CHECK(idx < keyNames.size(), "range attribute missing from key schema");
    AssociativeTable out(t.schema());
    for (const auto& [key, values] : t.support()) {
        const ScalarValue& k = key[idx];
        if (lo && k < *lo) continue;
        if (hi && *hi < k) continue;
        out.put(key, values);
    }
    return out;
}

} // namespace

void validatePhysical(const PhysPlan& plan) {
    if (plan.roots.empty()) throw PlanError("physical plan has no roots");
    plan.topoOrder(); // range + cycle check over everything reachable
    for (std::size_t id = 0; id < plan.nodes.size(); ++id)
        validateNode(plan, static_cast<int>(id));
}

std::map<std::string, AssociativeTable> oracleEvaluatePhysical(
    const PhysPlan& plan, const std::map<std::string, AssociativeTable>& inputs) {
    std::vector<std::optional<AssociativeTable>> done(plan.nodes.size());
    std::map<std::string, AssociativeTable> results;

    for (int id : plan.topoOrder()) {
        const PhysNode& n = plan.node(id);
        const auto input = [&](std::size_t i) -> const AssociativeTable& {
            return *done[static_cast<std::size_t>(n.in[i])];
        };
        AssociativeTable out;
        switch (n.op) {
            case PhysOp::Load: {
                auto it = inputs.find(n.table);
                if (it == inputs.end())
                    throw UsageError("no input table named '" + n.table + "'");
                if (!(it->second.schema() == n.schema))
                    throw UsageError("input table '" + n.table + "' does not match the plan schema");
                out = filterLeadingRange(it->second,
                                         n.path.empty() ? std::string() : n.path.attrs.front(),
                                         n.lo, n.hi);
                break;
            }
            case PhysOp::Map: out = core::oracleMap(input(0), *n.fn); break;
            case PhysOp::Ext:
            case PhysOp::ExtOver: out = core::oracleExt(input(0), *n.fn); break;
            case PhysOp::Sort: out = input(0); break;
            case PhysOp::SortAgg:
            case PhysOp::MergeAgg: out = core::oracleAgg(input(0), n.on, n.plus); break;
            case PhysOp::MergeUnion: out = core::oracleUnion(input(0), input(1), n.plus); break;
            case PhysOp::MergeJoin: {
                out = core::oracleJoin(input(0), input(1), n.times);
                if (n.joinFilter) {
                    AssociativeTable kept(out.schema());
                    auto names = TupleRow::shareNames(out.schema().keyNames());
                    for (const auto& [key, values] : out.support()) {
                        TupleRow keyRow(names, key);
                        if (truthy(udf::evalScalarExpr(*n.joinFilter, keyRow)))
                            kept.put(key, values);
                    }
                    out = std::move(kept);
                }
                break;
            }
            case PhysOp::Rename: out = core::oracleRename(input(0), n.renameFrom, n.renameTo); break;
            case PhysOp::Store: {
                out = input(0);
                results.insert_or_assign(n.table, out);
                break;
            }
        }
        if (!n.name.empty()) results.insert_or_assign(n.name, out);
        done[static_cast<std::size_t>(id)] = std::move(out);
    }
    return results;
}

} // namespace lara::plan

#pragma once

#include "laradb/logical.hpp"
#include "laradb/physplan.hpp"
#include "laradb/rewrite.hpp"
#include "laradb/store.hpp"

namespace lara::frontend {

using plan::PlanBuilder;

/// A plan node read as a sparse matrix: which key attribute is the row
/// dimension, which is the column dimension, and which value attribute
/// holds the entries. The node must have exactly two key attributes and the
/// named value must be numeric. Entries off the support read as the value
/// default, which plays the role of 0.
struct MatrixView {
    int node = -1;
    std::string row;
    std::string col;
    std::string val;
};

/// Wraps a node as a matrix, inferring row = first key, col = second key,
/// val = the single value attribute. Throws PlanError when the shape does
/// not fit (key count, missing or non-numeric value).
MatrixView matrixView(const PlanBuilder& b, int node);
MatrixView matrixView(const PlanBuilder& b, int node, const std::string& row,
                      const std::string& col, const std::string& val);

// --- Relational constructors -------------------------------------------
// Relations are tables whose "presence" lives in the value part; selection
// is a Map that sends failing tuples to the default value, so they leave
// the support without any dedicated filter node.

/// Select: keep rows satisfying `predicate` (an expression over the node's
/// attributes evaluating to nonzero). Failing rows' values become defaults.
int raSelect(PlanBuilder& b, int in, const std::string& predicate);

/// Project onto `keep` (attribute names). Dropping value attributes is a
/// Map; dropping key attributes aggregates them away and therefore requires
/// a fold for every surviving value attribute — lossy without one.
int raProject(PlanBuilder& b, int in, const std::vector<std::string>& keep,
              const std::map<std::string, udf::PlusFn>& plus = {});

/// Natural join: keys unify by name, shared value attributes combine by ⊗.
int raJoin(PlanBuilder& b, int a, int bIn,
           const std::map<std::string, udf::TimesFn>& times);

/// Cartesian product: a join whose inputs share no key attributes (checked).
int raProduct(PlanBuilder& b, int a, int bIn,
              const std::map<std::string, udf::TimesFn>& times);

/// Group-by aggregate on `groupKeys` folding values by `plus`.
int raAggregate(PlanBuilder& b, int in, const std::vector<std::string>& groupKeys,
                const std::map<std::string, udf::PlusFn>& plus);

/// Set/bag union folding collisions by `plus`.
int raUnion(PlanBuilder& b, int a, int bIn,
            const std::map<std::string, udf::PlusFn>& plus);

/// Bundled arguments for the string-dispatched constructor.
struct RaArgs {
    int a = -1;
    int b = -1;
    std::string predicate;
    std::vector<std::string> keep;
    std::vector<std::string> groupKeys;
    std::map<std::string, udf::PlusFn> plus;
    std::map<std::string, udf::TimesFn> times;
};

/// kind ∈ {select, project, join, product, aggregate, union}.
int buildRaOp(PlanBuilder& b, const std::string& kind, const RaArgs& args);

// --- Linear-algebra constructors ---------------------------------------
// Dimension alignment is by attribute name; constructors insert Rename
// nodes when names must change and collapse rename chains that compose to
// the identity, so transpose ∘ transpose builds no nodes at all.

/// C = A·B under (+, ×): join on the inner dimension, then sum it away.
/// Inner names are aligned by renaming B's row to A's column; colliding
/// outer names get B's column primed.
MatrixView laMatmul(PlanBuilder& b, const MatrixView& a, const MatrixView& bIn);

/// Hadamard (element-wise) product; dimensions aligned to a's names.
MatrixView laEwiseMul(PlanBuilder& b, const MatrixView& a, const MatrixView& bIn);

/// Element-wise sum; dimensions aligned to a's names.
MatrixView laEwiseAdd(PlanBuilder& b, const MatrixView& a, const MatrixView& bIn);

/// Fold entries with `plus`, keeping only the dimensions named in `keep`
/// (subset of {row, col} attribute names; empty = reduce to a scalar).
int laReduce(PlanBuilder& b, const MatrixView& a, const std::vector<std::string>& keep,
             const udf::PlusFn& plus);

/// A(I, J): restrict to the rows / columns present in the indicator
/// vectors (one key attribute, one value attribute holding 1 for present
/// positions). Pass -1 to leave a side unrestricted.
MatrixView laSubref(PlanBuilder& b, const MatrixView& a, int iNode, int jNode);

/// Element-wise function of the entries: `expr` over the value attribute.
MatrixView laApply(PlanBuilder& b, const MatrixView& a, const std::string& expr);

/// Swap the row/column reading of the matrix. Pure metadata: no plan node.
MatrixView laTranspose(const MatrixView& a);

struct LaArgs {
    MatrixView a;
    MatrixView b;
    std::vector<std::string> keep;
    udf::PlusFn plus;
    std::string expr;
    int iNode = -1;
    int jNode = -1;
};

struct LaResult {
    MatrixView view;   // matrix-shaped results
    int node = -1;     // always set; reductions may not be matrix-shaped
};

/// kind ∈ {matmul, ewiseMul, ewiseAdd, reduce, subref, apply, transpose}.
LaResult buildLaOp(PlanBuilder& b, const std::string& kind, const LaArgs& args);

/// Trace of the product of the chain: multiply left to right, filter to the
/// diagonal (an Ext sending off-diagonal entries to the default), then fold
/// everything into a zero-key scalar with +. Dimension names must conform
/// pairwise along the chain.
int tracePlan(PlanBuilder& b, const std::vector<MatrixView>& chain);

/// Physical plan for C = A·B by merge-join outer products: requires A
/// stored inner-dimension-first ([j, i]) and B likewise ([j, k]); merge
/// joins them on j and sort-aggregates the products to [i, k]. Throws
/// PlanError naming the sort to run when a stored path does not fit.
/// `enabled` rewrite rules run over the lowered plan (sort/agg fusion and
/// scan-time deferral are what the shape exercises).
plan::PhysPlan matmulOuterPlan(const std::string& aName, const std::string& bName,
                               const std::string& cName, const storage::Catalog& catalog,
                               const std::vector<rewrite::Rule>& enabled = {rewrite::Rule::A,
                                                                            rewrite::Rule::D});

} // namespace lara::frontend

#pragma once

#include "laradb/physplan.hpp"
#include "laradb/store.hpp"

namespace lara::plan {

struct ExplainOptions {
    /// Default mode folds the plan back to the statements a reader would
    /// write: source statements that were split onto fractional labels stay
    /// hidden unless something visible consumes them, and inserted Sorts
    /// whose only consumers are hidden are hidden too. Verbose prints every
    /// node.
    bool verbose = false;
    /// When set, each line carries an estimated record count from the
    /// catalog's stored row counts (propagated through the plan).
    const storage::Catalog* catalog = nullptr;
};

struct ExplainLine {
    double label = 0.0;
    std::string text;
    int node = -1;
};

std::vector<ExplainLine> explainLines(const PhysPlan& plan, const ExplainOptions& opts = {});
std::string explainPlan(const PhysPlan& plan, const ExplainOptions& opts = {});

} // namespace lara::plan

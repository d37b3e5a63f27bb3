#pragma once

#include "cobra/planner.hpp"

#include <memory>
#include <string>

namespace cobra {

struct PipelineOptions
{
    std::string rules = "all";
    bool legacy_fold_precondition = false;
    int budget = 10000;
};

/// Front half of optimization for one function: CFG, regions, liveness, the initial DAG, loop
/// folding and rule expansion.  Owns everything the DAG points into, so it is neither copied nor moved.
class Pipeline
{
public:
    Pipeline(const ast::FunctionDef &fn, const CostCatalog *catalog, const PipelineOptions &opt = {});
    Pipeline(const Pipeline &) = delete;
    Pipeline &operator=(const Pipeline &) = delete;

    const ast::FunctionDef &fn() const { return *fn_; }
    const RegionTree &regions() const { return *tree_; }
    const FirContext &context() const { return ctx_; }
    Dag dag;
    /// loopToFold events followed by expansion events.
    std::vector<RuleEvent> events;
    ExpansionReport report;

    Plan plan(const AndCostFn &cost) const { return best_plan(dag, cost); }
    ast::FunctionDef emit(const Plan &p) const { return fir_to_code(*fn_, dag, p); }
    ast::FunctionDef emit(const std::map<OrId, AndId> &choice) const;

private:
    std::shared_ptr<const ast::FunctionDef> fn_;
    std::unique_ptr<Cfg> cfg_;
    std::unique_ptr<RegionTree> tree_;
    std::unique_ptr<Liveness> live_;
    FirContext ctx_;
};

/// `program` with the function of the same name replaced by `fn`.
ast::Program substitute(const ast::Program &program, const ast::FunctionDef &fn);

}

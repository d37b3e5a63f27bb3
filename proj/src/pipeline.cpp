#include "cobra/pipeline.hpp"
#include "cobra/errors.hpp"

namespace cobra {

Pipeline::Pipeline(const ast::FunctionDef &fn, const CostCatalog *catalog, const PipelineOptions &opt)
    : fn_(std::make_shared<const ast::FunctionDef>(fn))
{
    cfg_ = std::make_unique<Cfg>(build_cfg(*fn_));
    if (auto bad = audit(*cfg_); !bad.empty()) throw InternalError("malformed CFG: " + bad);
    tree_ = std::make_unique<RegionTree>(build_region_tree(*cfg_));
    live_ = std::make_unique<Liveness>(*cfg_);
    ctx_ = FirContext{fn_.get(), tree_.get(), live_.get(), catalog, opt.legacy_fold_precondition};
    dag = init_dag(*tree_);
    events = to_fir(dag, ctx_);
    report = expand(dag, select_rules(opt.rules), ctx_, opt.budget);
    events.insert(events.end(), report.events.begin(), report.events.end());
    if (auto bad = dag.audit(); !bad.empty()) throw InternalError("DAG audit failed: " + bad);
}

ast::FunctionDef Pipeline::emit(const std::map<OrId, AndId> &choice) const
{
    return fir_to_code(*fn_, dag, [&](OrId o) { return choice.at(o); });
}

ast::Program substitute(const ast::Program &program, const ast::FunctionDef &fn)
{
    ast::Program out = program;
    for (auto &f : out.functions)
        if (f.name == fn.name) f = fn;
    return out;
}

}

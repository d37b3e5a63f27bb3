#pragma once

#include "cobra/cost.hpp"
#include "cobra/dag.hpp"
#include "cobra/fir.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cobra {

/// Cost of one AND node given the costs of its children (in child order).
using AndCostFn = std::function<Cost(const Dag &, const AndNode &, const std::vector<Cost> &)>;

/// The cost model's operator table, reading statistics from `cat`.
AndCostFn catalog_cost(const CostCatalog &cat);
Cost and_node_cost(const Dag &dag, const AndNode &node, const std::vector<Cost> &kids, const CostCatalog &cat);

struct Plan
{
    std::map<OrId, AndId> choice;
    Cost cost;
    /// Best cost of every OR and cost of every AND evaluated.
    std::map<OrId, Cost> or_cost;
    std::map<AndId, Cost> and_cost;

    AndId operator()(OrId o) const { return choice.at(o); }
};

/// Memoized bottom-up search.  Costs within a relative 1e-12 tie; ties prefer fewer query nodes, then
/// alternatives of the original program, then the lowest id.  `forced` pins alternatives of ORs.
Plan best_plan(const Dag &dag, const AndCostFn &cost, const std::map<OrId, AndId> &forced = {});

/// Cost of a complete choice map.
Cost plan_cost(const Dag &dag, const AndCostFn &cost, const std::map<OrId, AndId> &choice);

struct EnumeratedPlan
{
    std::map<OrId, AndId> choice;
    Cost cost;
};

/// Every complete plan reachable from the root with one consistent choice per OR (up to `limit`).
std::vector<EnumeratedPlan> enumerate_plans(const Dag &dag, const AndCostFn &cost, std::size_t limit = 100000);

/// Per-OR table of alternatives with cost breakdowns; the chosen one is marked `*`.
std::string explain(const Dag &dag, const Plan &plan);

/// `P1` when the program joins in a query, `P2` when it prefetches, otherwise `P0`.
std::string classify(const ast::FunctionDef &fn);
/// Number of query execution sites (query loops and executeQuery calls) in a function.
int query_sites(const ast::FunctionDef &fn);

}

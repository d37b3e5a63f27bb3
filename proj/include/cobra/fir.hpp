#pragma once

#include "cobra/cost.hpp"
#include "cobra/dag.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cobra {

/// What the F-IR builders and rules may consult about the function being optimized.
struct FirContext
{
    const ast::FunctionDef *fn = nullptr;
    const RegionTree *tree = nullptr;
    const Liveness *live = nullptr;
    /// Column lists, keys and foreign keys; rules needing them decline without a catalog.
    const CostCatalog *catalog = nullptr;
    /// Reinstates the old single-accumulator precondition of loop folding.
    bool legacy_fold_precondition = false;
};

struct RuleEvent
{
    std::string rule;
    OrId target = -1;
    AndId produced = -1;
    bool fresh = false;  ///< false when hash-consing mapped the result onto an existing alternative
};

/// Alternative for a cursor-loop OR: `v = fold(...)`, or a bind of several accumulators followed by
/// projections.  Empty when the loop does not meet the folding preconditions.
std::optional<Tree> loop_to_fold(Dag &dag, OrId loop, const FirContext &ctx);

/// Runs loop_to_fold on every loop OR, inner loops first.
std::vector<RuleEvent> to_fir(Dag &dag, const FirContext &ctx);

struct Rule
{
    std::string name;
    /// Alternatives (target OR, tree) the rule derives from one AND node.
    std::function<std::vector<std::pair<OrId, Tree>>(const Dag &, AndId, const FirContext &)> apply;
};

/// T1..T5, N1, N2 in priority order.
const std::vector<Rule> &all_rules();
/// Subset by comma-separated names; throws Error on an unknown name.
std::vector<Rule> select_rules(const std::string &list);

struct ExpansionReport
{
    std::vector<RuleEvent> events;
    int applications = 0;
    bool budget_exceeded = false;
};

/// Applies rules to saturation: passes over reachable AND nodes in id order until a pass derives
/// nothing new.  Each distinct (rule, target, result) counts as one application.
ExpansionReport expand(Dag &dag, const std::vector<Rule> &rules, const FirContext &ctx, int budget = 10000);

/// Chosen alternative per OR node.
using Choice = std::function<AndId(OrId)>;

/// Lowers the plan rooted at `dag.root` back to a function with the signature of `fn`.
ast::FunctionDef fir_to_code(const ast::FunctionDef &fn, const Dag &dag, const Choice &choose);

}

#pragma once

#include "ognav/llmgw.hpp"
#include "ognav/scenegraph.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ognav {

enum class ActionKind { explore_scene, explore_obj, declare_done };
enum class DoneReason { none, found, exhausted };

struct PlannerDecision {
    ActionKind action = ActionKind::explore_scene;
    int node_id = -1;
    DoneReason reason = DoneReason::none;
    std::string rationale;

    static PlannerDecision explore_scene(std::string why = {}) { return {ActionKind::explore_scene, -1, DoneReason::none, std::move(why)}; }
    static PlannerDecision explore_obj(int id, std::string why = {}) { return {ActionKind::explore_obj, id, DoneReason::none, std::move(why)}; }
    static PlannerDecision done(DoneReason r, std::string why = {}) { return {ActionKind::declare_done, -1, r, std::move(why)}; }

    // Rationale is commentary; decisions compare by action and target.
    bool same_action(const PlannerDecision& o) const {
        return action == o.action && node_id == o.node_id && reason == o.reason;
    }
};

// "<explore_scene>", "<explore_obj> 3", "<done> found"
std::string action_token(const PlannerDecision& d);

struct AffinityTable {
    // (target, anchor) -> [0, 1]
    std::map<std::pair<std::string, std::string>, double> scores;
    double threshold = 0.5;
    double caption_bonus = 0.1;
    double self_score = 1.0;
    // rooms where the target usually is; a caption naming one earns the bonus
    std::map<std::string, std::vector<std::string>> room_affinity;

    double affinity(const std::string& target, const std::string& label) const;
    bool caption_mentions_room(const std::string& target, const std::string& caption) const;
    // Every score, the threshold and the bonus multiplied by c.
    AffinityTable scaled(double c) const;

    static AffinityTable parse(std::string_view text);
    static AffinityTable load(const std::filesystem::path& path);
};

struct PlannerContext {
    GraphSnapshot nodes;
    std::string target;
    std::vector<PlannerDecision> history;
    // Path length in cells from the agent to a node; kUnreachable when unknown.
    std::function<int(int node_id)> distance_to;
};

class DecisionSource {
public:
    virtual ~DecisionSource() = default;
    // Always returns a decision; explore_obj only ever names an unexplored node.
    virtual PlannerDecision decide(const PlannerContext& ctx) = 0;
};

class OraclePlanner : public DecisionSource {
public:
    explicit OraclePlanner(AffinityTable table, bool use_captions = true)
        : table_(std::move(table)), use_captions_(use_captions) {}

    PlannerDecision decide(const PlannerContext& ctx) override;
    double score(const NodeRecord& node, const std::string& target) const;

private:
    AffinityTable table_;
    bool use_captions_;
};

class LlmPlanner : public DecisionSource {
public:
    LlmPlanner(std::shared_ptr<CompletionBackend> backend, PromptTemplate tmpl, bool use_captions = true)
        : backend_(std::move(backend)), tmpl_(std::move(tmpl)), use_captions_(use_captions) {}

    PlannerDecision decide(const PlannerContext& ctx) override;
    std::string render_prompt(const PlannerContext& ctx) const;

private:
    std::shared_ptr<CompletionBackend> backend_;
    PromptTemplate tmpl_;
    bool use_captions_;
};

// Node list as shown to a planner (model or human): "[id] label: caption".
std::string describe_nodes(const GraphSnapshot& nodes, bool with_captions);

// Planner answer grammar. "<explore_obj>" may name a node by id or by label;
// a label resolves to its lowest-id unexplored node. ProtocolError otherwise.
PlannerDecision parse_action(std::string_view reply, const GraphSnapshot& nodes);

// Marks the node explored and returns the refreshed snapshot. UnknownNode if absent.
GraphSnapshot mark_explored(SceneGraph& graph, int node_id);

}  // namespace ognav

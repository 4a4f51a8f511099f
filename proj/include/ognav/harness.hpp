#pragma once

#include "ognav/caption.hpp"
#include "ognav/knowledge.hpp"
#include "ognav/navexec.hpp"
#include "ognav/perception.hpp"
#include "ognav/planner.hpp"
#include "ognav/pruner.hpp"
#include "ognav/scenegraph.hpp"
#include "ognav/stm.hpp"
#include "ognav/world.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ognav {

enum class PlannerKind { oracle, remote, human };

struct Ablations {
    bool no_stm = false;
    bool no_pruner = false;
    bool no_captions = false;
    std::string name() const;
};

struct AgentParams {
    double dense_radius = 6.0;     // pruning bypass around target candidates
    double goal_radius = 2.0;      // object goal ring
    double neighbor_radius = 4.0;  // caption context
    int decide_every = 10;         // planner cadence while exploring the scene
    int replan_every = 5;          // field refresh when the goal set is unchanged
    double overlap_threshold = 0.25;
    StmConfig stm;
    double verify_error = 0.0;  // oracle verifier flip rate
};

struct RunConfig {
    PlannerKind planner = PlannerKind::oracle;
    // remote: which roles go to the model endpoint (planner always does)
    bool remote_pruner = false;
    bool remote_captions = false;
    bool remote_verifier = false;
    ModelEndpoint endpoint;
    Ablations ablations;
    DetectorConfig detector;  // noise rates; the seed is derived per episode
    std::uint64_t seed = 0;
    WorldConfig world;
    AgentParams params;
    std::optional<int> step_budget;  // overrides the episode's budget
};

struct EpisodeMetrics {
    std::string episode;
    bool success = false;
    int steps_taken = 0;
    int path_length = 0;      // p, cells moved
    int shortest_length = 0;  // l, cells to the nearest success region
    double spl = 0.0;
    bool operator==(const EpisodeMetrics&) const = default;
};

// success ? l / max(p, l) : 0, with 1 for a zero-length successful path.
double compute_spl(bool success, int shortest, int path);

struct StepRecord {
    int step = 0;
    Phase phase = Phase::explore_scene;
    std::string primitive;  // empty for the initial observation
    Pose pose;
    int detections = 0;
    int kept = 0;  // after pruning and bypass
    std::vector<int> created;
    std::optional<PlannerDecision> decision;
    std::string note;
};

struct EpisodeTrace {
    std::vector<StepRecord> steps;
    std::vector<PlannerDecision> planner_decisions;  // what the decision source returned, in order
    std::vector<std::string> notes;                   // e.g. "pruner-degraded"
};

struct EpisodeResult {
    EpisodeMetrics metrics;
    EpisodeTrace trace;
    GraphSnapshot final_graph;
};

// Live view of the loop for servers and loggers.
struct AgentState {
    std::string episode;
    std::string target;
    int step = 0;
    int step_budget = 0;
    Pose pose;
    const EpisodicMap* map = nullptr;
    std::vector<Cell> frontiers;
    GraphSnapshot graph;
    Phase phase = Phase::explore_scene;
    int path_length = 0;
    bool finished = false;
    bool success = false;
};

class EpisodeObserver {
public:
    virtual ~EpisodeObserver() = default;
    virtual void on_step(const AgentState&) {}
    virtual void on_node_created(const AgentState&, int /*node_id*/) {}
    virtual void on_finished(const AgentState&, const EpisodeMetrics&) {}
};

// Model roles of one episode. Null members get the defaults for the RunConfig.
struct AgentServices {
    std::shared_ptr<DecisionSource> planner;
    std::shared_ptr<PruneBackend> pruner;
    std::shared_ptr<Captioner> captioner;
    std::shared_ptr<ViewVerifier> verifier;
    LabelResolver label_resolver;
    std::shared_ptr<CompletionBackend> model;  // shared by the remote roles
    EpisodeObserver* observer = nullptr;
};

// Replays recorded planner decisions in order, then keeps exploring.
class ScriptedPlanner : public DecisionSource {
public:
    explicit ScriptedPlanner(std::vector<PlannerDecision> script) : script_(std::move(script)) {}
    PlannerDecision decide(const PlannerContext& ctx) override;

private:
    std::vector<PlannerDecision> script_;
    std::size_t next_ = 0;
};

EpisodeResult run_episode(const EpisodeSpec& spec, const GridScene& scene, const RunConfig& cfg,
                          const Knowledge& knowledge, AgentServices services = {});
EpisodeResult run_episode(const EpisodeSpec& spec, const RunConfig& cfg, const Knowledge& knowledge,
                          AgentServices services = {});

struct Summary {
    double sr = 0;
    double spl = 0;
};

// Means over episodes; std::invalid_argument on an empty list.
Summary aggregate(std::span<const EpisodeMetrics> metrics);

struct AblationRow {
    std::string name;
    Summary summary;
    std::vector<EpisodeMetrics> metrics;
};

// Rows in fixed order: full, no_stm, no_pruner, no_captions; identical seeds and episodes.
std::vector<AblationRow> run_ablation_suite(const std::vector<EpisodeSpec>& episodes, const RunConfig& base,
                                            const Knowledge& knowledge, const std::vector<std::uint64_t>& seeds);

std::vector<EpisodeMetrics> run_suite(const std::vector<EpisodeSpec>& episodes, const RunConfig& cfg,
                                      const Knowledge& knowledge);

// episode,success,steps,p,l,spl
void write_results_csv(std::ostream& out, std::span<const EpisodeMetrics> metrics);
void print_table(std::ostream& out, const std::vector<std::pair<std::string, Summary>>& rows);
void write_trace(std::ostream& out, const EpisodeTrace& trace);

}  // namespace ognav

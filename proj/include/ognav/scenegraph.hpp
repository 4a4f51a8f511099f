#pragma once

#include "ognav/geometry.hpp"
#include "ognav/perception.hpp"
#include "ognav/pruner.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ognav {

struct LabelVote {
    int step = 0;
    std::string label;
    long seq = 0;  // arrival order across the whole graph
};

// Detections fused into a node at one step.
struct NodeFrame {
    int step = 0;
    std::vector<Detection> detections;
};

struct ObjectNode {
    int id = 0;
    std::vector<LabelVote> label_votes;  // chronological
    std::string resolved_label;
    VoxelSet cloud;
    Point3 centroid;
    std::vector<NodeFrame> frames;  // strictly increasing step
    std::optional<std::string> caption;
    bool caption_degraded = false;
    bool explored = false;
    bool target_candidate = false;

    std::map<std::string, int> vote_counts() const;
    bool has_vote(const std::string& label) const;
    // Largest mask seen; earliest wins ties.
    const Detection& best_view() const;
};

// Plurality vote; a tie goes to the label voted most recently.
std::string plurality_label(const ObjectNode& node);

using LabelResolver = std::function<std::string(const ObjectNode&)>;

// Asks a vision-language model to pick among conflicting labels; falls back
// to plurality on failure or when the answer is not one of the candidates.
class LvlmLabelResolver {
public:
    LvlmLabelResolver(std::shared_ptr<CompletionBackend> backend, PromptTemplate tmpl)
        : backend_(std::move(backend)), tmpl_(std::move(tmpl)) {}
    std::string operator()(const ObjectNode& node) const;

private:
    std::shared_ptr<CompletionBackend> backend_;
    PromptTemplate tmpl_;
};

// |a ∩ b| / min(|a|, |b|). Throws std::invalid_argument on an empty input.
double overlap(const VoxelSet& a, const VoxelSet& b);

struct SceneGraphConfig {
    double overlap_threshold = 0.25;
    SynonymMap synonyms;
    std::string target_label;
};

enum class IntegrateKind { created, merged };

struct IntegrateEvent {
    int node_id = 0;
    IntegrateKind kind = IntegrateKind::created;
};

struct NodeRecord {
    int id = 0;
    std::string label;
    Point3 centroid;
    std::optional<std::string> caption;
    bool explored = false;
    bool target_candidate = false;
    int frame_count = 0;
    bool operator==(const NodeRecord&) const = default;
};

using GraphSnapshot = std::vector<NodeRecord>;

class SceneGraph {
public:
    explicit SceneGraph(SceneGraphConfig cfg = {}, LabelResolver resolver = {});

    // Fuses detections of step t. Event ids refer to surviving nodes.
    std::vector<IntegrateEvent> integrate(std::span<const Detection> detections, int t);

    const std::vector<ObjectNode>& nodes() const { return nodes_; }
    const ObjectNode* find(int id) const;
    const ObjectNode& node(int id) const;
    const SceneGraphConfig& config() const { return cfg_; }

    void mark_explored(int id);
    void set_caption(int id, std::string caption, bool degraded = false);
    std::string resolve_label(const ObjectNode& node) const;

    bool semantic_match(const ObjectNode& node, const std::string& label) const;
    bool semantic_match(const ObjectNode& a, const ObjectNode& b) const;

    GraphSnapshot snapshot() const;
    // Follows merges: the id that now holds what `id` once held.
    int survivor_of(int id) const;

private:
    ObjectNode& mutable_node(int id);
    void absorb(ObjectNode& into, const Detection& det, int t);
    void refresh(ObjectNode& node) const;
    // Merges until no pair involving `id` matches; returns the surviving id.
    int restore_closure(int id, std::map<int, int>& forwarded);

    SceneGraphConfig cfg_;
    LabelResolver resolver_;
    std::vector<ObjectNode> nodes_;  // sorted by id
    std::map<int, int> merged_into_;
    int next_id_ = 0;
    long next_vote_ = 0;
};

// One line per node: id, label, centroid, frame count, caption.
void dump_graph(const GraphSnapshot& snap, std::ostream& out);

}  // namespace ognav

#include "ognav/scenegraph.hpp"
#include "ognav/errors.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace ognav {

std::map<std::string, int> ObjectNode::vote_counts() const {
    std::map<std::string, int> counts;
    for (const auto& v : label_votes) ++counts[v.label];
    return counts;
}

bool ObjectNode::has_vote(const std::string& label) const {
    return std::any_of(label_votes.begin(), label_votes.end(), [&](const LabelVote& v) { return v.label == label; });
}

const Detection& ObjectNode::best_view() const {
    const Detection* best = nullptr;
    for (const auto& f : frames)
        for (const auto& d : f.detections)
            if (!best || d.mask.size() > best->mask.size()) best = &d;
    if (!best) throw std::logic_error("node without frames");
    return *best;
}

std::string plurality_label(const ObjectNode& node) {
    if (node.label_votes.empty()) throw std::invalid_argument("node has no label votes");
    const auto counts = node.vote_counts();
    int top = 0;
    for (const auto& [label, n] : counts) top = std::max(top, n);
    for (auto it = node.label_votes.rbegin(); it != node.label_votes.rend(); ++it)
        if (counts.at(it->label) == top) return it->label;
    return node.label_votes.back().label;
}

std::string LvlmLabelResolver::operator()(const ObjectNode& node) const {
    const auto counts = node.vote_counts();
    if (counts.size() == 1) return counts.begin()->first;
    std::vector<std::string> options;
    for (const auto& [label, n] : counts) options.push_back(label);
    const Detection& view = node.best_view();
    const CellRect& b = view.bbox;
    try {
        const std::string request =
            render(tmpl_, {{"labels", format_label_list(options)},
                           {"view", "frame " + std::to_string(view.frame) + ", box [" + std::to_string(b.x0) + "," +
                                        std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
                                        std::to_string(b.y1) + "], " + std::to_string(view.mask.size()) +
                                        " voxels"}});
        const std::string answer = parse_free_text(backend_->complete(to_string(PromptRole::label_resolve), request));
        if (counts.count(answer)) return answer;
    } catch (const Error&) {
    }
    return plurality_label(node);
}

double overlap(const VoxelSet& a, const VoxelSet& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("overlap of an empty voxel set");
    return static_cast<double>(intersection_size(a, b)) / static_cast<double>(std::min(a.size(), b.size()));
}

SceneGraph::SceneGraph(SceneGraphConfig cfg, LabelResolver resolver)
    : cfg_(std::move(cfg)), resolver_(std::move(resolver)) {}

const ObjectNode* SceneGraph::find(int id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const ObjectNode& n, int v) { return n.id < v; });
    return it != nodes_.end() && it->id == id ? &*it : nullptr;
}

const ObjectNode& SceneGraph::node(int id) const {
    const ObjectNode* n = find(id);
    if (!n) throw UnknownNode("no node " + std::to_string(id));
    return *n;
}

ObjectNode& SceneGraph::mutable_node(int id) { return const_cast<ObjectNode&>(node(id)); }

void SceneGraph::mark_explored(int id) { mutable_node(id).explored = true; }

void SceneGraph::set_caption(int id, std::string caption, bool degraded) {
    auto& n = mutable_node(id);
    n.caption = std::move(caption);
    n.caption_degraded = degraded;
}

std::string SceneGraph::resolve_label(const ObjectNode& node) const {
    const auto counts = node.vote_counts();
    if (counts.size() == 1) return counts.begin()->first;
    return resolver_ ? resolver_(node) : plurality_label(node);
}

bool SceneGraph::semantic_match(const ObjectNode& node, const std::string& label) const {
    return cfg_.synonyms.equivalent(node.resolved_label, label) || node.has_vote(label);
}

bool SceneGraph::semantic_match(const ObjectNode& a, const ObjectNode& b) const {
    return cfg_.synonyms.equivalent(a.resolved_label, b.resolved_label) || b.has_vote(a.resolved_label) ||
           a.has_vote(b.resolved_label);
}

void SceneGraph::refresh(ObjectNode& node) const {
    node.resolved_label = resolve_label(node);
    node.centroid = centroid(node.cloud);
    node.target_candidate =
        !cfg_.target_label.empty() && cfg_.synonyms.equivalent(node.resolved_label, cfg_.target_label);
}

void SceneGraph::absorb(ObjectNode& into, const Detection& det, int t) {
    into.cloud.insert(det.mask.begin(), det.mask.end());
    into.label_votes.push_back({t, det.label, next_vote_++});
    if (!into.frames.empty() && into.frames.back().step == t) {
        into.frames.back().detections.push_back(det);
    } else {
        into.frames.push_back({t, {det}});
    }
    refresh(into);
}

int SceneGraph::restore_closure(int id, std::map<int, int>& forwarded) {
    for (;;) {
        const ObjectNode& x = node(id);
        const ObjectNode* partner = nullptr;
        for (const auto& y : nodes_) {
            if (y.id == x.id) continue;
            if (overlap(x.cloud, y.cloud) >= cfg_.overlap_threshold && semantic_match(x, y)) {
                partner = &y;
                break;
            }
        }
        if (!partner) return id;

        const int keep = std::min(x.id, partner->id);
        const int drop = std::max(x.id, partner->id);
        ObjectNode gone = node(drop);
        ObjectNode& s = mutable_node(keep);
        s.cloud.insert(gone.cloud.begin(), gone.cloud.end());
        s.label_votes.insert(s.label_votes.end(), gone.label_votes.begin(), gone.label_votes.end());
        std::sort(s.label_votes.begin(), s.label_votes.end(),
                         [](const LabelVote& a, const LabelVote& b) { return a.seq < b.seq; });
        std::vector<NodeFrame> frames;
        std::merge(s.frames.begin(), s.frames.end(), gone.frames.begin(), gone.frames.end(),
                   std::back_inserter(frames), [](const NodeFrame& a, const NodeFrame& b) { return a.step < b.step; });
        s.frames.clear();
        for (auto& f : frames) {
            if (!s.frames.empty() && s.frames.back().step == f.step) {
                auto& dst = s.frames.back().detections;
                dst.insert(dst.end(), f.detections.begin(), f.detections.end());
            } else {
                s.frames.push_back(std::move(f));
            }
        }
        if (!s.caption && gone.caption) {
            s.caption = gone.caption;
            s.caption_degraded = gone.caption_degraded;
        }
        s.explored = s.explored && gone.explored;
        refresh(s);
        nodes_.erase(std::find_if(nodes_.begin(), nodes_.end(), [&](const ObjectNode& n) { return n.id == drop; }));
        forwarded[drop] = keep;
        merged_into_[drop] = keep;
        id = keep;
    }
}

std::vector<IntegrateEvent> SceneGraph::integrate(std::span<const Detection> detections, int t) {
    std::vector<IntegrateEvent> events;
    std::map<int, int> forwarded;
    for (const auto& det : detections) {
        if (det.mask.empty()) continue;
        ObjectNode* best = nullptr;
        double best_overlap = -1;
        for (auto& n : nodes_) {
            if (!semantic_match(n, det.label)) continue;
            const double ov = overlap(n.cloud, det.mask);
            if (ov >= cfg_.overlap_threshold && ov > best_overlap) {
                best = &n;
                best_overlap = ov;
            }
        }
        int id;
        if (best) {
            absorb(*best, det, t);
            id = best->id;
            events.push_back({id, IntegrateKind::merged});
        } else {
            ObjectNode n;
            n.id = next_id_++;
            n.cloud = det.mask;
            n.label_votes.push_back({t, det.label, next_vote_++});
            n.frames.push_back({t, {det}});
            refresh(n);
            id = n.id;
            nodes_.push_back(std::move(n));
            events.push_back({id, IntegrateKind::created});
        }
        restore_closure(id, forwarded);
    }
    for (auto& e : events)
        while (forwarded.count(e.node_id)) e.node_id = forwarded.at(e.node_id);
    return events;
}

int SceneGraph::survivor_of(int id) const {
    for (auto it = merged_into_.find(id); it != merged_into_.end(); it = merged_into_.find(id)) id = it->second;
    return id;
}

GraphSnapshot SceneGraph::snapshot() const {
    GraphSnapshot snap;
    snap.reserve(nodes_.size());
    for (const auto& n : nodes_)
        snap.push_back({n.id, n.resolved_label, n.centroid, n.caption, n.explored, n.target_candidate,
                        static_cast<int>(n.frames.size())});
    return snap;
}

void dump_graph(const GraphSnapshot& snap, std::ostream& out) {
    char buf[96];
    for (const auto& r : snap) {
        std::snprintf(buf, sizeof buf, "%.3f %.3f %.3f", r.centroid.x, r.centroid.y, r.centroid.z);
        out << r.id << '\t' << r.label << '\t' << buf << '\t' << r.frame_count << '\t' << r.caption.value_or("")
            << '\n';
    }
}

}  // namespace ognav

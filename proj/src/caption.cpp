#include "ognav/caption.hpp"
#include "ognav/errors.hpp"

#include <algorithm>

namespace ognav {

const char* to_string(Phase p) { return p == Phase::explore_scene ? "explore_scene" : "explore_obj"; }

CaptionJob make_caption_job(const SceneGraph& graph, int node_id, const GridScene* scene, double neighbor_radius) {
    const ObjectNode& n = graph.node(node_id);
    CaptionJob job;
    job.node_id = node_id;
    job.label = n.resolved_label;
    job.best_view = n.best_view();
    job.best_view_step = job.best_view.frame;

    std::vector<std::pair<double, std::string>> near;
    for (const auto& other : graph.nodes()) {
        if (other.id == node_id) continue;
        const double d = planar_distance(n.centroid, other.centroid);
        if (d <= neighbor_radius + 1e-9) near.emplace_back(d, other.resolved_label);
    }
    std::sort(near.begin(), near.end());
    for (const auto& [d, label] : near)
        if (label != job.label && std::find(job.neighbor_labels.begin(), job.neighbor_labels.end(), label) ==
                                      job.neighbor_labels.end())
            job.neighbor_labels.push_back(label);

    if (scene) {
        if (const Room* room = scene->room_at(project(n.centroid))) job.room = room->name;
        if (job.best_view.source_object)
            if (const ObjectInstance* obj = scene->object(*job.best_view.source_object))
                for (const auto& a : obj->attributes)
                    if (a != "small" && a != "large") job.attributes.push_back(a);
    }
    return job;
}

std::string template_caption(const CaptionJob& job) {
    std::string s = "a ";
    for (const auto& a : job.attributes) s += a + " ";
    s += job.label;
    if (!job.neighbor_labels.empty()) {
        s += " near ";
        for (std::size_t i = 0; i < job.neighbor_labels.size(); ++i) {
            if (i) s += ", ";
            s += job.neighbor_labels[i];
        }
    }
    if (!job.room.empty()) s += " in the " + job.room;
    return s;
}

std::string LvlmCaptioner::caption(const CaptionJob& job) {
    const CellRect& b = job.best_view.bbox;
    const std::string request = render(
        tmpl_, {{"label", job.label},
                {"view", "frame " + std::to_string(job.best_view_step) + ", box [" + std::to_string(b.x0) + "," +
                             std::to_string(b.y0) + "," + std::to_string(b.x1) + "," + std::to_string(b.y1) + "]"},
                {"neighbors", format_label_list(job.neighbor_labels)},
                {"room", job.room.empty() ? "unknown" : job.room}});
    return parse_free_text(backend_->complete(to_string(PromptRole::caption), request));
}

void CaptionQueue::enqueue(int node_id) {
    if (std::find(pending_.begin(), pending_.end(), node_id) == pending_.end()) pending_.push_back(node_id);
}

int CaptionQueue::drain(const Context& ctx) {
    // survivors of merges may have inherited no caption
    for (const auto& n : ctx.graph->nodes())
        if (!n.caption) enqueue(n.id);
    int done = 0;
    for (int id : pending_) {
        if (!ctx.graph->find(id)) continue;  // merged away
        const CaptionJob job = make_caption_job(*ctx.graph, id, ctx.scene, ctx.neighbor_radius);
        try {
            ctx.graph->set_caption(id, ctx.captioner->caption(job));
        } catch (const Error&) {
            ctx.graph->set_caption(id, template_caption(job), true);
        }
        ++done;
    }
    pending_.clear();
    return done;
}

int CaptionQueue::on_step(const Context& ctx) { return phase_ == Phase::explore_scene ? drain(ctx) : 0; }

int CaptionQueue::flush_on_phase_end(const Context& ctx) {
    phase_ = Phase::explore_scene;
    return drain(ctx);
}

}  // namespace ognav

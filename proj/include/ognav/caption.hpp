#pragma once

#include "ognav/llmgw.hpp"
#include "ognav/scenegraph.hpp"
#include "ognav/world.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ognav {

enum class Phase { explore_scene, explore_obj };
const char* to_string(Phase p);

struct CaptionJob {
    int node_id = 0;
    std::string label;
    int best_view_step = 0;
    Detection best_view;
    std::vector<std::string> attributes;
    std::vector<std::string> neighbor_labels;  // nearest first
    std::string room;                          // empty if unknown
};

// Gathers the context of one node. `scene` supplies room names and the
// appearance attributes a vision model would read off the crop.
CaptionJob make_caption_job(const SceneGraph& graph, int node_id, const GridScene* scene, double neighbor_radius = 4.0);

// "a {attributes} {label} near {neighbors} in the {room}", empty clauses elided.
std::string template_caption(const CaptionJob& job);

class Captioner {
public:
    virtual ~Captioner() = default;
    virtual std::string caption(const CaptionJob& job) = 0;
};

class TemplateCaptioner : public Captioner {
public:
    std::string caption(const CaptionJob& job) override { return template_caption(job); }
};

class LvlmCaptioner : public Captioner {
public:
    LvlmCaptioner(std::shared_ptr<CompletionBackend> backend, PromptTemplate tmpl)
        : backend_(std::move(backend)), tmpl_(std::move(tmpl)) {}
    std::string caption(const CaptionJob& job) override;

private:
    std::shared_ptr<CompletionBackend> backend_;
    PromptTemplate tmpl_;
};

// Captions immediately while exploring the scene; holds jobs back while the
// agent travels to a chosen node and releases them when that phase ends.
class CaptionQueue {
public:
    struct Context {
        SceneGraph* graph = nullptr;
        Captioner* captioner = nullptr;
        const GridScene* scene = nullptr;
        double neighbor_radius = 4.0;
    };

    Phase phase() const { return phase_; }
    const std::vector<int>& pending() const { return pending_; }

    void enqueue(int node_id);
    // Captions everything pending when in explore_scene; returns how many.
    int on_step(const Context& ctx);
    // explore_obj -> explore_scene transition; captions all deferred nodes.
    int flush_on_phase_end(const Context& ctx);
    void begin_object_phase() { phase_ = Phase::explore_obj; }

private:
    int drain(const Context& ctx);

    Phase phase_ = Phase::explore_scene;
    std::vector<int> pending_;
};

}  // namespace ognav

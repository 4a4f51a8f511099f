#include "ognav/harness.hpp"
#include "ognav/errors.hpp"
#include "ognav/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <cstdio>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ognav {

std::string Ablations::name() const {
    std::string n;
    if (no_stm) n += "no_stm";
    if (no_pruner) n += std::string(n.empty() ? "" : "+") + "no_pruner";
    if (no_captions) n += std::string(n.empty() ? "" : "+") + "no_captions";
    return n.empty() ? "full" : n;
}

double compute_spl(bool success, int shortest, int path) {
    if (!success) return 0.0;
    const int denom = std::max(path, shortest);
    return denom == 0 ? 1.0 : static_cast<double>(shortest) / denom;
}

PlannerDecision ScriptedPlanner::decide(const PlannerContext&) {
    if (next_ < script_.size()) return script_[next_++];
    return PlannerDecision::explore_scene("script exhausted");
}

namespace {

class Agent {
public:
    Agent(const EpisodeSpec& spec, const GridScene& scene, const RunConfig& cfg, const Knowledge& knowledge,
          AgentServices services)
        : spec_(with_budget(spec, cfg)),
          cfg_(cfg),
          knowledge_(knowledge),
          services_(std::move(services)),
          world_(scene, spec_, cfg.world),
          map_(scene.width(), scene.height()),
          graph_(SceneGraphConfig{cfg.params.overlap_threshold, knowledge.anchors.synonyms, spec.target_label},
                 services_.label_resolver),
          stm_(cfg.params.stm),
          pruner_(services_.pruner) {
        detector_ = cfg.detector;
        detector_.primed_label.reset();
        detector_.seed = mix_seed({cfg.seed, hash_text(spec.name)});
        primed_ = detector_;
        primed_.primed_label = spec.target_label;
    }

    EpisodeResult run() {
        if (world_.steps_remaining() > 0) {
            process(world_.observe(), "");
            loop();
        }
        return finish();
    }

private:
    static EpisodeSpec with_budget(EpisodeSpec spec, const RunConfig& cfg) {
        if (cfg.step_budget) spec.step_budget = *cfg.step_budget;
        return spec;
    }

    const GridScene& scene() const { return world_.scene(); }
    const std::string& target() const { return spec_.target_label; }

    void loop() {
        while (!world_.finished()) {
            if (approach_) {
                if (approach_->contains(world_.pose().cell) || approach_->cells.empty()) {
                    act(MovePrimitive::stop);
                    break;
                }
                if (!drive(*approach_)) act(MovePrimitive::stop);
                continue;
            }
            if (phase_ == Phase::explore_scene && need_decision_) {
                decide();
                if (approach_ || done_) continue;
            }
            if (done_) break;

            if (phase_ == Phase::explore_obj) {
                GoalMap goal;
                try {
                    goal = build_goal_map(PlannerDecision::explore_obj(current_node_), graph_.snapshot(), map_,
                                          world_.pose().cell, cfg_.params.goal_radius);
                } catch (const Stuck&) {
                    end_object_phase(false, "node unreachable; abandoned");
                    continue;
                }
                if (goal.mode == GoalMode::object && goal.contains(world_.pose().cell)) {
                    arrive();
                    continue;
                }
                if (!drive(goal)) end_object_phase(false, "lost path to node; abandoned");
                continue;
            }

            GoalMap goal;
            try {
                goal = build_goal_map(PlannerDecision::explore_scene(), graph_.snapshot(), map_, world_.pose().cell);
            } catch (const Stuck&) {
                // the map is complete, but small things may still be out of resolving range
                try {
                    goal = coverage_goal(map_, world_.pose().cell);
                } catch (const Stuck&) {
                    record_decision(PlannerDecision::done(DoneReason::exhausted, "nothing left to explore"));
                    done_ = true;
                    break;
                }
            }
            if (!drive(goal)) {
                record_decision(PlannerDecision::done(DoneReason::exhausted, "frontier unreachable"));
                done_ = true;
                break;
            }
        }
    }

    // One primitive toward `goal`. False when the field offers no way forward.
    bool drive(const GoalMap& goal) {
        const Cell here = world_.pose().cell;
        const bool stale = !(goal == field_goal_) || world_.steps_taken() - field_step_ >= cfg_.params.replan_every ||
                           !field_.finite(here);
        if (stale) {
            field_ = fmm(map_, goal);
            field_goal_ = goal;
            field_step_ = world_.steps_taken();
        }
        MovePrimitive p;
        try {
            p = next_primitive(field_, world_.pose());
        } catch (const Stuck&) {
            return false;
        }
        // on a frontier or fallback goal: look around instead of stopping
        if (p == MovePrimitive::stop) p = MovePrimitive::turn_left;
        act(p);
        return true;
    }

    void act(MovePrimitive p) {
        Observation obs = world_.step(p);
        process(obs, to_string(p));
        if (phase_ == Phase::explore_scene && !approach_) {
            if (new_nodes_ || world_.steps_taken() - last_decision_step_ >= cfg_.params.decide_every)
                need_decision_ = true;
        }
    }

    // Returns the candidate detections (primed frames only).
    std::vector<Detection> process(const Observation& obs, const std::string& primitive, bool primed = false) {
        StepRecord rec;
        rec.step = obs.step;
        rec.primitive = primitive;
        rec.pose = obs.pose;
        rec.phase = phase_;

        map_.update(obs, cfg_.world.small_object_range);
        std::vector<Detection> dets = detect(obs, scene(), detector_);
        std::vector<Detection> primed_dets;
        if (primed) primed_dets = detect(obs, scene(), primed_);
        rec.detections = static_cast<int>(dets.size());

        if (cfg_.ablations.no_stm && !found_) {
            for (const auto* list : {&dets, &primed_dets})
                for (const auto& d : *list)
                    if (!found_ && knowledge_.anchors.synonyms.equivalent(d.label, target())) {
                        found_ = true;
                        start_approach(d);
                        rec.note = "target detected; accepted without verification";
                        record_decision(PlannerDecision::done(DoneReason::found, "unverified detection"));
                    }
        }

        // bypass near target candidates, prune the rest
        DensityContext density{{}, cfg_.params.dense_radius, target()};
        for (const auto& n : graph_.nodes())
            if (n.target_candidate) density.candidate_centroids.push_back(n.centroid);
        std::vector<char> keep(dets.size(), 0);
        PruneRequest req;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (should_bypass(dets[i], density)) {
                keep[i] = 1;
            } else {
                req.input_labels.push_back(dets[i].label);
            }
        }
        if (!req.input_labels.empty()) {
            const PruneOutcome out = pruner_.prune(req);
            if (out.degraded && !pruner_degraded_) {
                pruner_degraded_ = true;
                trace_.notes.push_back("pruner-degraded");
            }
            if (!out.rejected.empty()) {
                if (!rec.note.empty()) rec.note += "; ";
                rec.note += "pruner invented " + format_label_list(out.rejected);
            }
            const std::set<std::string> kept(out.kept.begin(), out.kept.end());
            for (std::size_t i = 0; i < dets.size(); ++i)
                if (!keep[i] && kept.count(dets[i].label)) keep[i] = 1;
        }
        std::vector<Detection> fused;
        std::vector<std::size_t> origin;
        for (std::size_t i = 0; i < dets.size(); ++i)
            if (keep[i]) {
                fused.push_back(dets[i]);
                origin.push_back(i);
            }
        rec.kept = static_cast<int>(fused.size());

        const auto events = graph_.integrate(fused, obs.step);
        new_nodes_ = false;
        for (const auto& e : events)
            if (e.kind == IntegrateKind::created && graph_.find(e.node_id)) {
                captions_.enqueue(e.node_id);
                rec.created.push_back(e.node_id);
                new_nodes_ = true;
            }
        captions_.on_step(caption_context());

        if (phase_ == Phase::explore_obj) {
            StmFrame frame{obs.step, obs.pose, {}, {}};
            if (primed) {
                frame.detections = primed_dets;
            } else {
                frame.detections = dets;
                for (std::size_t k = 0; k < events.size() && k < origin.size(); ++k)
                    frame.node_attribution[static_cast<int>(origin[k])] = events[k].node_id;
            }
            stm_.record(std::move(frame));
        }

        trace_.steps.push_back(std::move(rec));
        notify(rec_created_ids());
        if (!primed) return {};
        std::vector<Detection> candidates;
        for (auto& d : primed_dets)
            if (knowledge_.anchors.synonyms.equivalent(d.label, target())) candidates.push_back(std::move(d));
        return candidates;
    }

    std::vector<int> rec_created_ids() const { return trace_.steps.back().created; }

    CaptionQueue::Context caption_context() {
        return {&graph_, services_.captioner.get(), &scene(), cfg_.params.neighbor_radius};
    }

    void decide() {
        PlannerContext ctx;
        ctx.nodes = graph_.snapshot();
        ctx.target = target();
        ctx.history = trace_.planner_decisions;
        const auto dist = bfs_distances(map_, world_.pose().cell);
        ctx.distance_to = [&, dist](int id) {
            const ObjectNode* n = graph_.find(id);
            if (!n) return kUnreachable;
            const Cell center = project(n->centroid);
            int best = kUnreachable;
            const int r = static_cast<int>(std::ceil(cfg_.params.goal_radius));
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const Cell c{center.x + dx, center.y + dy};
                    if (!map_.in_bounds(c) || distance(c, center) > cfg_.params.goal_radius + 1e-9) continue;
                    const int d = dist[static_cast<std::size_t>(c.y) * map_.width() + c.x];
                    if (d >= 0) best = std::min(best, d);
                }
            return best;
        };
        PlannerDecision d = services_.planner->decide(ctx);
        trace_.planner_decisions.push_back(d);
        last_decision_step_ = world_.steps_taken();
        need_decision_ = false;

        // a source may not send the agent to an explored or missing node
        if (d.action == ActionKind::explore_obj) {
            const ObjectNode* n = graph_.find(d.node_id);
            if (!n || n->explored) d = PlannerDecision::explore_scene("rejected invalid node choice");
        }
        record_decision(d);
        if (d.action == ActionKind::explore_obj) {
            phase_ = Phase::explore_obj;
            current_node_ = d.node_id;
            captions_.begin_object_phase();
            stm_.clear();
            stm_.set_phase(Phase::explore_obj);
        } else if (d.action == ActionKind::declare_done) {
            done_ = true;
            if (d.reason == DoneReason::found) found_ = true;
            if (!world_.finished()) act(MovePrimitive::stop);
        }
    }

    void arrive() {
        if (world_.steps_remaining() < 4) {
            // not enough budget left to look around
            done_ = true;
            while (!world_.finished()) act(MovePrimitive::turn_left);
            return;
        }
        std::vector<Detection> candidates;
        for (int i = 0; i < 4 && !approach_; ++i) {
            Observation obs = world_.step(MovePrimitive::turn_left);
            auto c = process(obs, to_string(MovePrimitive::turn_left), true);
            candidates.insert(candidates.end(), c.begin(), c.end());
        }
        if (approach_) {  // no-STM agent already committed during the pan
            phase_ = Phase::explore_scene;
            return;
        }

        std::vector<VerificationResult> results;
        if (!cfg_.ablations.no_stm) {
            for (const auto& cand : candidates) {
                const auto views = stm_.retrieve_views(cand);
                if (views.empty()) continue;
                results.push_back(stm_.verify(cand, views, *services_.verifier, target()));
            }
        }
        const int node = graph_.survivor_of(current_node_);
        const PhaseOutcome outcome = stm_.conclude(results, node, &graph_);
        if (outcome == PhaseOutcome::found) {
            const auto it = std::find_if(results.begin(), results.end(), [](const VerificationResult& r) { return r.verdict; });
            char note[96];
            std::snprintf(note, sizeof note, "verified target (%.2f of %zu views)", it->confirm_fraction, it->views.size());
            trace_.steps.back().note = note;
            found_ = true;
            record_decision(PlannerDecision::done(DoneReason::found, note));
            start_approach(it->candidate);
            end_object_phase(true, "");
        } else {
            end_object_phase(false, "no verified target near node");
        }
    }

    void end_object_phase(bool found, const std::string& note) {
        if (!found && current_node_ >= 0) {
            const int node = graph_.survivor_of(current_node_);
            if (graph_.find(node)) graph_.mark_explored(node);
        }
        if (!note.empty() && !trace_.steps.empty()) trace_.steps.back().note = note;
        stm_.clear();
        stm_.set_phase(Phase::explore_scene);
        phase_ = Phase::explore_scene;
        captions_.flush_on_phase_end(caption_context());
        current_node_ = -1;
        need_decision_ = true;
    }

    void start_approach(const Detection& det) {
        GoalMap g;
        g.mode = GoalMode::approach;
        const auto dist = bfs_distances(map_, world_.pose().cell);
        const auto cells = footprint_of(det.mask);
        const int r = spec_.success_radius;
        std::set<Cell> goal;
        for (const auto& f : cells)
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const Cell c{f.x + dx, f.y + dy};
                    if (!map_.is_free(c) || distance(c, f) > r + 1e-9) continue;
                    if (dist[static_cast<std::size_t>(c.y) * map_.width() + c.x] >= 0) goal.insert(c);
                }
        g.cells.assign(goal.begin(), goal.end());
        approach_ = g;
    }

    void record_decision(const PlannerDecision& d) {
        if (!trace_.steps.empty() && !trace_.steps.back().decision) {
            trace_.steps.back().decision = d;
        } else {
            StepRecord rec;
            rec.step = world_.steps_taken();
            rec.pose = world_.pose();
            rec.phase = phase_;
            rec.decision = d;
            trace_.steps.push_back(std::move(rec));
        }
    }

    AgentState state() const {
        AgentState s;
        s.episode = spec_.name;
        s.target = target();
        s.step = world_.steps_taken();
        s.step_budget = spec_.step_budget;
        s.pose = world_.pose();
        s.map = &map_;
        s.frontiers = frontiers(map_);
        s.graph = graph_.snapshot();
        s.phase = phase_;
        s.path_length = world_.path_length();
        s.finished = world_.finished();
        s.success = success();
        return s;
    }

    void notify(const std::vector<int>& created) {
        if (!services_.observer) return;
        const AgentState s = state();
        for (int id : created) services_.observer->on_node_created(s, id);
        services_.observer->on_step(s);
    }

    bool success() const {
        return found_ && world_.stopped() &&
               within_success(scene(), world_.pose().cell, target(), spec_.success_radius);
    }

    EpisodeResult finish() {
        EpisodeResult r;
        EpisodeMetrics& m = r.metrics;
        m.episode = spec_.name;
        m.success = success();
        m.steps_taken = world_.steps_taken();
        m.path_length = world_.path_length();
        const auto region = success_region(scene(), target(), spec_.success_radius);
        const int l = shortest_path_length(scene(), spec_.start.cell, region);
        m.shortest_length = l == kUnreachable ? -1 : l;
        m.spl = l == kUnreachable ? 0.0 : compute_spl(m.success, l, m.path_length);
        r.trace = std::move(trace_);
        r.final_graph = graph_.snapshot();
        if (services_.observer) services_.observer->on_finished(state(), m);
        return r;
    }

    EpisodeSpec spec_;
    const RunConfig& cfg_;
    const Knowledge& knowledge_;
    AgentServices services_;
    World world_;
    EpisodicMap map_;
    SceneGraph graph_;
    CaptionQueue captions_;
    ShortTermMemory stm_;
    Pruner pruner_;
    DetectorConfig detector_;
    DetectorConfig primed_;

    EpisodeTrace trace_;
    Phase phase_ = Phase::explore_scene;
    int current_node_ = -1;
    bool need_decision_ = true;
    bool new_nodes_ = false;
    int last_decision_step_ = 0;
    bool found_ = false;
    bool done_ = false;
    bool pruner_degraded_ = false;
    std::optional<GoalMap> approach_;

    TimeField field_;
    GoalMap field_goal_;
    int field_step_ = -1000;
};

AgentServices complete_services(AgentServices s, const EpisodeSpec& spec, const GridScene& scene,
                                const RunConfig& cfg, const Knowledge& knowledge) {
    const bool remote = cfg.planner == PlannerKind::remote;
    if (remote && !s.model)
        s.model = std::make_shared<Gateway>(cfg.endpoint, std::make_unique<HttpTransport>(), std::make_shared<Transcript>());

    if (!s.planner) {
        if (remote) {
            s.planner = std::make_shared<LlmPlanner>(s.model, knowledge.prompt(PromptRole::planner),
                                                     !cfg.ablations.no_captions);
        } else if (cfg.planner == PlannerKind::oracle) {
            s.planner = std::make_shared<OraclePlanner>(knowledge.affinity, !cfg.ablations.no_captions);
        } else {
            throw std::invalid_argument("human planner requires a decision source from the state server");
        }
    }
    if (!s.pruner) {
        if (cfg.ablations.no_pruner) {
            s.pruner = std::make_shared<IdentityPruneBackend>();
        } else if (remote && cfg.remote_pruner) {
            s.pruner = std::make_shared<LlmPruneBackend>(s.model, knowledge.prompt(PromptRole::pruner));
        } else {
            s.pruner = std::make_shared<AnchorPruneBackend>(knowledge.anchors);
        }
    }
    if (!s.captioner) {
        if (remote && cfg.remote_captions) {
            s.captioner = std::make_shared<LvlmCaptioner>(s.model, knowledge.prompt(PromptRole::caption));
        } else {
            s.captioner = std::make_shared<TemplateCaptioner>();
        }
    }
    if (!s.verifier) {
        if (remote && cfg.remote_verifier) {
            s.verifier = std::make_shared<LvlmVerifier>(s.model, knowledge.prompt(PromptRole::verify));
        } else {
            const GridScene* sc = &scene;
            s.verifier = std::make_shared<OracleVerifier>(
                [sc](int id) -> std::optional<std::string> {
                    if (const auto* o = sc->object(id)) return o->label;
                    return std::nullopt;
                },
                cfg.params.verify_error, mix_seed({cfg.seed, hash_text(spec.name), 0x5eed}));
        }
    }
    if (!s.label_resolver && remote && cfg.remote_captions && knowledge.prompts.count(PromptRole::label_resolve))
        s.label_resolver = LvlmLabelResolver(s.model, knowledge.prompt(PromptRole::label_resolve));
    return s;
}

}  // namespace

EpisodeResult run_episode(const EpisodeSpec& spec, const GridScene& scene, const RunConfig& cfg,
                          const Knowledge& knowledge, AgentServices services) {
    services = complete_services(std::move(services), spec, scene, cfg, knowledge);
    Agent agent(spec, scene, cfg, knowledge, std::move(services));
    return agent.run();
}

EpisodeResult run_episode(const EpisodeSpec& spec, const RunConfig& cfg, const Knowledge& knowledge,
                          AgentServices services) {
    const GridScene scene = GridScene::load(spec.scene_path);
    return run_episode(spec, scene, cfg, knowledge, std::move(services));
}

Summary aggregate(std::span<const EpisodeMetrics> metrics) {
    if (metrics.empty()) throw std::invalid_argument("aggregate over no episodes");
    Summary s;
    for (const auto& m : metrics) {
        s.sr += m.success ? 1.0 : 0.0;
        s.spl += m.spl;
    }
    s.sr /= static_cast<double>(metrics.size());
    s.spl /= static_cast<double>(metrics.size());
    return s;
}

std::vector<EpisodeMetrics> run_suite(const std::vector<EpisodeSpec>& episodes, const RunConfig& cfg,
                                      const Knowledge& knowledge) {
    std::vector<EpisodeMetrics> out;
    std::map<std::filesystem::path, GridScene> scenes;
    for (const auto& e : episodes) {
        auto it = scenes.find(e.scene_path);
        if (it == scenes.end()) it = scenes.emplace(e.scene_path, GridScene::load(e.scene_path)).first;
        out.push_back(run_episode(e, it->second, cfg, knowledge).metrics);
    }
    return out;
}

std::vector<AblationRow> run_ablation_suite(const std::vector<EpisodeSpec>& episodes, const RunConfig& base,
                                            const Knowledge& knowledge, const std::vector<std::uint64_t>& seeds) {
    const Ablations variants[] = {{}, {true, false, false}, {false, true, false}, {false, false, true}};
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        AblationRow row;
        row.name = v.name();
        for (auto seed : seeds) {
            RunConfig cfg = base;
            cfg.ablations = v;
            cfg.seed = seed;
            auto m = run_suite(episodes, cfg, knowledge);
            row.metrics.insert(row.metrics.end(), m.begin(), m.end());
        }
        row.summary = aggregate(row.metrics);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_results_csv(std::ostream& out, std::span<const EpisodeMetrics> metrics) {
    out << "episode,success,steps,p,l,spl\n";
    char buf[32];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof buf, "%.6f", m.spl);
        out << m.episode << ',' << (m.success ? 1 : 0) << ',' << m.steps_taken << ',' << m.path_length << ','
            << m.shortest_length << ',' << buf << '\n';
    }
}

void print_table(std::ostream& out, const std::vector<std::pair<std::string, Summary>>& rows) {
    std::size_t w = 5;
    for (const auto& [name, s] : rows) w = std::max(w, name.size());
    auto pad = [&](const std::string& s, std::size_t n) { return s + std::string(n > s.size() ? n - s.size() : 0, ' '); };
    out << "| " << pad("AGENT", w) << " | SR     | SPL    |\n";
    out << "|" << std::string(w + 2, '-') << "|--------|--------|\n";
    for (const auto& [name, s] : rows)
        out << "| " << pad(name, w) << " | " << pad(format_fraction(s.sr), 6) << " | " << pad(format_fraction(s.spl), 6)
            << " |\n";
}

void write_trace(std::ostream& out, const EpisodeTrace& trace) {
    using nlohmann::json;
    for (const auto& s : trace.steps) {
        json j{{"step", s.step},
               {"phase", to_string(s.phase)},
               {"primitive", s.primitive},
               {"pose", {s.pose.cell.x, s.pose.cell.y, std::string(1, heading_char(s.pose.heading))}},
               {"detections", s.detections},
               {"kept", s.kept},
               {"created", s.created}};
        if (s.decision) j["decision"] = action_token(*s.decision);
        if (!s.note.empty()) j["note"] = s.note;
        out << j.dump() << '\n';
    }
    for (const auto& n : trace.notes) out << json{{"note", n}}.dump() << '\n';
}

}  // namespace ognav

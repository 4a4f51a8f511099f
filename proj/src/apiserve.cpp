#include "ognav/apiserve.hpp"
#include "ognav/errors.hpp"

#include <algorithm>
#include <chrono>

#include <httplib.h>

namespace ognav {

using nlohmann::json;

json to_json(const Event& e) {
    json j{{"seq", e.seq}, {"type", e.type}, {"step", e.step}};
    if (e.node_id >= 0) j["node"] = e.node_id;
    if (e.type == "gap") j["missed"] = e.missed;
    return j;
}

std::int64_t EventBus::publish(const std::string& type, int step, int node_id) {
    std::int64_t seq;
    {
        std::lock_guard lk(mu_);
        seq = next_seq_++;
        events_.push_back(Event{seq, type, step, node_id, 0});
        while (events_.size() > capacity_) events_.pop_front();
    }
    cv_.notify_all();
    return seq;
}

std::vector<Event> EventBus::since_locked(std::int64_t after) const {
    std::vector<Event> out;
    if (events_.empty()) return out;
    const std::int64_t first = events_.front().seq;
    if (after + 1 < first) {
        Event gap;
        gap.type = "gap";
        gap.seq = first - 1;
        gap.step = events_.front().step;
        gap.missed = first - 1 - after;
        out.push_back(gap);
    }
    for (const auto& e : events_)
        if (e.seq > after) out.push_back(e);
    return out;
}

std::vector<Event> EventBus::since(std::int64_t after) const {
    std::lock_guard lk(mu_);
    return since_locked(after);
}

std::vector<Event> EventBus::wait(std::int64_t after, int timeout_ms) const {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, std::chrono::milliseconds(timeout_ms), [&] { return closed_ || next_seq_ - 1 > after; });
    return since_locked(after);
}

std::int64_t EventBus::last_seq() const {
    std::lock_guard lk(mu_);
    return next_seq_ - 1;
}

void EventBus::close() {
    {
        std::lock_guard lk(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool EventBus::closed() const {
    std::lock_guard lk(mu_);
    return closed_;
}

HumanCommand HumanCommand::from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) throw InvalidCommand("decision needs a \"kind\"");
    const std::string kind = j["kind"];
    HumanCommand c;
    if (kind == "choose_explore_scene") {
        c.kind = Kind::choose_explore_scene;
    } else if (kind == "declare_stop") {
        c.kind = Kind::declare_stop;
    } else if (kind == "choose_node") {
        c.kind = Kind::choose_node;
        if (!j.contains("node") || !j["node"].is_number_integer()) throw InvalidCommand("choose_node needs an integer \"node\"");
        c.node_id = j["node"];
    } else {
        throw InvalidCommand("unknown decision kind: " + kind);
    }
    return c;
}

namespace {

json graph_json(const GraphSnapshot& g) {
    json nodes = json::array();
    for (const auto& n : g) {
        nodes.push_back({{"id", n.id},
                         {"label", n.label},
                         {"centroid", {n.centroid.x, n.centroid.y, n.centroid.z}},
                         {"caption", n.caption ? json(*n.caption) : json(nullptr)},
                         {"explored", n.explored},
                         {"target_candidate", n.target_candidate}});
    }
    return nodes;
}

}  // namespace

void LiveEpisode::store(const AgentState& s) {
    json j;
    j["episode"] = s.episode;
    j["target"] = s.target;
    j["step"] = s.step;
    j["step_budget"] = s.step_budget;
    j["pose"] = {{"x", s.pose.cell.x}, {"y", s.pose.cell.y}, {"heading", std::string(1, heading_char(s.pose.heading))}};
    if (s.map) j["map"] = {{"width", s.map->width()}, {"height", s.map->height()}, {"rle", s.map->rle()}};
    json fr = json::array();
    for (const auto& c : s.frontiers) fr.push_back({c.x, c.y});
    j["frontiers"] = fr;
    j["graph"] = graph_json(s.graph);
    j["phase"] = to_string(s.phase);
    j["metrics"] = {{"steps_taken", s.step}, {"path_length", s.path_length}, {"finished", s.finished}, {"success", s.success}};
    std::lock_guard lk(mu_);
    snapshot_ = std::make_shared<const json>(std::move(j));
}

void LiveEpisode::on_step(const AgentState& s) {
    store(s);
    events_.publish("step-complete", s.step);
}

void LiveEpisode::on_node_created(const AgentState& s, int node_id) { events_.publish("node-created", s.step, node_id); }

void LiveEpisode::on_finished(const AgentState& s, const EpisodeMetrics& m) {
    store(s);
    json jm{{"episode", m.episode}, {"success", m.success}, {"steps_taken", m.steps_taken}, {"p", m.path_length},
            {"l", m.shortest_length}, {"spl", m.spl}};
    {
        std::lock_guard lk(mu_);
        last_metrics_ = jm;
        finished_.push_back(jm);
    }
    events_.publish("episode-finished", s.step);
}

json LiveEpisode::state() const {
    std::lock_guard lk(mu_);
    if (!snapshot_) throw NoEpisode("no episode has started");
    json j = *snapshot_;
    if (pending_) {
        json ids = json::array();
        for (const auto& n : pending_->candidates) ids.push_back(n.id);
        j["pending"] = {{"target", pending_->target}, {"step", pending_->step}, {"candidates", ids},
                        {"prompt", pending_->prompt_view}};
    } else {
        j["pending"] = nullptr;
    }
    if (j["metrics"]["finished"].get<bool>() && last_metrics_) j["metrics"]["final"] = *last_metrics_;
    j["completed_episodes"] = finished_;
    return j;
}

PlannerDecision LiveEpisode::await_decision(const PlannerContext& ctx) {
    int step = 0;
    {
        std::lock_guard lk(mu_);
        PendingDecision p;
        p.target = ctx.target;
        for (const auto& n : ctx.nodes)
            if (!n.explored) p.candidates.push_back(n);
        p.prompt_view = describe_nodes(ctx.nodes, true);
        if (snapshot_) {
            // keep the served graph in step with the list the operator chooses from
            json j = *snapshot_;
            j["graph"] = graph_json(ctx.nodes);
            step = j["step"];
            snapshot_ = std::make_shared<const json>(std::move(j));
        }
        p.step = step;
        pending_ = std::move(p);
        command_.reset();
    }
    events_.publish("decision-requested", step);

    std::unique_lock lk(mu_);
    cmd_cv_.wait(lk, [&] { return command_.has_value() || shutdown_; });
    pending_.reset();
    if (!command_) return PlannerDecision::done(DoneReason::exhausted, "operator disconnected");
    const HumanCommand cmd = *command_;
    command_.reset();
    switch (cmd.kind) {
        case HumanCommand::Kind::choose_node: return PlannerDecision::explore_obj(cmd.node_id, "operator");
        case HumanCommand::Kind::declare_stop: return PlannerDecision::done(DoneReason::found, "operator");
        case HumanCommand::Kind::choose_explore_scene: break;
    }
    return PlannerDecision::explore_scene("operator");
}

void LiveEpisode::submit(const HumanCommand& cmd) {
    {
        std::lock_guard lk(mu_);
        if (!pending_ || command_) throw NoPendingDecision("no decision is pending");
        if (cmd.kind == HumanCommand::Kind::choose_node) {
            const auto& c = pending_->candidates;
            if (std::none_of(c.begin(), c.end(), [&](const NodeRecord& n) { return n.id == cmd.node_id; }))
                throw InvalidCommand("node " + std::to_string(cmd.node_id) + " is not a candidate");
        }
        command_ = cmd;
    }
    cmd_cv_.notify_all();
}

std::optional<PendingDecision> LiveEpisode::pending() const {
    std::lock_guard lk(mu_);
    return pending_;
}

void LiveEpisode::shutdown() {
    {
        std::lock_guard lk(mu_);
        shutdown_ = true;
    }
    cmd_cv_.notify_all();
    events_.close();
}

namespace {

void send_error(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
}

}  // namespace

ApiServer::ApiServer(LiveEpisode& live) : live_(live), server_(std::make_unique<httplib::Server>()) {
    server_->Get("/state", [this](const httplib::Request&, httplib::Response& res) {
        try {
            res.set_content(live_.state().dump(), "application/json");
        } catch (const NoEpisode& e) {
            send_error(res, 503, e.what());
        }
    });

    server_->Post("/decision", [this](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) return send_error(res, 400, "body is not JSON");
        try {
            live_.submit(HumanCommand::from_json(body));
            res.set_content(json{{"ack", true}}.dump(), "application/json");
        } catch (const InvalidCommand& e) {
            send_error(res, 400, e.what());
        } catch (const NoPendingDecision& e) {
            send_error(res, 409, e.what());
        }
    });

    server_->Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
        std::int64_t after = 0;
        try {
            if (req.has_param("since")) after = std::stoll(req.get_param_value("since"));
            else if (req.has_header("Last-Event-ID")) after = std::stoll(req.get_header_value("Last-Event-ID"));
        } catch (const std::exception&) {
            return send_error(res, 400, "bad event cursor");
        }
        auto cursor = std::make_shared<std::int64_t>(after);
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) {
            const auto events = live_.events().wait(*cursor, 250);
            for (const auto& e : events) {
                std::string chunk = "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + to_json(e).dump() + "\n\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
                *cursor = std::max(*cursor, e.seq);
            }
            if (events.empty() && live_.events().closed()) sink.done();
            return true;
        });
    });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = server_->bind_to_any_port(host);
    } else if (!server_->bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void ApiServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace ognav

#pragma once

#include "ognav/harness.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace ognav {

struct Event {
    std::int64_t seq = 0;
    std::string type;  // step-complete, node-created, decision-requested, episode-finished, gap
    int step = 0;
    int node_id = -1;
    std::int64_t missed = 0;  // gap only
};

nlohmann::json to_json(const Event& e);

// Bounded, ordered event log. Readers that fall behind lose the oldest
// events and see one gap marker in their place.
class EventBus {
public:
    explicit EventBus(std::size_t capacity = 4096) : capacity_(capacity) {}

    std::int64_t publish(const std::string& type, int step, int node_id = -1);
    // Events with seq > after, oldest first, preceded by a gap marker if some were dropped.
    std::vector<Event> since(std::int64_t after) const;
    // Like since(), but waits up to timeout_ms for something new.
    std::vector<Event> wait(std::int64_t after, int timeout_ms) const;
    std::int64_t last_seq() const;

    void close();
    bool closed() const;

private:
    std::vector<Event> since_locked(std::int64_t after) const;

    std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::deque<Event> events_;
    std::int64_t next_seq_ = 1;
    bool closed_ = false;
};

struct HumanCommand {
    enum class Kind { choose_explore_scene, choose_node, declare_stop };
    Kind kind = Kind::choose_explore_scene;
    int node_id = -1;

    // {"kind": "...", "node": id}; InvalidCommand when malformed.
    static HumanCommand from_json(const nlohmann::json& j);
};

struct PendingDecision {
    std::string target;
    int step = 0;
    GraphSnapshot candidates;  // unexplored nodes
    std::string prompt_view;   // the node list a model planner would see
};

// Mirror of the running episode for the server, plus the command channel of
// human mode. The agent loop is the only writer of state.
class LiveEpisode : public EpisodeObserver {
public:
    explicit LiveEpisode(std::size_t event_capacity = 4096) : events_(event_capacity) {}

    void on_step(const AgentState& s) override;
    void on_node_created(const AgentState& s, int node_id) override;
    void on_finished(const AgentState& s, const EpisodeMetrics& m) override;

    // NoEpisode before the first step.
    nlohmann::json state() const;

    // Called from the loop: publishes the request and blocks until a command arrives.
    PlannerDecision await_decision(const PlannerContext& ctx);
    // Called from the server. NoPendingDecision or InvalidCommand when rejected.
    void submit(const HumanCommand& cmd);
    std::optional<PendingDecision> pending() const;

    // Unblocks a waiting loop (it sees a declare_stop) and closes the event feed.
    void shutdown();

    EventBus& events() { return events_; }
    const EventBus& events() const { return events_; }

private:
    void store(const AgentState& s);

    mutable std::mutex mu_;
    std::condition_variable cmd_cv_;
    std::shared_ptr<const nlohmann::json> snapshot_;
    std::optional<PendingDecision> pending_;
    std::optional<HumanCommand> command_;
    std::optional<nlohmann::json> last_metrics_;
    std::vector<nlohmann::json> finished_;
    bool shutdown_ = false;
    EventBus events_;
};

class HumanDecisionSource : public DecisionSource {
public:
    explicit HumanDecisionSource(LiveEpisode& live) : live_(live) {}
    PlannerDecision decide(const PlannerContext& ctx) override { return live_.await_decision(ctx); }

private:
    LiveEpisode& live_;
};

// GET /state, POST /decision, GET /events (server-sent events; ?since=<seq>).
class ApiServer {
public:
    explicit ApiServer(LiveEpisode& live);
    ~ApiServer();

    // Binds and serves on a background thread; port 0 picks a free port. Returns the port.
    int start(const std::string& host, int port);
    void stop();

private:
    LiveEpisode& live_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace ognav

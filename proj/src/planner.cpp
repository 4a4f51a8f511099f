#include "ognav/planner.hpp"
#include "ognav/errors.hpp"
#include "ognav/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ognav {

std::string action_token(const PlannerDecision& d) {
    switch (d.action) {
        case ActionKind::explore_scene: return "<explore_scene>";
        case ActionKind::explore_obj: return "<explore_obj> " + std::to_string(d.node_id);
        case ActionKind::declare_done: return d.reason == DoneReason::found ? "<done> found" : "<done> exhausted";
    }
    return "?";
}

double AffinityTable::affinity(const std::string& target, const std::string& label) const {
    if (label == target) return self_score;
    auto it = scores.find({target, label});
    return it == scores.end() ? 0.0 : it->second;
}

bool AffinityTable::caption_mentions_room(const std::string& target, const std::string& caption) const {
    auto it = room_affinity.find(target);
    if (it == room_affinity.end()) return false;
    for (const auto& room : it->second)
        if (caption.find("in the " + room) != std::string::npos) return true;
    return false;
}

AffinityTable AffinityTable::scaled(double c) const {
    AffinityTable t = *this;
    for (auto& [k, v] : t.scores) v *= c;
    t.threshold *= c;
    t.caption_bonus *= c;
    t.self_score *= c;
    return t;
}

// Lines:
//   threshold <x> | caption_bonus <x> | self <x>
//   score "<target>" "<label>" <x>
//   room "<target>" <room>...
AffinityTable AffinityTable::parse(std::string_view text) {
    AffinityTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto tok = tokenize(line);
        if (tok.empty()) continue;
        try {
            if (tok[0] == "threshold" && tok.size() == 2) {
                t.threshold = std::stod(tok[1]);
            } else if (tok[0] == "caption_bonus" && tok.size() == 2) {
                t.caption_bonus = std::stod(tok[1]);
            } else if (tok[0] == "self" && tok.size() == 2) {
                t.self_score = std::stod(tok[1]);
            } else if (tok[0] == "score" && tok.size() == 4) {
                const double v = std::stod(tok[3]);
                if (v < 0 || v > 1) throw ParseError("score outside [0,1]");
                t.scores[{tok[1], tok[2]}] = v;
            } else if (tok[0] == "room" && tok.size() >= 3) {
                auto& rooms = t.room_affinity[tok[1]];
                rooms.insert(rooms.end(), tok.begin() + 2, tok.end());
            } else {
                throw ParseError("unrecognised entry");
            }
        } catch (const std::exception& e) {
            throw ParseError("affinity line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return t;
}

AffinityTable AffinityTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

double OraclePlanner::score(const NodeRecord& node, const std::string& target) const {
    double s = table_.affinity(target, node.label);
    if (use_captions_ && node.caption && table_.caption_mentions_room(target, *node.caption)) s += table_.caption_bonus;
    return s;
}

PlannerDecision OraclePlanner::decide(const PlannerContext& ctx) {
    const NodeRecord* best = nullptr;
    double best_score = 0;
    int best_dist = kUnreachable;
    for (const auto& n : ctx.nodes) {
        if (n.explored) continue;
        const double s = score(n, ctx.target);
        if (s < table_.threshold - 1e-12) continue;
        const int d = ctx.distance_to ? ctx.distance_to(n.id) : 0;
        const bool better = !best || s > best_score + 1e-12 ||
                            (std::abs(s - best_score) <= 1e-12 && (d < best_dist || (d == best_dist && n.id < best->id)));
        if (better) {
            best = &n;
            best_score = s;
            best_dist = d;
        }
    }
    if (!best) return PlannerDecision::explore_scene("no node scores above threshold");
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s scores %.3f for %s", best->label.c_str(), best_score, ctx.target.c_str());
    return PlannerDecision::explore_obj(best->id, buf);
}

std::string describe_nodes(const GraphSnapshot& nodes, bool with_captions) {
    std::string out;
    for (const auto& n : nodes) {
        if (n.explored) continue;
        out += "[" + std::to_string(n.id) + "] " + n.label;
        if (with_captions && n.caption) out += ": " + *n.caption;
        out += "\n";
    }
    return out.empty() ? "(none)\n" : out;
}

std::string LlmPlanner::render_prompt(const PlannerContext& ctx) const {
    std::string history;
    for (const auto& d : ctx.history) history += action_token(d) + "\n";
    return render(tmpl_, {{"target", ctx.target},
                          {"objects", describe_nodes(ctx.nodes, use_captions_)},
                          {"history", history.empty() ? "(none)\n" : history}});
}

PlannerDecision LlmPlanner::decide(const PlannerContext& ctx) {
    const std::string prompt = render_prompt(ctx);
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            return parse_action(backend_->complete(to_string(PromptRole::planner), prompt), ctx.nodes);
        } catch (const ProtocolError&) {
            continue;
        } catch (const BackendFailure&) {
            break;
        }
    }
    return PlannerDecision::explore_scene("planner backend unusable; exploring");
}

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

PlannerDecision parse_action(std::string_view reply, const GraphSnapshot& nodes) {
    const std::string text(reply);
    const auto scene_pos = text.find("<explore_scene>");
    const auto obj_pos = text.find("<explore_obj>");
    if (obj_pos != std::string::npos && (scene_pos == std::string::npos || obj_pos < scene_pos)) {
        auto end = text.find('\n', obj_pos);
        std::string arg = trim(text.substr(obj_pos + 13, end == std::string::npos ? std::string::npos : end - obj_pos - 13));
        // tolerate "(couch)", "[3]", quotes, trailing period
        while (!arg.empty() && std::string("([\"'").find(arg.front()) != std::string::npos) arg.erase(0, 1);
        while (!arg.empty() && std::string(")]\"'.").find(arg.back()) != std::string::npos) arg.pop_back();
        arg = trim(arg);
        if (arg.empty()) throw ProtocolError("<explore_obj> without a node");
        const bool numeric = std::all_of(arg.begin(), arg.end(), [](char c) { return std::isdigit((unsigned char)c); });
        for (const auto& n : nodes) {
            if (n.explored) continue;
            if ((numeric && std::to_string(n.id) == arg) || (!numeric && lower(n.label) == lower(arg)))
                return PlannerDecision::explore_obj(n.id, "model chose " + arg);
        }
        throw ProtocolError("<explore_obj> names no unexplored node: '" + arg + "'");
    }
    if (scene_pos != std::string::npos) return PlannerDecision::explore_scene("model chose to explore");
    throw ProtocolError("no action token in reply");
}

GraphSnapshot mark_explored(SceneGraph& graph, int node_id) {
    graph.mark_explored(node_id);
    return graph.snapshot();
}

}  // namespace ognav

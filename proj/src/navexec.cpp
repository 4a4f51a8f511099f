#include "ognav/navexec.hpp"
#include "ognav/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace ognav {

EpisodicMap::EpisodicMap(int width, int height)
    : width_(width),
      height_(height),
      cells_(static_cast<std::size_t>(width) * height, CellState::unknown),
      inspected_(cells_.size(), 0) {}

CellState EpisodicMap::state(Cell c) const {
    if (!in_bounds(c)) return CellState::obstacle;
    return cells_[static_cast<std::size_t>(c.y) * width_ + c.x];
}

std::size_t EpisodicMap::known_cells() const {
    return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](CellState s) { return s != CellState::unknown; }));
}

bool EpisodicMap::reveal(Cell c, CellState s) {
    if (!in_bounds(c) || s == CellState::unknown) return false;
    auto& slot = cells_[static_cast<std::size_t>(c.y) * width_ + c.x];
    if (slot != CellState::unknown) return false;
    slot = s;
    return true;
}

void EpisodicMap::update(const Observation& obs, double inspect_range) {
    for (const auto& vc : obs.visible_cells) {
        reveal(vc.cell, vc.occupied ? CellState::obstacle : CellState::free);
        if (vc.range <= inspect_range + 1e-9 && in_bounds(vc.cell))
            inspected_[static_cast<std::size_t>(vc.cell.y) * width_ + vc.cell.x] = 1;
    }
    reveal(obs.pose.cell, CellState::free);
    if (in_bounds(obs.pose.cell)) inspected_[static_cast<std::size_t>(obs.pose.cell.y) * width_ + obs.pose.cell.x] = 1;
}

bool EpisodicMap::inspected(Cell c) const {
    return in_bounds(c) && inspected_[static_cast<std::size_t>(c.y) * width_ + c.x];
}

std::string EpisodicMap::rle() const {
    std::string out;
    std::size_t i = 0;
    while (i < cells_.size()) {
        std::size_t j = i;
        while (j < cells_.size() && cells_[j] == cells_[i]) ++j;
        out += std::to_string(j - i);
        out += cells_[i] == CellState::unknown ? 'u' : cells_[i] == CellState::free ? 'f' : 'o';
        i = j;
    }
    return out;
}

EpisodicMap& update_map(EpisodicMap& map, const Observation& obs) {
    map.update(obs);
    return map;
}

std::vector<Cell> frontiers(const EpisodicMap& map) {
    std::vector<Cell> out;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            const Cell c{x, y};
            if (!map.is_free(c)) continue;
            for (Heading h : kHeadings) {
                const Cell n = advance(c, h);
                if (map.in_bounds(n) && map.state(n) == CellState::unknown) {
                    out.push_back(c);
                    break;
                }
            }
        }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> bfs_distances(const EpisodicMap& map, Cell from) {
    std::vector<int> dist(static_cast<std::size_t>(map.width()) * map.height(), -1);
    if (!map.is_free(from)) return dist;
    auto at = [&](Cell c) -> int& { return dist[static_cast<std::size_t>(c.y) * map.width() + c.x]; };
    std::deque<Cell> q{from};
    at(from) = 0;
    while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        for (Heading h : kHeadings) {
            const Cell n = advance(c, h);
            if (!map.is_free(n) || at(n) >= 0) continue;
            at(n) = at(c) + 1;
            q.push_back(n);
        }
    }
    return dist;
}

bool GoalMap::contains(Cell c) const { return std::binary_search(cells.begin(), cells.end(), c); }

GoalMap build_goal_map(const PlannerDecision& decision, const GraphSnapshot& nodes, const EpisodicMap& map, Cell agent,
                       double goal_radius) {
    const auto dist = bfs_distances(map, agent);
    auto reachable = [&](Cell c) { return map.in_bounds(c) && dist[static_cast<std::size_t>(c.y) * map.width() + c.x] >= 0; };
    const auto front = frontiers(map);

    GoalMap goal;
    if (decision.action == ActionKind::explore_scene) {
        goal.mode = GoalMode::frontier;
        goal.cells = front;
        if (std::none_of(front.begin(), front.end(), reachable)) throw Stuck("no reachable frontier");
        return goal;
    }
    if (decision.action != ActionKind::explore_obj) throw std::invalid_argument("goal map requested for a finished episode");

    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeRecord& n) { return n.id == decision.node_id; });
    if (it == nodes.end()) throw UnknownNode("goal node " + std::to_string(decision.node_id) + " not in graph");
    goal.mode = GoalMode::object;
    goal.node_id = decision.node_id;
    const Cell center = project(it->centroid);
    const int r = static_cast<int>(std::ceil(goal_radius));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
            const Cell c{center.x + dx, center.y + dy};
            if (map.is_free(c) && distance(c, center) <= goal_radius + 1e-9 && reachable(c)) goal.cells.push_back(c);
        }
    std::sort(goal.cells.begin(), goal.cells.end());
    if (!goal.cells.empty()) return goal;

    const Cell* nearest = nullptr;
    for (const auto& f : front)
        if (reachable(f) && (!nearest || distance(f, center) < distance(*nearest, center))) nearest = &f;
    if (!nearest) throw Stuck("node " + std::to_string(decision.node_id) + " is unreachable");
    goal.cells = {*nearest};
    goal.fallback = true;
    return goal;
}

GoalMap coverage_goal(const EpisodicMap& map, Cell agent) {
    const auto dist = bfs_distances(map, agent);
    GoalMap goal;
    goal.mode = GoalMode::coverage;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x)
            if (dist[static_cast<std::size_t>(y) * map.width() + x] >= 0 && !map.inspected({x, y}))
                goal.cells.push_back({x, y});
    std::sort(goal.cells.begin(), goal.cells.end());
    if (goal.cells.empty()) throw Stuck("every reachable cell has been inspected");
    return goal;
}

double TimeField::at(Cell c) const {
    if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) return kInfiniteTime;
    return time[static_cast<std::size_t>(c.y) * width + c.x];
}

TimeField solve_eikonal(int width, int height, const std::function<bool(Cell)>& passable, std::span<const Cell> goals) {
    TimeField f;
    f.width = width;
    f.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    f.time.assign(n, kInfiniteTime);
    std::vector<char> accepted(n, 0);
    // goal each value descends from; fronts of different goals are not blended
    std::vector<int> source(n, -1);
    auto idx = [&](Cell c) { return static_cast<std::size_t>(c.y) * width + c.x; };
    auto inside = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; };
    struct Upwind {
        double t = kInfiniteTime;
        int src = -1;
    };
    auto known = [&](Cell c) -> Upwind {
        if (!inside(c) || !accepted[idx(c)]) return {};
        return {f.time[idx(c)], source[idx(c)]};
    };
    auto lower = [](Upwind p, Upwind q) { return q.t < p.t ? q : p; };

    using Entry = std::pair<double, Cell>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> trial;
    for (std::size_t k = 0; k < goals.size(); ++k) {
        const Cell g = goals[k];
        if (!inside(g) || !passable(g)) continue;
        f.time[idx(g)] = 0.0;
        source[idx(g)] = static_cast<int>(k);
        trial.push({0.0, g});
    }

    while (!trial.empty()) {
        const auto [t, c] = trial.top();
        trial.pop();
        if (accepted[idx(c)] || t > f.time[idx(c)]) continue;
        accepted[idx(c)] = 1;
        f.acceptance_order.push_back(c);
        for (Heading h : kHeadings) {
            const Cell nb = advance(c, h);
            if (!inside(nb) || accepted[idx(nb)] || !passable(nb)) continue;
            const Upwind a = lower(known({nb.x - 1, nb.y}), known({nb.x + 1, nb.y}));
            const Upwind b = lower(known({nb.x, nb.y - 1}), known({nb.x, nb.y + 1}));
            const Upwind m = lower(a, b);
            double candidate;
            if (std::abs(a.t - b.t) >= 1.0 || a.src != b.src) {
                candidate = m.t + 1.0;
            } else {
                candidate = 0.5 * (a.t + b.t + std::sqrt(2.0 - (a.t - b.t) * (a.t - b.t)));
            }
            if (candidate < f.time[idx(nb)]) {
                f.time[idx(nb)] = candidate;
                source[idx(nb)] = m.src;
                trial.push({candidate, nb});
            }
        }
    }
    return f;
}

TimeField fmm(const EpisodicMap& map, const GoalMap& goal) {
    if (goal.cells.empty()) throw std::invalid_argument("fast marching needs at least one goal cell");
    return solve_eikonal(map.width(), map.height(), [&](Cell c) { return map.is_free(c); }, goal.cells);
}

MovePrimitive next_primitive(const TimeField& field, const Pose& pose) {
    const double here = field.at(pose.cell);
    if (here == 0.0) return MovePrimitive::stop;
    if (!(here < kInfiniteTime)) throw Stuck("agent cell has no finite arrival time");
    Heading best = Heading::N;
    double best_t = kInfiniteTime;
    for (Heading h : kHeadings) {
        const double t = field.at(advance(pose.cell, h));
        if (t < best_t) {
            best_t = t;
            best = h;
        }
    }
    if (!(best_t < kInfiniteTime)) throw Stuck("no neighbour with finite arrival time");
    if (best == pose.heading) return MovePrimitive::forward;
    if (best == turn_right(pose.heading)) return MovePrimitive::turn_right;
    return MovePrimitive::turn_left;
}

void dump_map(const EpisodicMap& map, std::ostream& out, const Pose* agent) {
    for (int y = map.height() - 1; y >= 0; --y) {
        for (int x = 0; x < map.width(); ++x) {
            const Cell c{x, y};
            if (agent && agent->cell == c) {
                out << heading_char(agent->heading);
                continue;
            }
            switch (map.state(c)) {
                case CellState::unknown: out << ' '; break;
                case CellState::free: out << '.'; break;
                case CellState::obstacle: out << '#'; break;
            }
        }
        out << '\n';
    }
}

void dump_field(const TimeField& field, std::ostream& out) {
    char buf[16];
    for (int y = field.height - 1; y >= 0; --y) {
        for (int x = 0; x < field.width; ++x) {
            const double t = field.at({x, y});
            if (t < kInfiniteTime) {
                std::snprintf(buf, sizeof buf, "%7.2f", t);
            } else {
                std::snprintf(buf, sizeof buf, "%7s", "inf");
            }
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace ognav

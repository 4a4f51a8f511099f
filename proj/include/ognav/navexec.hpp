#pragma once

#include "ognav/planner.hpp"
#include "ognav/scenegraph.hpp"
#include "ognav/world.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ognav {

enum class CellState : std::uint8_t { unknown, free, obstacle };

// Agent-side 2D map built from observations. Knowledge is monotone: a cell
// leaves `unknown` once and never changes again.
class EpisodicMap {
public:
    EpisodicMap() = default;
    EpisodicMap(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }
    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    CellState state(Cell c) const;
    bool is_free(Cell c) const { return state(c) == CellState::free; }
    bool explored(Cell c) const { return state(c) != CellState::unknown; }
    std::size_t known_cells() const;

    // Sets an unknown cell; a known cell keeps its state. Returns true if it changed.
    bool reveal(Cell c, CellState s);
    // Cells seen no farther than `inspect_range` are also marked inspected:
    // close enough to resolve small objects on them.
    void update(const Observation& obs, double inspect_range = 0);
    bool inspected(Cell c) const;

    // Row-major run-length code, e.g. "12u3f1o" (u unknown, f free, o obstacle).
    std::string rle() const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<CellState> cells_;
    std::vector<char> inspected_;
};

EpisodicMap& update_map(EpisodicMap& map, const Observation& obs);

// Free cells with at least one unknown 4-neighbour, sorted.
std::vector<Cell> frontiers(const EpisodicMap& map);

// 4-connected BFS distance over free cells; -1 where unreachable.
std::vector<int> bfs_distances(const EpisodicMap& map, Cell from);

enum class GoalMode { frontier, object, approach, coverage };

struct GoalMap {
    std::vector<Cell> cells;  // sorted
    GoalMode mode = GoalMode::frontier;
    int node_id = -1;
    bool fallback = false;  // object goal replaced by the frontier nearest to it
    bool contains(Cell c) const;
    bool operator==(const GoalMap&) const = default;
};

// explore_scene: the frontier set. explore_obj: known-free cells within
// `goal_radius` of the node centroid that the agent can reach, else the
// reachable frontier nearest to the centroid. Stuck when nothing is reachable.
GoalMap build_goal_map(const PlannerDecision& decision, const GraphSnapshot& nodes, const EpisodicMap& map, Cell agent,
                       double goal_radius = 2.0);

// Reachable free cells not yet inspected; the fallback once frontiers run out.
// Stuck when there are none.
GoalMap coverage_goal(const EpisodicMap& map, Cell agent);

inline constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

struct TimeField {
    int width = 0;
    int height = 0;
    std::vector<double> time;            // row-major arrival times
    std::vector<Cell> acceptance_order;  // cells in the order the front accepted them

    double at(Cell c) const;
    bool finite(Cell c) const { return at(c) < kInfiniteTime; }
};

// Fast marching on a unit-speed grid (h = 1 cell). Impassable cells stay infinite.
TimeField solve_eikonal(int width, int height, const std::function<bool(Cell)>& passable, std::span<const Cell> goals);
TimeField fmm(const EpisodicMap& map, const GoalMap& goal);

// Steepest-descent step: stop on a goal cell, otherwise turn toward (or move
// into) the lowest-time neighbour; ties resolve N, E, S, W. Stuck if no neighbour is finite.
MovePrimitive next_primitive(const TimeField& field, const Pose& pose);

void dump_map(const EpisodicMap& map, std::ostream& out, const Pose* agent = nullptr);
void dump_field(const TimeField& field, std::ostream& out);

}  // namespace ognav

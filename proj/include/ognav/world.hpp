#pragma once

#include "ognav/geometry.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ognav {

struct Room {
    std::string name;
    CellRect rect;
};

struct ObjectInstance {
    int id = 0;
    std::string label;
    std::vector<Cell> footprint;
    int z_min = 0;
    int z_max = 0;
    std::vector<std::string> attributes;
    std::optional<int> on_receptacle;

    bool has_attribute(std::string_view a) const;
    bool is_small() const { return has_attribute("small"); }
    VoxelSet voxels() const;
};

// Static multi-room grid. Immutable once an episode starts.
class GridScene {
public:
    GridScene() = default;
    GridScene(int width, int height);

    static GridScene parse(std::string_view text);
    static GridScene load(const std::filesystem::path& path);

    int width() const { return width_; }
    int height() const { return height_; }
    double cell_size() const { return cell_size_; }
    const std::string& name() const { return name_; }
    const std::vector<Room>& rooms() const { return rooms_; }
    const std::vector<ObjectInstance>& objects() const { return objects_; }

    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    bool is_wall(Cell c) const;
    // Object footprints block motion, not sight.
    bool is_traversable(Cell c) const;
    const Room* room_at(Cell c) const;
    const ObjectInstance* object(int id) const;
    std::vector<const ObjectInstance*> objects_with_label(std::string_view label) const;

    void set_wall(Cell c, bool wall = true);
    void add_room(Room room) { rooms_.push_back(std::move(room)); }
    void add_object(ObjectInstance obj);
    void set_name(std::string name) { name_ = std::move(name); }
    void set_cell_size(double s) { cell_size_ = s; }

    // Throws ParseError describing the first violated invariant.
    void validate() const;

private:
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

    std::string name_ = "scene";
    int width_ = 0;
    int height_ = 0;
    double cell_size_ = 0.25;
    std::vector<char> walls_;
    std::vector<int> occupant_;  // object id covering the cell, or -1
    std::vector<Room> rooms_;
    std::vector<ObjectInstance> objects_;
};

struct Pose {
    Cell cell;
    Heading heading = Heading::N;
    bool operator==(const Pose&) const = default;
};

struct VisibleCell {
    Cell cell;
    double range = 0;       // depth surrogate, in cells
    bool occupied = false;  // wall or object footprint
    bool operator==(const VisibleCell&) const = default;
};

struct VisibleObject {
    int object_id = 0;
    VoxelSet voxels;
    bool operator==(const VisibleObject&) const = default;
};

struct Observation {
    int step = 0;
    Pose pose;
    std::vector<VisibleCell> visible_cells;  // sorted by cell
    std::vector<VisibleObject> visible_objects;
    bool operator==(const Observation&) const = default;
};

struct EpisodeSpec {
    std::string name;
    std::filesystem::path scene_path;
    Pose start;
    std::string target_label;
    int step_budget = 500;
    int success_radius = 2;
};

// Parses an episode list; scene paths are resolved relative to the list file.
std::vector<EpisodeSpec> load_episodes(const std::filesystem::path& path);
std::vector<EpisodeSpec> parse_episodes(std::string_view text, const std::filesystem::path& base_dir);

enum class MovePrimitive { forward, turn_left, turn_right, stop };

// One "episode ..." line followed by one primitive per line.
struct ScriptedEpisode {
    EpisodeSpec spec;
    std::vector<MovePrimitive> actions;
};
ScriptedEpisode load_script(const std::filesystem::path& path);

struct WorldConfig {
    int fov_range = 12;
    // Objects tagged "small" are resolvable only this close.
    int small_object_range = 5;
};

const char* to_string(MovePrimitive p);
MovePrimitive primitive_from_string(std::string_view s);

// Cells inside the 90 degree cone of `pose` within `range`, unoccluded by walls.
std::vector<VisibleCell> raycast_fov(const GridScene& scene, const Pose& pose, int range);
// Bresenham cells strictly between a and b.
std::vector<Cell> line_between(Cell a, Cell b);

Observation make_observation(const GridScene& scene, const Pose& pose, int step, const WorldConfig& cfg);

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

// 4-connected BFS over traversable cells; kUnreachable if no region cell is reachable.
int shortest_path_length(const GridScene& scene, Cell from, std::span<const Cell> region);

// Traversable cells within `radius` of any footprint cell of an instance labelled `label`.
std::vector<Cell> success_region(const GridScene& scene, std::string_view label, int radius);
bool within_success(const GridScene& scene, Cell c, std::string_view label, int radius);

class World {
public:
    World(GridScene scene, EpisodeSpec spec, WorldConfig cfg = {});

    // Observation at the current pose; does not consume a step.
    Observation observe() const;
    Observation step(MovePrimitive action);
    // Four turn_left primitives; throws BudgetExhausted if fewer than 4 steps remain.
    std::vector<Observation> pan_around();

    const GridScene& scene() const { return scene_; }
    const EpisodeSpec& spec() const { return spec_; }
    const WorldConfig& config() const { return cfg_; }
    const Pose& pose() const { return pose_; }
    int steps_taken() const { return steps_; }
    int steps_remaining() const { return spec_.step_budget - steps_; }
    int path_length() const { return path_length_; }
    bool stopped() const { return stopped_; }
    bool finished() const { return stopped_ || steps_ >= spec_.step_budget; }

private:
    GridScene scene_;
    EpisodeSpec spec_;
    WorldConfig cfg_;
    Pose pose_;
    int steps_ = 0;
    int path_length_ = 0;
    bool stopped_ = false;
};

// Whitespace tokenizer honouring double quotes; used by every text format here.
std::vector<std::string> tokenize(std::string_view line);

}  // namespace ognav

#include "ognav/world.hpp"
#include "ognav/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace ognav {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int to_int(const std::string& s, int line_no) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": expected integer, got '" + s + "'");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    bool have = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            have = true;
        } else if (!quoted && (c == ' ' || c == '\t' || c == '\r')) {
            if (have) out.push_back(cur);
            cur.clear();
            have = false;
        } else if (!quoted && c == '#') {
            break;
        } else {
            cur += c;
            have = true;
        }
    }
    if (quoted) throw ParseError("unterminated quote in: " + std::string(line));
    if (have) out.push_back(cur);
    return out;
}

// --- ObjectInstance ---

bool ObjectInstance::has_attribute(std::string_view a) const {
    return std::find(attributes.begin(), attributes.end(), a) != attributes.end();
}

VoxelSet ObjectInstance::voxels() const {
    VoxelSet v;
    for (const auto& c : footprint)
        for (int z = z_min; z <= z_max; ++z) v.insert({c.x, c.y, z});
    return v;
}

// --- GridScene ---

GridScene::GridScene(int width, int height)
    : width_(width),
      height_(height),
      walls_(static_cast<std::size_t>(width) * height, 0),
      occupant_(static_cast<std::size_t>(width) * height, -1) {}

bool GridScene::is_wall(Cell c) const { return !in_bounds(c) || walls_[index(c)] != 0; }

bool GridScene::is_traversable(Cell c) const {
    if (!in_bounds(c)) return false;
    return walls_[index(c)] == 0 && occupant_[index(c)] < 0;
}

void GridScene::set_wall(Cell c, bool wall) {
    if (in_bounds(c)) walls_[index(c)] = wall ? 1 : 0;
}

void GridScene::add_object(ObjectInstance obj) {
    for (const auto& c : obj.footprint)
        if (in_bounds(c) && occupant_[index(c)] < 0) occupant_[index(c)] = obj.id;
    objects_.push_back(std::move(obj));
}

const Room* GridScene::room_at(Cell c) const {
    for (const auto& r : rooms_)
        if (r.rect.contains(c)) return &r;
    return nullptr;
}

const ObjectInstance* GridScene::object(int id) const {
    for (const auto& o : objects_)
        if (o.id == id) return &o;
    return nullptr;
}

std::vector<const ObjectInstance*> GridScene::objects_with_label(std::string_view label) const {
    std::vector<const ObjectInstance*> out;
    for (const auto& o : objects_)
        if (o.label == label) out.push_back(&o);
    return out;
}

void GridScene::validate() const {
    for (std::size_t i = 0; i < rooms_.size(); ++i)
        for (std::size_t j = i + 1; j < rooms_.size(); ++j)
            if (rooms_[i].rect.overlaps(rooms_[j].rect))
                throw ParseError("rooms overlap: " + rooms_[i].name + ", " + rooms_[j].name);

    std::set<int> ids;
    for (const auto& o : objects_) {
        if (!ids.insert(o.id).second) throw ParseError("duplicate object id " + std::to_string(o.id));
        if (o.footprint.empty()) throw ParseError("object " + o.label + " has empty footprint");
        if (o.z_max < o.z_min) throw ParseError("object " + o.label + " has empty height band");
        const Room* room = nullptr;
        for (const auto& c : o.footprint) {
            if (is_wall(c)) throw ParseError("object " + o.label + " overlaps a wall");
            int containing = 0;
            for (const auto& r : rooms_)
                if (r.rect.contains(c)) {
                    ++containing;
                    if (room && room != &r) throw ParseError("object " + o.label + " spans rooms");
                    room = &r;
                }
            if (containing != 1) throw ParseError("object " + o.label + " not inside exactly one room");
        }
        // footprint connectivity
        std::set<Cell> cells(o.footprint.begin(), o.footprint.end());
        std::set<Cell> seen{*cells.begin()};
        std::deque<Cell> q{*cells.begin()};
        while (!q.empty()) {
            Cell c = q.front();
            q.pop_front();
            for (Heading h : kHeadings) {
                Cell n = advance(c, h);
                if (cells.count(n) && seen.insert(n).second) q.push_back(n);
            }
        }
        if (seen.size() != cells.size()) throw ParseError("object " + o.label + " footprint not connected");
        if (o.on_receptacle && !object(*o.on_receptacle))
            throw ParseError("object " + o.label + " rests on unknown receptacle");
    }
}

GridScene GridScene::load(const std::filesystem::path& path) { return parse(read_file(path)); }

GridScene GridScene::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    std::string name = "scene";
    double cell_size = 0.25;
    std::vector<std::string> rows;
    std::vector<Room> rooms;
    std::vector<ObjectInstance> objects;
    bool in_map = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (in_map) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line == "end") {
                in_map = false;
                continue;
            }
            rows.push_back(line);
            continue;
        }
        auto tok = tokenize(line);
        if (tok.empty()) continue;
        const auto& kw = tok[0];
        if (kw == "scene" && tok.size() == 2) {
            name = tok[1];
        } else if (kw == "cell_size" && tok.size() == 2) {
            cell_size = std::stod(tok[1]);
        } else if (kw == "map") {
            in_map = true;
        } else if (kw == "room" && tok.size() == 6) {
            rooms.push_back({tok[1], {to_int(tok[2], line_no), to_int(tok[3], line_no), to_int(tok[4], line_no),
                                      to_int(tok[5], line_no)}});
        } else if (kw == "object" && tok.size() >= 10 && tok[7] == "z") {
            ObjectInstance o;
            o.id = to_int(tok[1], line_no);
            o.label = tok[2];
            CellRect r{to_int(tok[3], line_no), to_int(tok[4], line_no), to_int(tok[5], line_no),
                       to_int(tok[6], line_no)};
            for (int y = r.y0; y <= r.y1; ++y)
                for (int x = r.x0; x <= r.x1; ++x) o.footprint.push_back({x, y});
            o.z_min = to_int(tok[8], line_no);
            o.z_max = to_int(tok[9], line_no);
            for (std::size_t i = 10; i < tok.size(); ++i) {
                if (tok[i] == "attrs" && i + 1 < tok.size()) {
                    o.attributes = split(tok[++i], ',');
                } else if (tok[i] == "on" && i + 1 < tok.size()) {
                    o.on_receptacle = to_int(tok[++i], line_no);
                } else {
                    throw ParseError("line " + std::to_string(line_no) + ": unexpected '" + tok[i] + "'");
                }
            }
            objects.push_back(std::move(o));
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + line + "'");
        }
    }
    if (in_map) throw ParseError("map block not terminated by 'end'");
    if (rows.empty()) throw ParseError("scene has no map");
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.front().size());
    GridScene scene(w, h);
    scene.name_ = name;
    scene.cell_size_ = cell_size;
    for (int r = 0; r < h; ++r) {
        if (static_cast<int>(rows[r].size()) != w) throw ParseError("map rows have unequal width");
        for (int x = 0; x < w; ++x) {
            const char c = rows[r][x];
            if (c != '#' && c != '.') throw ParseError(std::string("bad map character '") + c + "'");
            // first text row is the northern edge
            scene.set_wall({x, h - 1 - r}, c == '#');
        }
    }
    for (auto& r : rooms) scene.add_room(std::move(r));
    for (auto& o : objects) scene.add_object(std::move(o));
    scene.validate();
    return scene;
}

// --- episodes ---

std::vector<EpisodeSpec> parse_episodes(std::string_view text, const std::filesystem::path& base_dir) {
    std::vector<EpisodeSpec> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto tok = tokenize(line);
        if (tok.empty()) continue;
        if (tok[0] != "episode" || tok.size() < 2)
            throw ParseError("line " + std::to_string(line_no) + ": expected 'episode <name> key=value...'");
        EpisodeSpec e;
        e.name = tok[1];
        bool have_scene = false, have_start = false, have_target = false;
        for (std::size_t i = 2; i < tok.size(); ++i) {
            const auto eq = tok[i].find('=');
            if (eq == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected key=value");
            const std::string key = tok[i].substr(0, eq);
            const std::string val = tok[i].substr(eq + 1);
            if (key == "scene") {
                e.scene_path = base_dir / val;
                have_scene = true;
            } else if (key == "start") {
                auto parts = split(val, ',');
                if (parts.size() != 3 || parts[2].size() != 1)
                    throw ParseError("line " + std::to_string(line_no) + ": start must be x,y,H");
                e.start = {{to_int(parts[0], line_no), to_int(parts[1], line_no)}, heading_from_char(parts[2][0])};
                have_start = true;
            } else if (key == "target") {
                e.target_label = val;
                have_target = true;
            } else if (key == "budget") {
                e.step_budget = to_int(val, line_no);
            } else if (key == "radius") {
                e.success_radius = to_int(val, line_no);
            } else {
                throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        }
        if (!have_scene || !have_start || !have_target)
            throw ParseError("line " + std::to_string(line_no) + ": episode needs scene, start and target");
        if (e.step_budget <= 0) throw ParseError("line " + std::to_string(line_no) + ": budget must be positive");
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<EpisodeSpec> load_episodes(const std::filesystem::path& path) {
    return parse_episodes(read_file(path), path.parent_path());
}

// --- primitives ---

const char* to_string(MovePrimitive p) {
    switch (p) {
        case MovePrimitive::forward: return "forward";
        case MovePrimitive::turn_left: return "turn_left";
        case MovePrimitive::turn_right: return "turn_right";
        case MovePrimitive::stop: return "stop";
    }
    return "?";
}

MovePrimitive primitive_from_string(std::string_view s) {
    if (s == "forward") return MovePrimitive::forward;
    if (s == "turn_left") return MovePrimitive::turn_left;
    if (s == "turn_right") return MovePrimitive::turn_right;
    if (s == "stop") return MovePrimitive::stop;
    throw ParseError("unknown primitive '" + std::string(s) + "'");
}

// --- raycast ---

std::vector<Cell> line_between(Cell a, Cell b) {
    std::vector<Cell> out;
    int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
    int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
    int err = dx + dy;
    Cell c = a;
    while (true) {
        if (c == b) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            c.x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            c.y += sy;
        }
        if (c != b) out.push_back(c);
    }
    return out;
}

std::vector<VisibleCell> raycast_fov(const GridScene& scene, const Pose& pose, int range) {
    std::vector<VisibleCell> out;
    const Cell o = pose.cell;
    for (int dx = -range; dx <= range; ++dx) {
        for (int dy = -range; dy <= range; ++dy) {
            if (dx * dx + dy * dy > range * range) continue;
            int fwd = 0, lat = 0;
            switch (pose.heading) {
                case Heading::N: fwd = dy; lat = dx; break;
                case Heading::E: fwd = dx; lat = dy; break;
                case Heading::S: fwd = -dy; lat = dx; break;
                case Heading::W: fwd = -dx; lat = dy; break;
            }
            if (fwd < std::abs(lat)) continue;
            const Cell c{o.x + dx, o.y + dy};
            if (!scene.in_bounds(c)) continue;
            bool blocked = false;
            for (const Cell& m : line_between(o, c))
                if (scene.is_wall(m)) {
                    blocked = true;
                    break;
                }
            if (blocked) continue;
            out.push_back({c, std::hypot(double(dx), double(dy)), !scene.is_traversable(c)});
        }
    }
    std::sort(out.begin(), out.end(), [](const VisibleCell& a, const VisibleCell& b) { return a.cell < b.cell; });
    return out;
}

Observation make_observation(const GridScene& scene, const Pose& pose, int step, const WorldConfig& cfg) {
    Observation obs;
    obs.step = step;
    obs.pose = pose;
    obs.visible_cells = raycast_fov(scene, pose, cfg.fov_range);
    std::map<Cell, double> seen;
    for (const auto& vc : obs.visible_cells) seen.emplace(vc.cell, vc.range);
    for (const auto& o : scene.objects()) {
        const double reach = o.is_small() ? cfg.small_object_range : cfg.fov_range;
        VisibleObject vo{o.id, {}};
        for (const auto& c : o.footprint) {
            auto it = seen.find(c);
            if (it == seen.end() || it->second > reach) continue;
            for (int z = o.z_min; z <= o.z_max; ++z) vo.voxels.insert({c.x, c.y, z});
        }
        if (!vo.voxels.empty()) obs.visible_objects.push_back(std::move(vo));
    }
    return obs;
}

// --- shortest paths ---

int shortest_path_length(const GridScene& scene, Cell from, std::span<const Cell> region) {
    std::set<Cell> goal(region.begin(), region.end());
    if (goal.count(from)) return 0;
    if (!scene.in_bounds(from)) return kUnreachable;
    std::vector<int> dist(static_cast<std::size_t>(scene.width()) * scene.height(), -1);
    auto at = [&](Cell c) -> int& { return dist[static_cast<std::size_t>(c.y) * scene.width() + c.x]; };
    std::deque<Cell> q{from};
    at(from) = 0;
    while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        for (Heading h : kHeadings) {
            const Cell n = advance(c, h);
            if (!scene.is_traversable(n) || at(n) >= 0) continue;
            at(n) = at(c) + 1;
            if (goal.count(n)) return at(n);
            q.push_back(n);
        }
    }
    return kUnreachable;
}

std::vector<Cell> success_region(const GridScene& scene, std::string_view label, int radius) {
    std::vector<Cell> out;
    for (int y = 0; y < scene.height(); ++y)
        for (int x = 0; x < scene.width(); ++x)
            if (scene.is_traversable({x, y}) && within_success(scene, {x, y}, label, radius)) out.push_back({x, y});
    return out;
}

bool within_success(const GridScene& scene, Cell c, std::string_view label, int radius) {
    for (const auto* o : scene.objects_with_label(label))
        for (const auto& f : o->footprint)
            if (distance(c, f) <= radius + 1e-9) return true;
    return false;
}

// --- World ---

World::World(GridScene scene, EpisodeSpec spec, WorldConfig cfg)
    : scene_(std::move(scene)), spec_(std::move(spec)), cfg_(cfg), pose_(spec_.start) {
    if (!scene_.is_traversable(pose_.cell)) throw ParseError("start pose is not a free cell");
    if (scene_.objects_with_label(spec_.target_label).empty())
        throw ParseError("no instance of target '" + spec_.target_label + "' in scene");
}

Observation World::observe() const { return make_observation(scene_, pose_, steps_, cfg_); }

Observation World::step(MovePrimitive action) {
    if (stopped_) throw EpisodeFinished("stop already issued");
    if (steps_ >= spec_.step_budget) throw EpisodeFinished("step budget exhausted");
    switch (action) {
        case MovePrimitive::forward: {
            const Cell next = advance(pose_.cell, pose_.heading);
            if (scene_.is_traversable(next)) {
                pose_.cell = next;
                ++path_length_;
            }
            break;
        }
        case MovePrimitive::turn_left: pose_.heading = turn_left(pose_.heading); break;
        case MovePrimitive::turn_right: pose_.heading = turn_right(pose_.heading); break;
        case MovePrimitive::stop: stopped_ = true; break;
    }
    ++steps_;
    return observe();
}

std::vector<Observation> World::pan_around() {
    if (stopped_) throw EpisodeFinished("stop already issued");
    if (steps_remaining() < 4) throw BudgetExhausted("pan needs 4 steps, " + std::to_string(steps_remaining()) + " left");
    std::vector<Observation> out;
    for (int i = 0; i < 4; ++i) out.push_back(step(MovePrimitive::turn_left));
    return out;
}

ScriptedEpisode load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open script " + path.string());
    ScriptedEpisode script;
    bool have_spec = false;
    std::string line;
    while (std::getline(in, line)) {
        const auto tok = tokenize(line);
        if (tok.empty()) continue;
        if (tok[0] == "episode") {
            auto specs = parse_episodes(line, path.parent_path());
            if (have_spec || specs.size() != 1) throw ParseError("script needs exactly one episode line");
            script.spec = specs.front();
            have_spec = true;
        } else {
            if (!have_spec) throw ParseError("script must start with an episode line");
            script.actions.push_back(primitive_from_string(tok[0]));
        }
    }
    if (!have_spec) throw ParseError("script has no episode line");
    return script;
}

}  // namespace ognav

#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ognav {

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

// One voxel of the scene: a grid cell plus a height layer.
struct Voxel {
    int x = 0;
    int y = 0;
    int z = 0;
    auto operator<=>(const Voxel&) const = default;
};

using VoxelSet = std::set<Voxel>;

// North is +y, east is +x.
enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

inline constexpr Heading kHeadings[4] = {Heading::N, Heading::E, Heading::S, Heading::W};

Heading turn_left(Heading h);
Heading turn_right(Heading h);
Cell offset(Heading h);
Cell advance(Cell c, Heading h);
char heading_char(Heading h);
Heading heading_from_char(char c);

// Inclusive cell rectangle.
struct CellRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    bool empty() const { return x1 < x0 || y1 < y0; }
    bool contains(Cell c) const { return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1; }
    int area() const { return empty() ? 0 : (x1 - x0 + 1) * (y1 - y0 + 1); }
    bool overlaps(const CellRect& o) const {
        return !(empty() || o.empty() || o.x0 > x1 || o.x1 < x0 || o.y0 > y1 || o.y1 < y0);
    }
    auto operator<=>(const CellRect&) const = default;
};

double distance(Cell a, Cell b);

struct Point3 {
    double x = 0;
    double y = 0;
    double z = 0;
    bool operator==(const Point3&) const = default;
};

Point3 centroid(const VoxelSet& voxels);
// Nearest grid cell to the (x, y) projection of a point.
Cell project(const Point3& p);
double planar_distance(const Point3& a, const Point3& b);
double planar_distance(const Point3& a, Cell c);

CellRect bounding_rect(const VoxelSet& voxels);
std::set<Cell> footprint_of(const VoxelSet& voxels);
std::size_t intersection_size(const VoxelSet& a, const VoxelSet& b);

// Shortest string that round-trips the fraction with at most four decimals,
// keeping one trailing zero ("1.0", "0.9375", "0.759").
std::string format_fraction(double v);

}  // namespace ognav

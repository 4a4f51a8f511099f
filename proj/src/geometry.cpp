#include "ognav/geometry.hpp"
#include "ognav/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ognav {

Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

Cell offset(Heading h) {
    switch (h) {
        case Heading::N: return {0, 1};
        case Heading::E: return {1, 0};
        case Heading::S: return {0, -1};
        case Heading::W: return {-1, 0};
    }
    return {0, 0};
}

Cell advance(Cell c, Heading h) {
    const Cell d = offset(h);
    return {c.x + d.x, c.y + d.y};
}

char heading_char(Heading h) { return "NESW"[static_cast<int>(h)]; }

Heading heading_from_char(char c) {
    switch (c) {
        case 'N': case 'n': return Heading::N;
        case 'E': case 'e': return Heading::E;
        case 'S': case 's': return Heading::S;
        case 'W': case 'w': return Heading::W;
    }
    throw std::invalid_argument(std::string("bad heading '") + c + "'");
}

double distance(Cell a, Cell b) { return std::hypot(double(a.x - b.x), double(a.y - b.y)); }

Point3 centroid(const VoxelSet& voxels) {
    Point3 p;
    if (voxels.empty()) return p;
    for (const auto& v : voxels) {
        p.x += v.x;
        p.y += v.y;
        p.z += v.z;
    }
    const double n = static_cast<double>(voxels.size());
    return {p.x / n, p.y / n, p.z / n};
}

Cell project(const Point3& p) {
    return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))};
}

double planar_distance(const Point3& a, const Point3& b) { return std::hypot(a.x - b.x, a.y - b.y); }
double planar_distance(const Point3& a, Cell c) { return std::hypot(a.x - c.x, a.y - c.y); }

CellRect bounding_rect(const VoxelSet& voxels) {
    if (voxels.empty()) return {};
    CellRect r{voxels.begin()->x, voxels.begin()->y, voxels.begin()->x, voxels.begin()->y};
    for (const auto& v : voxels) {
        r.x0 = std::min(r.x0, v.x);
        r.y0 = std::min(r.y0, v.y);
        r.x1 = std::max(r.x1, v.x);
        r.y1 = std::max(r.y1, v.y);
    }
    return r;
}

std::set<Cell> footprint_of(const VoxelSet& voxels) {
    std::set<Cell> cells;
    for (const auto& v : voxels) cells.insert({v.x, v.y});
    return cells;
}

std::size_t intersection_size(const VoxelSet& a, const VoxelSet& b) {
    std::size_t n = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return n;
}

std::string format_fraction(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s(buf);
    while (s.size() > 1 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    return s;
}

// --- rng ---

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    // splitmix64 folding
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (auto p : parts) {
        h ^= p + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        std::uint64_t z = h;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        h = z ^ (z >> 31);
    }
    return h;
}

std::uint64_t hash_text(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

Rng::Rng(std::initializer_list<std::uint64_t> parts) : engine_(mix_seed(parts)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
}

int Rng::poisson(double mean) {
    if (mean <= 0) return 0;
    // Knuth; means here are small (per-frame false-positive rates).
    const double limit = std::exp(-mean);
    int k = 0;
    double p = uniform();
    while (p > limit) {
        ++k;
        p *= uniform();
    }
    return k;
}

}  // namespace ognav

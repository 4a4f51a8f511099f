#include "ognav/errors.hpp"
#include "ognav/navexec.hpp"
#include "ognav/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <queue>
#include <sstream>

using namespace ognav;
using namespace ognav::testing;

namespace {

}  // namespace

TEST(Frontiers, MatchDoubleLoopOracle) {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = random_map(30, 30, rng, 0.2, 0.3);
        std::vector<Cell> want;
        for (int y = 0; y < 30; ++y)
            for (int x = 0; x < 30; ++x) {
                if (!m.is_free({x, y})) continue;
                bool edge = false;
                for (int k = 0; k < 4; ++k) {
                    const int nx = x + (k == 0) - (k == 1), ny = y + (k == 2) - (k == 3);
                    if (nx >= 0 && ny >= 0 && nx < 30 && ny < 30 && !m.explored({nx, ny})) edge = true;
                }
                if (edge) want.push_back({x, y});
            }
        std::sort(want.begin(), want.end());
        ASSERT_EQ(frontiers(m), want);
    }
}

TEST(Frontiers, FullyKnownMapHasNone) { EXPECT_TRUE(frontiers(all_free(8, 8)).empty()); }

TEST(EpisodicMapTest, KnowledgeIsMonotone) {
    EpisodicMap m(5, 5);
    EXPECT_TRUE(m.reveal({1, 1}, CellState::free));
    EXPECT_FALSE(m.reveal({1, 1}, CellState::obstacle));
    EXPECT_EQ(m.state({1, 1}), CellState::free);
    EXPECT_FALSE(m.reveal({1, 2}, CellState::unknown));
    EXPECT_EQ(m.state({9, 9}), CellState::obstacle);
    EXPECT_EQ(m.rle(), "6u1f18u");
}

TEST(EpisodicMapTest, RandomWalkNeverForgets) {
    const auto scene = GridScene::load(data_dir() / "scenes" / "home_a.scene");
    const auto episodes = load_episodes(data_dir() / "suite.episodes");
    World world(scene, episodes.at(0));
    EpisodicMap m(scene.width(), scene.height());
    m.update(world.observe());
    Rng rng(4);
    for (int i = 0; i < 300 && !world.finished(); ++i) {
        const EpisodicMap before = m;
        const auto obs = world.step(static_cast<MovePrimitive>(rng.below(3)));
        m.update(obs);
        EXPECT_TRUE(m.is_free(obs.pose.cell));
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (before.explored({x, y})) ASSERT_EQ(before.state({x, y}), m.state({x, y}));
        // the map agrees with the scene wherever it is known
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (m.explored({x, y})) ASSERT_EQ(m.is_free({x, y}), scene.is_traversable({x, y}));
    }
}

TEST(GoalMapTest, ExploreSceneIsFrontierSet) {
    Rng rng(8);
    auto m = random_map(20, 20, rng, 0.0, 0.5);
    m.reveal({10, 10}, CellState::free);
    // open everything around the agent so at least one frontier is reachable
    for (int x = 0; x < 20; ++x) m.reveal({x, 10}, CellState::free);
    auto g = build_goal_map(PlannerDecision::explore_scene(), {}, m, {10, 10});
    EXPECT_EQ(g.cells, frontiers(m));
    EXPECT_EQ(g.mode, GoalMode::frontier);
}

TEST(GoalMapTest, FullyExploredMapIsStuck) {
    EXPECT_THROW(build_goal_map(PlannerDecision::explore_scene(), {}, all_free(10, 10), {5, 5}), Stuck);
}

TEST(GoalMapTest, ObjectRingMatchesDistanceFilter) {
    const auto m = all_free(15, 15);
    NodeRecord n;
    n.id = 4;
    n.centroid = {7, 7, 1};
    const auto g = build_goal_map(PlannerDecision::explore_obj(4), {n}, m, {1, 1});
    std::vector<Cell> want;
    for (int y = 0; y < 15; ++y)
        for (int x = 0; x < 15; ++x)
            if ((x - 7) * (x - 7) + (y - 7) * (y - 7) <= 4) want.push_back({x, y});
    std::sort(want.begin(), want.end());
    EXPECT_EQ(g.cells, want);
    EXPECT_EQ(g.cells.size(), 13u);
    EXPECT_EQ(g.mode, GoalMode::object);
    EXPECT_FALSE(g.fallback);
}

TEST(GoalMapTest, UnseenNodeFallsBackToNearestFrontier) {
    EpisodicMap m(20, 5);
    for (int x = 0; x < 10; ++x)
        for (int y = 0; y < 5; ++y) m.reveal({x, y}, CellState::free);
    NodeRecord n;
    n.id = 0;
    n.centroid = {16, 2, 0};
    const auto g = build_goal_map(PlannerDecision::explore_obj(0), {n}, m, {0, 0});
    EXPECT_TRUE(g.fallback);
    EXPECT_EQ(g.cells, (std::vector<Cell>{{9, 2}}));
    EXPECT_THROW(build_goal_map(PlannerDecision::explore_obj(1), {n}, m, {0, 0}), UnknownNode);
}

TEST(Fmm, GoalNeighbourAndDiagonal) {
    const auto m = all_free(5, 5);
    GoalMap g;
    g.cells = {{2, 2}};
    const auto f = fmm(m, g);
    EXPECT_EQ(f.at({2, 2}), 0.0);
    EXPECT_NEAR(f.at({3, 2}), 1.0, 1e-12);
    EXPECT_NEAR(f.at({2, 1}), 1.0, 1e-12);
    EXPECT_NEAR(f.at({3, 3}), 1.0 + 1.0 / std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(f.at({1, 1}), 1.0 + 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Fmm, ObstaclesAndUnknownStayInfinite) {
    Rng rng(2);
    const auto m = random_map(20, 20, rng, 0.2, 0.2);
    GoalMap g;
    g.cells = random_free_cells(m, rng, 1);
    const auto f = fmm(m, g);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            if (!m.is_free({x, y})) EXPECT_FALSE(f.finite({x, y}));
    EXPECT_THROW(fmm(m, GoalMap{}), std::invalid_argument);
}

TEST(Fmm, SandwichBoundOnRandomMaps) {
    Rng rng(99);
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_map(40, 40, rng, 0.25, 0.1);
        GoalMap g;
        g.cells = random_free_cells(m, rng, 1 + static_cast<int>(rng.below(3)));
        std::sort(g.cells.begin(), g.cells.end());
        if (g.cells.empty()) continue;
        const auto f = fmm(m, g);
        const auto d = multi_bfs(m, g.cells);
        for (int y = 0; y < 40; ++y)
            for (int x = 0; x < 40; ++x) {
                const double t = f.at({x, y});
                const int dij = d[static_cast<std::size_t>(y) * 40 + x];
                if (dij < 0) {
                    violations += std::isfinite(t) ? 1 : 0;
                    continue;
                }
                double euclid = 1e18;
                for (auto c : g.cells) euclid = std::min(euclid, std::hypot(double(x - c.x), double(y - c.y)));
                if (t > dij + 1e-9 || t < euclid - 1e-9) ++violations;
            }
        for (std::size_t i = 1; i < f.acceptance_order.size(); ++i)
            ASSERT_LE(f.at(f.acceptance_order[i - 1]), f.at(f.acceptance_order[i]) + 1e-12);
    }
    EXPECT_EQ(violations, 0);
}

TEST(NextPrimitive, BasicCases) {
    const auto m = all_free(5, 5);
    GoalMap g;
    g.cells = {{2, 3}};
    const auto f = fmm(m, g);
    EXPECT_EQ(next_primitive(f, {{2, 3}, Heading::E}), MovePrimitive::stop);
    EXPECT_EQ(next_primitive(f, {{2, 2}, Heading::N}), MovePrimitive::forward);
    EXPECT_EQ(next_primitive(f, {{2, 2}, Heading::W}), MovePrimitive::turn_right);
    EXPECT_EQ(next_primitive(f, {{2, 2}, Heading::E}), MovePrimitive::turn_left);
    EXPECT_EQ(next_primitive(f, {{2, 2}, Heading::S}), MovePrimitive::turn_left);
}

TEST(NextPrimitive, WalledInAgentIsStuck) {
    EpisodicMap m(5, 5);
    for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y) m.reveal({x, y}, x == 2 ? CellState::obstacle : CellState::free);
    GoalMap g;
    g.cells = {{4, 2}};
    const auto f = fmm(m, g);
    EXPECT_THROW(next_primitive(f, {{0, 2}, Heading::E}), Stuck);
}

TEST(NextPrimitive, FollowingReachesGoalWithinThreeTimesDijkstra) {
    Rng rng(17);
    int runs = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto m = random_map(25, 25, rng, 0.25, 0.0);
        const auto cells = random_free_cells(m, rng, 2);
        if (cells.size() < 2) continue;
        GoalMap g;
        g.cells = {cells[0]};
        const auto d = multi_bfs(m, g.cells);
        const int dij = d[static_cast<std::size_t>(cells[1].y) * 25 + cells[1].x];
        if (dij < 0) continue;
        ++runs;
        const auto f = fmm(m, g);
        Pose pose{cells[1], kHeadings[rng.below(4)]};
        int primitives = 0;
        for (;;) {
            const auto p = next_primitive(f, pose);
            if (p == MovePrimitive::stop) break;
            ++primitives;
            ASSERT_LE(primitives, 3 * dij + 2) << "trial " << trial;
            if (p == MovePrimitive::forward) {
                pose.cell = advance(pose.cell, pose.heading);
                ASSERT_TRUE(m.is_free(pose.cell));
            } else {
                pose.heading = p == MovePrimitive::turn_left ? turn_left(pose.heading) : turn_right(pose.heading);
            }
        }
        EXPECT_EQ(pose.cell, cells[0]);
        // the initial turn-around is the only slack beyond 3x
        EXPECT_LE(primitives, std::max(3 * dij, 2));
    }
    EXPECT_GT(runs, 100);
}

TEST(Dumps, RenderTopRowFirst) {
    EpisodicMap m(3, 2);
    m.reveal({0, 1}, CellState::obstacle);
    m.reveal({1, 0}, CellState::free);
    std::ostringstream out;
    Pose p{{1, 0}, Heading::N};
    dump_map(m, out, &p);
    EXPECT_EQ(out.str(), "#  \n N \n");
}

TEST(Fmm, FrontsOfDifferentGoalsAreNotBlended) {
    const auto m = all_free(30, 15);
    GoalMap g;
    g.cells = {{15, 9}, {18, 5}};
    const auto f = fmm(m, g);
    // nearest goal is 4 cells straight along the row
    EXPECT_GE(f.at({14, 5}), 4.0 - 1e-9);
    EXPECT_LE(f.at({14, 5}), 4.0 + 1e-9);
}

TEST(Coverage, OnlyCloseCellsAreInspected) {
    EpisodicMap m(10, 3);
    Observation obs;
    obs.pose.cell = {0, 1};
    for (int x = 0; x < 10; ++x) obs.visible_cells.push_back({{x, 1}, double(x), false});
    m.update(obs, 5);
    for (int x = 0; x < 10; ++x) {
        EXPECT_TRUE(m.is_free({x, 1}));
        EXPECT_EQ(m.inspected({x, 1}), x <= 5) << x;
    }
    const auto g = coverage_goal(m, {0, 1});
    EXPECT_EQ(g.mode, GoalMode::coverage);
    EXPECT_EQ(g.cells, (std::vector<Cell>{{6, 1}, {7, 1}, {8, 1}, {9, 1}}));
}

TEST(Coverage, ExhaustedWhenEveryReachableCellIsInspected) {
    EpisodicMap m(6, 1);
    Observation obs;
    obs.pose.cell = {0, 0};
    for (int x = 0; x < 6; ++x) obs.visible_cells.push_back({{x, 0}, double(x), x == 3});
    m.update(obs, 2);
    // (4,0) and (5,0) are uninspected but sit behind the obstacle
    EXPECT_FALSE(m.inspected({4, 0}));
    EXPECT_THROW(coverage_goal(m, {0, 0}), Stuck);
}

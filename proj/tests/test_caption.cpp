#include "ognav/caption.hpp"
#include "ognav/errors.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ognav;
using namespace ognav::testing;

namespace {

Detection det(std::string label, VoxelSet mask, std::optional<int> source = std::nullopt) {
    Detection d;
    d.label = std::move(label);
    d.mask = std::move(mask);
    d.bbox = bounding_rect(d.mask);
    d.source_object = source;
    return d;
}

class FailingCaptioner : public Captioner {
public:
    std::string caption(const CaptionJob&) override { throw BackendFailure("offline"); }
};

class CountingCaptioner : public Captioner {
public:
    int calls = 0;
    std::string caption(const CaptionJob& job) override {
        ++calls;
        return template_caption(job);
    }
};

SceneGraph graph_with(const std::vector<std::pair<std::string, Cell>>& objects) {
    SceneGraph g;
    std::vector<Detection> dets;
    for (const auto& [label, c] : objects) dets.push_back(det(label, {{c.x, c.y, 0}}));
    g.integrate(dets, 0);
    return g;
}

}  // namespace

TEST(CaptionTemplate, FullSentence) {
    CaptionJob job;
    job.label = "chair";
    job.attributes = {"wooden"};
    job.neighbor_labels = {"table"};
    job.room = "kitchen";
    EXPECT_EQ(template_caption(job), "a wooden chair near table in the kitchen");
}

TEST(CaptionTemplate, ElidesEmptyClauses) {
    CaptionJob job;
    job.label = "chair";
    job.room = "kitchen";
    EXPECT_EQ(template_caption(job), "a chair in the kitchen");
    job.room.clear();
    EXPECT_EQ(template_caption(job), "a chair");
}

TEST(CaptionJob, NeighborsWithinRadiusOnly) {
    auto g = graph_with({{"chair", {10, 10}}, {"table", {13, 10}}, {"bed", {15, 10}}});
    auto job = make_caption_job(g, 0, nullptr, 4.0);
    EXPECT_EQ(job.neighbor_labels, (std::vector<std::string>{"table"}));
}

TEST(CaptionJob, RoomAndAttributesFromScene) {
    GridScene s = open_room(12, 12);
    s.add_object(make_object(7, "chair", {3, 3, 3, 3}, 0, 1, {"wooden", "small"}));
    SceneGraph g;
    std::vector<Detection> d{det("chair", {{3, 3, 0}, {3, 3, 1}}, 7)};
    g.integrate(d, 0);
    auto job = make_caption_job(g, 0, &s);
    EXPECT_EQ(job.room, "room");
    EXPECT_EQ(job.attributes, (std::vector<std::string>{"wooden"}));
    EXPECT_EQ(template_caption(job), "a wooden chair in the room");
}

TEST(CaptionJob, BestViewIsLargestMask) {
    SceneGraph g;
    std::vector<Detection> a{det("bed", {{0, 0, 0}})};
    std::vector<Detection> b{det("bed", {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}})};
    std::vector<Detection> c{det("bed", {{0, 0, 0}, {1, 0, 0}})};
    a[0].frame = 0, b[0].frame = 1, c[0].frame = 2;
    g.integrate(a, 0);
    g.integrate(b, 1);
    g.integrate(c, 2);
    EXPECT_EQ(make_caption_job(g, 0, nullptr).best_view_step, 1);
}

TEST(CaptionQueue, CaptionsImmediatelyWhileExploringScene) {
    auto g = graph_with({{"chair", {1, 1}}, {"bed", {20, 20}}});
    CountingCaptioner cap;
    CaptionQueue q;
    q.enqueue(0);
    q.enqueue(1);
    EXPECT_EQ(q.on_step({&g, &cap, nullptr, 4.0}), 2);
    EXPECT_TRUE(q.pending().empty());
    EXPECT_TRUE(g.node(0).caption.has_value());
}

TEST(CaptionQueue, DefersDuringObjectPhaseThenFlushes) {
    CaptionQueue q;
    CountingCaptioner cap;
    SceneGraph empty;
    EXPECT_EQ(q.flush_on_phase_end({&empty, &cap, nullptr, 4.0}), 0);

    auto g = graph_with({{"a", {0, 0}}, {"b", {10, 0}}, {"c", {20, 0}}, {"d", {30, 0}}, {"e", {40, 0}}});
    q.begin_object_phase();
    for (int i = 0; i < 5; ++i) {
        q.enqueue(i);
        EXPECT_EQ(q.on_step({&g, &cap, nullptr, 4.0}), 0);
        EXPECT_EQ(q.pending().size(), std::size_t(i + 1));
    }
    for (const auto& n : g.nodes()) EXPECT_FALSE(n.caption);
    EXPECT_EQ(q.flush_on_phase_end({&g, &cap, nullptr, 4.0}), 5);
    EXPECT_EQ(q.phase(), Phase::explore_scene);
    for (const auto& n : g.nodes()) EXPECT_TRUE(n.caption);
}

TEST(CaptionQueue, BackendFailureFallsBackToTemplate) {
    auto g = graph_with({{"chair", {1, 1}}});
    FailingCaptioner cap;
    CaptionQueue q;
    q.enqueue(0);
    q.on_step({&g, &cap, nullptr, 4.0});
    EXPECT_EQ(g.node(0).caption, "a chair");
    EXPECT_TRUE(g.node(0).caption_degraded);
}

TEST(CaptionQueue, RemoteCaptionerUsesTemplate) {
    auto g = graph_with({{"chair", {1, 1}}, {"table", {2, 1}}});
    std::vector<std::string> requests;
    auto gw = std::make_shared<Gateway>(ModelEndpoint{}, std::make_unique<FunctionTransport>([&](const std::string& r) {
                                            requests.push_back(r);
                                            return "A red chair next to a table.\nextra";
                                        }));
    LvlmCaptioner cap(gw, {PromptRole::caption, "{label}|{neighbors}|{room}|{view}", ""});
    CaptionQueue q;
    q.enqueue(0);
    q.on_step({&g, &cap, nullptr, 4.0});
    EXPECT_EQ(g.node(0).caption, "A red chair next to a table.");
    ASSERT_EQ(requests.size(), 2u);
    EXPECT_EQ(requests[0].substr(0, 25), "chair|[table]|unknown|fra");
    EXPECT_EQ(requests[1].substr(0, 25), "table|[chair]|unknown|fra");
}

TEST(CaptionTemplate, Deterministic) {
    auto g = graph_with({{"chair", {1, 1}}, {"table", {2, 1}}, {"lamp", {1, 3}}});
    EXPECT_EQ(template_caption(make_caption_job(g, 0, nullptr)), template_caption(make_caption_job(g, 0, nullptr)));
    EXPECT_EQ(template_caption(make_caption_job(g, 0, nullptr)), "a chair near table, lamp");
}

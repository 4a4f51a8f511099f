#include "ognav/errors.hpp"
#include "ognav/llmgw.hpp"
#include "ognav/perception.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace ognav;
using namespace ognav::testing;

namespace {

struct Fixture {
    GridScene scene = open_room(12, 12);
    Observation obs;
    Fixture() {
        scene.add_object(make_object(1, "chair", {5, 8, 5, 8}, 0, 1));
        obs = make_observation(scene, {{5, 3}, Heading::N}, 0, {});
    }
};

}  // namespace

TEST(Detect, NoiseFreeIsIdentity) {
    Fixture f;
    auto dets = detect(f.obs, f.scene, {});
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].label, "chair");
    EXPECT_EQ(dets[0].source_object, 1);
    EXPECT_EQ(dets[0].mask, f.obs.visible_objects[0].voxels);
    EXPECT_GE(dets[0].confidence, 0.6);
    EXPECT_LE(dets[0].confidence, 1.0);
    for (const auto& v : dets[0].mask) EXPECT_TRUE(dets[0].bbox.contains({v.x, v.y}));
}

TEST(Detect, NothingVisibleNothingDetected) {
    Fixture f;
    auto obs = make_observation(f.scene, {{5, 3}, Heading::S}, 0, {});
    EXPECT_TRUE(detect(obs, f.scene, {}).empty());
}

TEST(Detect, MissRateMonteCarlo) {
    Fixture f;
    DetectorConfig cfg;
    cfg.miss_rate = 0.5;
    int missed = 0;
    for (int t = 0; t < 1000; ++t) {
        cfg.seed = static_cast<std::uint64_t>(t);
        missed += detect(f.obs, f.scene, cfg).empty() ? 1 : 0;
    }
    EXPECT_NEAR(missed / 1000.0, 0.5, 0.05);
}

TEST(Detect, FalsePositivesFollowPoissonRate) {
    Fixture f;
    DetectorConfig cfg;
    cfg.false_positive_rate = 0.3;
    int extra = 0;
    const int n = 4000;
    for (int t = 0; t < n; ++t) {
        cfg.seed = static_cast<std::uint64_t>(t);
        for (const auto& d : detect(f.obs, f.scene, cfg)) {
            if (d.source_object) continue;
            ++extra;
            EXPECT_GE(d.confidence, 0.3);
            EXPECT_LE(d.confidence, 0.8);
            EXPECT_EQ(d.mask.size(), 1u);
        }
    }
    EXPECT_NEAR(extra / double(n), 0.3, 0.03);
}

TEST(Detect, SeedDeterminism) {
    Fixture f;
    DetectorConfig cfg;
    cfg.miss_rate = 0.3;
    cfg.false_positive_rate = 1.5;
    cfg.seed = 99;
    EXPECT_EQ(detect(f.obs, f.scene, cfg), detect(f.obs, f.scene, cfg));
}

TEST(Detect, PrimingNeverRemovesTrueDetections) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        DetectorConfig plain;
        plain.miss_rate = 0.2;
        plain.false_positive_rate = 0.5;
        plain.seed = seed;
        DetectorConfig primed = plain;
        primed.primed_label = "chair";
        auto truth = [](std::vector<Detection> v) {
            std::erase_if(v, [](const Detection& d) { return !d.source_object; });
            return v;
        };
        const auto a = detect(f.obs, f.scene, plain);
        const auto b = detect(f.obs, f.scene, primed);
        EXPECT_EQ(truth(a), truth(b));
        for (const auto& d : b)
            if (!d.source_object) EXPECT_EQ(d.label, "chair");
    }
}

TEST(Detect, LabelConfusionAndThreshold) {
    Fixture f;
    DetectorConfig cfg;
    cfg.label_confusion["chair"] = {"stool", 1.0};
    EXPECT_EQ(detect(f.obs, f.scene, cfg).at(0).label, "stool");
    cfg.label_confusion.clear();
    cfg.min_confidence = 1.01;
    EXPECT_TRUE(detect(f.obs, f.scene, cfg).empty());
}

TEST(Segments, TwoSegmentPayload) {
    const char* payload = R"({"segments": [
        {"label": "chair", "confidence": 0.9, "bbox": [1, 1, 2, 1], "mask_rle": [[1, 1, 0, 2], [2, 1, 0, 1]]},
        {"label": "bed", "confidence": 0.7, "bbox": [5, 5, 5, 5], "mask_rle": [[5, 5, 0, 3]]}
    ]})";
    auto dets = parse_segments(payload, 4);
    ASSERT_EQ(dets.size(), 2u);
    EXPECT_EQ(dets[0].mask.size(), 3u);
    EXPECT_EQ(dets[1].frame, 4);
    EXPECT_FALSE(dets[0].source_object);
    // round trip through the encoder
    EXPECT_EQ(parse_segments(segments_to_json(dets).dump(), 4), dets);
}

TEST(Segments, EmptyAndMalformed) {
    EXPECT_TRUE(parse_segments("", 0).empty());
    EXPECT_TRUE(parse_segments(R"({"segments": []})", 0).empty());
    EXPECT_THROW(parse_segments(R"({"segments": [{"label": "chair", "confid)", 0), ProtocolError);
    EXPECT_THROW(parse_segments(R"({"segments": [{"label": "chair"}]})", 0), ProtocolError);
    EXPECT_THROW(parse_segments(R"([{"label": "a", "confidence": 2, "bbox": [0,0,0,0], "mask_rle": [[0,0,0,1]]}])", 0),
                 ProtocolError);
    EXPECT_THROW(parse_segments(R"([{"label": "a", "confidence": 0.5, "bbox": [0,0,0,0], "mask_rle": [[3,3,0,1]]}])", 0),
                 ProtocolError);
}

TEST(Segments, RemoteDetectorThroughGateway) {
    Fixture f;
    const auto truth = detect(f.obs, f.scene, {});
    std::string seen_request;
    auto transport = std::make_unique<FunctionTransport>([&](const std::string& req) {
        seen_request = req;
        return segments_to_json(truth).dump();
    });
    Gateway gw({}, std::move(transport));
    auto dets = detect_remote(gw, frame_descriptor(f.obs));
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].label, "chair");
    EXPECT_EQ(dets[0].mask, truth[0].mask);
    EXPECT_FALSE(dets[0].source_object);
    EXPECT_NE(seen_request.find("\"step\""), std::string::npos);

    Gateway broken({}, std::make_unique<FunctionTransport>([](const std::string&) { return std::string("{\"segm"); }));
    EXPECT_THROW(detect_remote(broken, frame_descriptor(f.obs)), ProtocolError);
}

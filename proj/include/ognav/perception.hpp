#pragma once

#include "ognav/geometry.hpp"
#include "ognav/world.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ognav {

class CompletionBackend;

// One segment: label, confidence, box and voxel mask for a single frame.
struct Detection {
    std::string label;
    double confidence = 1.0;
    CellRect bbox;
    VoxelSet mask;
    int frame = 0;
    // Ground-truth instance. Never shown to the planner; oracles and tests only.
    std::optional<int> source_object;

    Point3 mask_centroid() const { return centroid(mask); }
    bool operator==(const Detection&) const = default;
};

struct DetectorConfig {
    double miss_rate = 0.0;
    // Mean number of false detections per frame.
    double false_positive_rate = 0.0;
    // label -> (confused label, probability)
    std::map<std::string, std::pair<std::string, double>> label_confusion;
    // When set, false detections carry this label.
    std::optional<std::string> primed_label;
    std::uint64_t seed = 0;
    // Labels drawn for unprimed false detections. Empty means the built-in household list.
    std::vector<std::string> false_positive_vocabulary;
    // Detections below this confidence are dropped; 0 accepts everything.
    double min_confidence = 0.0;
};

const std::vector<std::string>& default_false_positive_vocabulary();

// Simulated tag-ground-segment stage. Pure function of (obs, scene, cfg).
std::vector<Detection> detect(const Observation& obs, const GridScene& scene, const DetectorConfig& cfg);

// Wire format of a remote segmenter:
//   {"segments": [{"label": str, "confidence": num, "bbox": [x0,y0,x1,y1],
//                  "mask_rle": [[x, y, z_start, run], ...]}, ...]}
// An empty body or "[]"-equivalent segment list yields no detections.
std::vector<Detection> parse_segments(std::string_view payload, int frame);
nlohmann::json segments_to_json(const std::vector<Detection>& detections);

// Frame descriptor sent to the remote segmenter: step, pose and visible cells.
nlohmann::json frame_descriptor(const Observation& obs);

// Sends the descriptor through a completion backend and parses the reply.
// BackendFailure propagates (retryable); malformed replies raise ProtocolError.
std::vector<Detection> detect_remote(CompletionBackend& backend, const nlohmann::json& descriptor);

}  // namespace ognav

#include "ognav/perception.hpp"
#include "ognav/errors.hpp"
#include "ognav/llmgw.hpp"
#include "ognav/rng.hpp"

namespace ognav {

using nlohmann::json;

const std::vector<std::string>& default_false_positive_vocabulary() {
    static const std::vector<std::string> vocab = {
        "chair", "table", "couch", "bed", "cabinet", "pillow", "book", "pen", "apple", "orange",
        "cup", "bottle", "plant", "lamp", "shoe", "bowl", "towel", "remote", "soda can", "vase",
    };
    return vocab;
}

std::vector<Detection> detect(const Observation& obs, const GridScene& scene, const DetectorConfig& cfg) {
    const auto step = static_cast<std::uint64_t>(obs.step);
    // Independent streams so priming and false positives never perturb true detections.
    Rng miss_rng{cfg.seed, step, 1};
    Rng conf_rng{cfg.seed, step, 2};
    Rng confuse_rng{cfg.seed, step, 3};
    Rng fp_rng{cfg.seed, step, 4};

    std::vector<Detection> out;
    for (const auto& vo : obs.visible_objects) {
        const bool missed = miss_rng.bernoulli(cfg.miss_rate);
        const double confidence = conf_rng.uniform(0.6, 1.0);
        const double confuse_draw = confuse_rng.uniform();
        if (missed) continue;
        const ObjectInstance* obj = scene.object(vo.object_id);
        if (!obj) continue;
        Detection d;
        d.label = obj->label;
        if (auto it = cfg.label_confusion.find(obj->label);
            it != cfg.label_confusion.end() && confuse_draw < it->second.second)
            d.label = it->second.first;
        d.confidence = confidence;
        d.mask = vo.voxels;
        d.bbox = bounding_rect(d.mask);
        d.frame = obs.step;
        d.source_object = vo.object_id;
        out.push_back(std::move(d));
    }

    std::vector<Cell> candidates;
    for (const auto& vc : obs.visible_cells)
        if (!scene.is_wall(vc.cell)) candidates.push_back(vc.cell);
    const auto& vocab =
        cfg.false_positive_vocabulary.empty() ? default_false_positive_vocabulary() : cfg.false_positive_vocabulary;
    const int n_false = candidates.empty() ? 0 : fp_rng.poisson(cfg.false_positive_rate);
    for (int i = 0; i < n_false; ++i) {
        const Cell c = candidates[fp_rng.below(candidates.size())];
        const int z = static_cast<int>(fp_rng.below(3));
        const std::string& random_label = vocab[fp_rng.below(vocab.size())];
        Detection d;
        d.label = cfg.primed_label ? *cfg.primed_label : random_label;
        d.confidence = fp_rng.uniform(0.3, 0.8);
        d.mask = {{c.x, c.y, z}};
        d.bbox = bounding_rect(d.mask);
        d.frame = obs.step;
        out.push_back(std::move(d));
    }

    if (cfg.min_confidence > 0)
        std::erase_if(out, [&](const Detection& d) { return d.confidence < cfg.min_confidence; });
    return out;
}

std::vector<Detection> parse_segments(std::string_view payload, int frame) {
    if (trim(payload).empty()) return {};
    json doc;
    try {
        doc = json::parse(payload);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("segment payload is not valid JSON: ") + e.what());
    }
    const json* list = &doc;
    if (doc.is_object()) {
        auto it = doc.find("segments");
        if (it == doc.end()) throw ProtocolError("segment payload lacks 'segments'");
        list = &*it;
    }
    if (!list->is_array()) throw ProtocolError("'segments' is not an array");

    std::vector<Detection> out;
    try {
        for (const auto& seg : *list) {
            Detection d;
            d.frame = frame;
            d.label = seg.at("label").get<std::string>();
            d.confidence = seg.at("confidence").get<double>();
            if (d.confidence < 0 || d.confidence > 1) throw ProtocolError("confidence out of [0,1]");
            const auto& b = seg.at("bbox");
            if (!b.is_array() || b.size() != 4) throw ProtocolError("bbox must have 4 entries");
            d.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
            for (const auto& run : seg.at("mask_rle")) {
                if (!run.is_array() || run.size() != 4) throw ProtocolError("mask run must be [x,y,z,len]");
                const int x = run[0].get<int>(), y = run[1].get<int>(), z0 = run[2].get<int>();
                const int len = run[3].get<int>();
                if (len <= 0) throw ProtocolError("mask run length must be positive");
                for (int z = z0; z < z0 + len; ++z) d.mask.insert({x, y, z});
            }
            if (d.mask.empty()) throw ProtocolError("segment mask is empty");
            for (const auto& v : d.mask)
                if (!d.bbox.contains({v.x, v.y})) throw ProtocolError("mask escapes its bbox");
            out.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed segment: ") + e.what());
    }
    return out;
}

json segments_to_json(const std::vector<Detection>& detections) {
    json segs = json::array();
    for (const auto& d : detections) {
        json runs = json::array();
        // columns of consecutive z become one run
        auto it = d.mask.begin();
        while (it != d.mask.end()) {
            const Voxel start = *it;
            int len = 1;
            auto next = std::next(it);
            while (next != d.mask.end() && next->x == start.x && next->y == start.y && next->z == start.z + len) {
                ++len;
                ++next;
            }
            runs.push_back({start.x, start.y, start.z, len});
            it = next;
        }
        segs.push_back({{"label", d.label},
                        {"confidence", d.confidence},
                        {"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}},
                        {"mask_rle", runs}});
    }
    return {{"segments", segs}};
}

json frame_descriptor(const Observation& obs) {
    json cells = json::array();
    for (const auto& vc : obs.visible_cells) cells.push_back({vc.cell.x, vc.cell.y, vc.range, vc.occupied});
    return {{"step", obs.step},
            {"pose", {{"x", obs.pose.cell.x}, {"y", obs.pose.cell.y}, {"heading", std::string(1, heading_char(obs.pose.heading))}}},
            {"visible_cells", cells}};
}

std::vector<Detection> detect_remote(CompletionBackend& backend, const json& descriptor) {
    const std::string reply = backend.complete(to_string(PromptRole::detector), descriptor.dump());
    return parse_segments(reply, descriptor.value("step", 0));
}

}  // namespace ognav

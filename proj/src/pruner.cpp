#include "ognav/pruner.hpp"
#include "ognav/errors.hpp"

#include <algorithm>

namespace ognav {

void SynonymMap::add(const std::string& alias, const std::string& canonical) { canonical_[alias] = canonical; }

std::string SynonymMap::canonical(const std::string& label) const {
    auto it = canonical_.find(label);
    return it == canonical_.end() ? label : it->second;
}

bool AnchorConfig::is_anchor(const std::string& label) const {
    return anchor_labels.count(label) || anchor_labels.count(synonyms.canonical(label));
}

std::vector<std::string> AnchorPruneBackend::select(const PruneRequest& req) {
    std::vector<std::string> out;
    for (const auto& l : req.input_labels)
        if (cfg_.is_anchor(l)) out.push_back(l);
    return out;
}

std::string format_label_list(const std::vector<std::string>& labels) {
    std::string s = "[";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) s += ", ";
        s += labels[i];
    }
    return s + "]";
}

std::string LlmPruneBackend::render_request(const PruneRequest& req) const {
    std::string exemplars;
    for (const auto& ex : req.exemplars)
        exemplars += "Input: " + format_label_list(ex.input) + "\nOutput: " + format_label_list(ex.output) + "\n";
    return render(tmpl_, {{"exemplars", exemplars}, {"labels", format_label_list(req.input_labels)}});
}

std::vector<std::string> LlmPruneBackend::select(const PruneRequest& req) {
    return parse_label_list(backend_->complete(to_string(PromptRole::pruner), render_request(req)));
}

PruneOutcome Pruner::prune(const PruneRequest& req) const {
    PruneRequest clean = req;
    clean.input_labels.clear();
    for (const auto& l : req.input_labels)
        if (std::find(clean.input_labels.begin(), clean.input_labels.end(), l) == clean.input_labels.end())
            clean.input_labels.push_back(l);

    PruneOutcome outcome;
    if (clean.input_labels.empty()) return outcome;

    std::vector<std::string> answer;
    try {
        answer = backend_->select(clean);
    } catch (const Error&) {
        outcome.kept = clean.input_labels;
        outcome.degraded = true;
        return outcome;
    }
    const std::set<std::string> chosen(answer.begin(), answer.end());
    for (const auto& l : clean.input_labels)
        if (chosen.count(l)) outcome.kept.push_back(l);
    for (const auto& a : chosen)
        if (std::find(clean.input_labels.begin(), clean.input_labels.end(), a) == clean.input_labels.end())
            outcome.rejected.push_back(a);
    return outcome;
}

bool should_bypass(const Detection& det, const DensityContext& ctx) {
    if (!ctx.target_label.empty() && det.label == ctx.target_label) return true;
    if (det.mask.empty()) return false;
    const Point3 c = det.mask_centroid();
    for (const auto& cand : ctx.candidate_centroids)
        if (planar_distance(c, cand) <= ctx.r_dense + 1e-9) return true;
    return false;
}

}  // namespace ognav

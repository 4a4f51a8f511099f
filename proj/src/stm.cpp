#include "ognav/stm.hpp"
#include "ognav/errors.hpp"

namespace ognav {

bool OracleVerifier::confirm(const Detection& candidate, const StmFrame&, const std::string& target) {
    bool truth = false;
    if (candidate.source_object)
        if (auto label = label_of_(*candidate.source_object)) truth = (*label == target);
    return rng_.bernoulli(error_rate_) ? !truth : truth;
}

bool LvlmVerifier::confirm(const Detection& candidate, const StmFrame& view, const std::string& target) {
    // locate the matching segment in this view for the crop descriptor
    const Detection* seg = nullptr;
    double best = -1;
    for (const auto& d : view.detections) {
        const double ov = overlap(candidate.mask, d.mask);
        if (ov > best) {
            best = ov;
            seg = &d;
        }
    }
    const CellRect& b = seg ? seg->bbox : candidate.bbox;
    const std::string request = render(
        tmpl_, {{"target", target},
                {"view", "frame " + std::to_string(view.step) + " from (" + std::to_string(view.pose.cell.x) + "," +
                             std::to_string(view.pose.cell.y) + ") facing " + heading_char(view.pose.heading) +
                             ", segment box [" + std::to_string(b.x0) + "," + std::to_string(b.y0) + "," +
                             std::to_string(b.x1) + "," + std::to_string(b.y1) + "] labelled " +
                             (seg ? seg->label : candidate.label)}});
    try {
        return parse_yes_no(backend_->complete(to_string(PromptRole::verify), request));
    } catch (const ProtocolError& e) {
        throw BackendFailure(e.what());
    }
}

std::size_t ShortTermMemory::record(StmFrame frame) {
    if (phase_ != Phase::explore_obj) throw PhaseError("short-term memory records only while exploring an object");
    frames_.push_back(std::move(frame));
    return frames_.size();
}

std::vector<const StmFrame*> ShortTermMemory::retrieve_views(const Detection& candidate, double tau) const {
    std::vector<const StmFrame*> out;
    if (candidate.mask.empty()) return out;
    for (const auto& f : frames_) {
        for (const auto& d : f.detections) {
            if (!d.mask.empty() && overlap(candidate.mask, d.mask) >= tau) {
                out.push_back(&f);
                break;
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const StmFrame* a, const StmFrame* b) { return a->step < b->step; });
    return out;
}

VerificationResult ShortTermMemory::verify(const Detection& candidate, const std::vector<const StmFrame*>& views,
                                           ViewVerifier& verifier, const std::string& target) const {
    VerificationResult r;
    r.candidate = candidate;
    int answered = 0, confirms = 0;
    for (const StmFrame* v : views) {
        ViewCheck check{v->step, false, false};
        try {
            check.confirm = verifier.confirm(candidate, *v, target);
            ++answered;
            if (check.confirm) ++confirms;
        } catch (const Error&) {
            check.failed = true;
        }
        r.views.push_back(check);
    }
    r.confirm_fraction = answered ? static_cast<double>(confirms) / answered : 0.0;
    r.verdict = answered > 0 && r.confirm_fraction >= cfg_.verdict_threshold;
    return r;
}

PhaseOutcome ShortTermMemory::conclude(const std::vector<VerificationResult>& results, int node_id, SceneGraph* graph) {
    for (const auto& r : results)
        if (r.verdict) return PhaseOutcome::found;
    if (graph && node_id >= 0 && graph->find(node_id)) graph->mark_explored(node_id);
    frames_.clear();
    return PhaseOutcome::rejected;
}

}  // namespace ognav

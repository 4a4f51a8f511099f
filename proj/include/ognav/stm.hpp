#pragma once

#include "ognav/caption.hpp"
#include "ognav/llmgw.hpp"
#include "ognav/perception.hpp"
#include "ognav/rng.hpp"
#include "ognav/scenegraph.hpp"
#include "ognav/world.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ognav {

struct StmFrame {
    int step = 0;
    Pose pose;
    std::vector<Detection> detections;
    std::map<int, int> node_attribution;  // detection index -> node id
};

struct ViewCheck {
    int frame_step = 0;
    bool confirm = false;
    bool failed = false;  // backend error; excluded from the fraction
};

struct VerificationResult {
    Detection candidate;
    std::vector<ViewCheck> views;
    double confirm_fraction = 0;
    bool verdict = false;
};

class ViewVerifier {
public:
    virtual ~ViewVerifier() = default;
    // Does `view` show `candidate` as the target? Throws BackendFailure on failure.
    virtual bool confirm(const Detection& candidate, const StmFrame& view, const std::string& target) = 0;
};

// Truth from the candidate's source instance, flipped with probability error_rate.
class OracleVerifier : public ViewVerifier {
public:
    using LabelOf = std::function<std::optional<std::string>(int object_id)>;
    OracleVerifier(LabelOf label_of, double error_rate, std::uint64_t seed)
        : label_of_(std::move(label_of)), error_rate_(error_rate), rng_(seed) {}
    bool confirm(const Detection& candidate, const StmFrame& view, const std::string& target) override;

private:
    LabelOf label_of_;
    double error_rate_;
    Rng rng_;
};

class LvlmVerifier : public ViewVerifier {
public:
    LvlmVerifier(std::shared_ptr<CompletionBackend> backend, PromptTemplate tmpl)
        : backend_(std::move(backend)), tmpl_(std::move(tmpl)) {}
    bool confirm(const Detection& candidate, const StmFrame& view, const std::string& target) override;

private:
    std::shared_ptr<CompletionBackend> backend_;
    PromptTemplate tmpl_;
};

enum class PhaseOutcome { found, rejected };

struct StmConfig {
    double retrieval_overlap = 0.2;
    double verdict_threshold = 0.5;
};

// Frame buffer that exists only while the agent travels to a chosen node.
class ShortTermMemory {
public:
    explicit ShortTermMemory(StmConfig cfg = {}) : cfg_(cfg) {}

    void set_phase(Phase p) { phase_ = p; }
    Phase phase() const { return phase_; }

    // PhaseError outside explore_obj.
    std::size_t record(StmFrame frame);
    std::size_t size() const { return frames_.size(); }
    const std::vector<StmFrame>& frames() const { return frames_; }
    void clear() { frames_.clear(); }

    // Frames holding a detection overlapping the candidate by at least tau, ordered by step.
    std::vector<const StmFrame*> retrieve_views(const Detection& candidate, double tau) const;
    std::vector<const StmFrame*> retrieve_views(const Detection& candidate) const {
        return retrieve_views(candidate, cfg_.retrieval_overlap);
    }

    VerificationResult verify(const Detection& candidate, const std::vector<const StmFrame*>& views,
                              ViewVerifier& verifier, const std::string& target) const;

    // Found if any verdict holds; otherwise the node is marked explored and the buffer cleared.
    PhaseOutcome conclude(const std::vector<VerificationResult>& results, int node_id, SceneGraph* graph);

    const StmConfig& config() const { return cfg_; }

private:
    StmConfig cfg_;
    Phase phase_ = Phase::explore_scene;
    std::vector<StmFrame> frames_;
};

}  // namespace ognav

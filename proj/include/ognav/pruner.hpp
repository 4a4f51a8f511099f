#pragma once

#include "ognav/geometry.hpp"
#include "ognav/llmgw.hpp"
#include "ognav/perception.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace ognav {

// Maps alternative names onto one canonical label ("sofa" -> "couch").
class SynonymMap {
public:
    void add(const std::string& alias, const std::string& canonical);
    std::string canonical(const std::string& label) const;
    bool equivalent(const std::string& a, const std::string& b) const { return canonical(a) == canonical(b); }
    bool empty() const { return canonical_.empty(); }

private:
    std::map<std::string, std::string> canonical_;
};

struct AnchorConfig {
    std::set<std::string> anchor_labels;
    SynonymMap synonyms;

    bool is_anchor(const std::string& label) const;
};

struct PruneExemplar {
    std::vector<std::string> input;
    std::vector<std::string> output;  // subset of input
};

struct PruneRequest {
    std::vector<std::string> input_labels;
    std::vector<PruneExemplar> exemplars;
};

class PruneBackend {
public:
    virtual ~PruneBackend() = default;
    // May return anything, including labels not in the request; Pruner sanitizes.
    virtual std::vector<std::string> select(const PruneRequest& req) = 0;
};

// Keeps furniture/receptacle categories.
class AnchorPruneBackend : public PruneBackend {
public:
    explicit AnchorPruneBackend(AnchorConfig cfg) : cfg_(std::move(cfg)) {}
    std::vector<std::string> select(const PruneRequest& req) override;

private:
    AnchorConfig cfg_;
};

// Keeps everything; the no-pruner ablation.
class IdentityPruneBackend : public PruneBackend {
public:
    std::vector<std::string> select(const PruneRequest& req) override { return req.input_labels; }
};

// In-context prompt to a language model; expects a bracketed list back.
class LlmPruneBackend : public PruneBackend {
public:
    LlmPruneBackend(std::shared_ptr<CompletionBackend> backend, PromptTemplate tmpl)
        : backend_(std::move(backend)), tmpl_(std::move(tmpl)) {}
    std::vector<std::string> select(const PruneRequest& req) override;
    std::string render_request(const PruneRequest& req) const;

private:
    std::shared_ptr<CompletionBackend> backend_;
    PromptTemplate tmpl_;
};

struct PruneOutcome {
    std::vector<std::string> kept;      // subset of the request, in request order
    std::vector<std::string> rejected;  // backend answers that were not in the request
    bool degraded = false;              // backend failed, nothing was pruned
};

class Pruner {
public:
    explicit Pruner(std::shared_ptr<PruneBackend> backend) : backend_(std::move(backend)) {}
    PruneOutcome prune(const PruneRequest& req) const;

private:
    std::shared_ptr<PruneBackend> backend_;
};

struct DensityContext {
    std::vector<Point3> candidate_centroids;
    double r_dense = 6.0;
    std::string target_label;
};

// Detections near a target candidate (or labelled as the target) skip pruning.
bool should_bypass(const Detection& det, const DensityContext& ctx);

std::string format_label_list(const std::vector<std::string>& labels);

}  // namespace ognav

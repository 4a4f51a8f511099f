#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ognav {

struct ModelEndpoint {
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4";
    // Name of the environment variable holding the bearer token; empty for none.
    std::string token_env = "OPENAI_API_KEY";
    double timeout_s = 30.0;
    int max_retries = 2;
    double temperature = 0.0;
};

enum class PromptRole { pruner, planner, caption, verify, label_resolve, detector };
const char* to_string(PromptRole role);
PromptRole prompt_role_from_string(std::string_view s);

// Template text with {name} placeholders. `grammar` documents the answer shape.
struct PromptTemplate {
    PromptRole role = PromptRole::planner;
    std::string text;
    std::string grammar;

    std::set<std::string> placeholders() const;
    // File layout: optional "grammar: ..." header line, a line "---", then the body.
    static PromptTemplate parse(PromptRole role, std::string_view file_text);
    static PromptTemplate load(PromptRole role, const std::filesystem::path& path);
};

// Substitutes every placeholder; TemplateError if any is unbound.
std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings);

struct TranscriptEntry {
    std::string role;
    std::string request;
    std::string response;
    double latency_ms = 0;
    bool failed = false;
};

// Append-only log of remote interactions; one entry per complete() call.
class Transcript {
public:
    Transcript() = default;
    Transcript(const Transcript& o) : entries_(o.entries()) {}
    Transcript& operator=(const Transcript& o) {
        if (this != &o) {
            auto copy = o.entries();
            std::lock_guard lk(mu_);
            entries_ = std::move(copy);
        }
        return *this;
    }
    void append(TranscriptEntry e);
    std::vector<TranscriptEntry> entries() const;
    std::size_t size() const;
    void save(const std::filesystem::path& path) const;  // JSON lines
    static Transcript load(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::vector<TranscriptEntry> entries_;
};

// Raised by transports; never escapes a Gateway.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string send(const ModelEndpoint& ep, const std::string& request) = 0;
};

// Chat-completion request over HTTP:
//   POST {path} {"model", "temperature", "messages": [{"role": "user", "content": request}]}
//   reply: {"choices": [{"message": {"content": ...}}]}
class HttpTransport : public Transport {
public:
    std::string send(const ModelEndpoint& ep, const std::string& request) override;
};

// In-process transport; handy for mocks and offline runs.
class FunctionTransport : public Transport {
public:
    explicit FunctionTransport(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
    std::string send(const ModelEndpoint&, const std::string& request) override { return fn_(request); }

private:
    std::function<std::string(const std::string&)> fn_;
};

// What the pipeline modules call. Throws BackendFailure only.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(std::string_view role, const std::string& request) = 0;
};

// Retry/timeout policy plus transcript logging over a transport.
class Gateway : public CompletionBackend {
public:
    Gateway(ModelEndpoint ep, std::unique_ptr<Transport> transport, std::shared_ptr<Transcript> transcript = nullptr);

    std::string complete(std::string_view role, const std::string& request) override;
    const ModelEndpoint& endpoint() const { return ep_; }
    std::shared_ptr<Transcript> transcript() const { return transcript_; }

private:
    ModelEndpoint ep_;
    std::unique_ptr<Transport> transport_;
    std::shared_ptr<Transcript> transcript_;
    std::mutex mu_;
};

// Serves recorded responses in order; a request that differs from the
// recording raises ProtocolError (the replay has diverged).
class ReplayBackend : public CompletionBackend {
public:
    explicit ReplayBackend(std::vector<TranscriptEntry> entries) : entries_(std::move(entries)) {}
    std::string complete(std::string_view role, const std::string& request) override;
    std::size_t consumed() const { return next_; }

private:
    std::vector<TranscriptEntry> entries_;
    std::size_t next_ = 0;
};

// Answer grammars.
// Bracketed, comma separated list; items may be quoted: [chair, "kitchen table"].
std::vector<std::string> parse_label_list(std::string_view reply);
// Leading yes/no (case-insensitive, punctuation ignored).
bool parse_yes_no(std::string_view reply);
// First non-empty line, trimmed; ProtocolError if empty.
std::string parse_free_text(std::string_view reply);

std::string trim(std::string_view s);

}  // namespace ognav

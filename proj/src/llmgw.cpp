#include "ognav/llmgw.hpp"
#include "ognav/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ognav {

using nlohmann::json;

const char* to_string(PromptRole role) {
    switch (role) {
        case PromptRole::pruner: return "pruner";
        case PromptRole::planner: return "planner";
        case PromptRole::caption: return "caption";
        case PromptRole::verify: return "verify";
        case PromptRole::label_resolve: return "label_resolve";
        case PromptRole::detector: return "detector";
    }
    return "?";
}

PromptRole prompt_role_from_string(std::string_view s) {
    for (PromptRole r : {PromptRole::pruner, PromptRole::planner, PromptRole::caption, PromptRole::verify,
                         PromptRole::label_resolve, PromptRole::detector})
        if (s == to_string(r)) return r;
    throw ParseError("unknown prompt role '" + std::string(s) + "'");
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// --- templates ---

std::set<std::string> PromptTemplate::placeholders() const {
    std::set<std::string> names;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        const auto close = text.find('}', i + 1);
        if (close == std::string::npos) break;
        const std::string name = text.substr(i + 1, close - i - 1);
        if (!name.empty() && std::all_of(name.begin(), name.end(), [](char c) { return std::isalnum((unsigned char)c) || c == '_'; }))
            names.insert(name);
        i = close;
    }
    return names;
}

PromptTemplate PromptTemplate::parse(PromptRole role, std::string_view file_text) {
    PromptTemplate t;
    t.role = role;
    const auto sep = file_text.find("\n---\n");
    if (sep == std::string_view::npos) {
        t.text = std::string(file_text);
        return t;
    }
    std::istringstream head{std::string(file_text.substr(0, sep))};
    std::string line;
    while (std::getline(head, line))
        if (line.rfind("grammar:", 0) == 0) t.grammar = trim(line.substr(8));
    t.text = std::string(file_text.substr(sep + 5));
    return t;
}

PromptTemplate PromptTemplate::load(PromptRole role, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(role, ss.str());
}

std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings) {
    for (const auto& name : tmpl.placeholders())
        if (!bindings.count(name))
            throw TemplateError(std::string(to_string(tmpl.role)) + " template: unbound placeholder {" + name + "}");
    std::string out;
    const std::string& t = tmpl.text;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '{') {
            const auto close = t.find('}', i + 1);
            if (close != std::string::npos) {
                auto it = bindings.find(t.substr(i + 1, close - i - 1));
                if (it != bindings.end()) {
                    out += it->second;
                    i = close;
                    continue;
                }
            }
        }
        out += t[i];
    }
    return out;
}

// --- transcript ---

void Transcript::append(TranscriptEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
}

std::vector<TranscriptEntry> Transcript::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::size_t Transcript::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

void Transcript::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write transcript " + path.string());
    for (const auto& e : entries())
        out << json{{"role", e.role}, {"request", e.request}, {"response", e.response},
                    {"latency_ms", e.latency_ms}, {"failed", e.failed}}
                   .dump()
            << '\n';
}

Transcript Transcript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open transcript " + path.string());
    Transcript t;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            t.append({j.at("role"), j.at("request"), j.at("response"), j.value("latency_ms", 0.0),
                      j.value("failed", false)});
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad transcript line: ") + e.what());
        }
    }
    return t;
}

// --- transports ---

std::string HttpTransport::send(const ModelEndpoint& ep, const std::string& request) {
    httplib::Client cli(ep.base_url);
    const auto secs = static_cast<time_t>(ep.timeout_s);
    const auto usecs = static_cast<time_t>((ep.timeout_s - double(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!ep.token_env.empty())
        if (const char* tok = std::getenv(ep.token_env.c_str()); tok && *tok)
            headers.emplace("Authorization", std::string("Bearer ") + tok);

    const json body{{"model", ep.model},
                    {"temperature", ep.temperature},
                    {"messages", json::array({{{"role", "user"}, {"content", request}}})}};
    auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("transport: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("http status " + std::to_string(res->status));
    try {
        const auto reply = json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("unreadable completion body: ") + e.what());
    }
}

// --- gateway ---

Gateway::Gateway(ModelEndpoint ep, std::unique_ptr<Transport> transport, std::shared_ptr<Transcript> transcript)
    : ep_(std::move(ep)), transport_(std::move(transport)), transcript_(std::move(transcript)) {
    if (ep_.timeout_s <= 0) throw std::invalid_argument("endpoint timeout must be positive");
    if (ep_.max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
}

std::string Gateway::complete(std::string_view role, const std::string& request) {
    std::lock_guard lock(mu_);
    const auto t0 = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 0; attempt <= ep_.max_retries; ++attempt) {
        try {
            std::string reply = transport_->send(ep_, request);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            if (transcript_) transcript_->append({std::string(role), request, reply, ms, false});
            return reply;
        } catch (const std::exception& e) {
            // transport-level or anything unexpected from the transport: retry
            last_error = e.what();
        }
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (transcript_) transcript_->append({std::string(role), request, "", ms, true});
    throw BackendFailure(std::string(role) + " backend failed after " + std::to_string(ep_.max_retries + 1) +
                         " attempts: " + last_error);
}

std::string ReplayBackend::complete(std::string_view role, const std::string& request) {
    if (next_ >= entries_.size()) throw ProtocolError("replay exhausted");
    const auto& e = entries_[next_++];
    if (e.role != role || e.request != request)
        throw ProtocolError("replay diverged at entry " + std::to_string(next_ - 1));
    if (e.failed) throw BackendFailure("recorded backend failure");
    return e.response;
}

// --- grammars ---

std::vector<std::string> parse_label_list(std::string_view reply) {
    const auto open = reply.find('[');
    const auto close = reply.find(']', open == std::string_view::npos ? 0 : open);
    if (open == std::string_view::npos || close == std::string_view::npos)
        throw ProtocolError("expected a bracketed list");
    const std::string_view body = reply.substr(open + 1, close - open - 1);
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    auto flush = [&] {
        std::string item = trim(cur);
        if (item.size() >= 2 && (item.front() == '\'' || item.front() == '"') && item.back() == item.front())
            item = item.substr(1, item.size() - 2);
        if (!item.empty()) out.push_back(item);
        cur.clear();
    };
    for (char c : body) {
        if (c == '"') quoted = !quoted;
        if (c == ',' && !quoted) {
            flush();
        } else {
            cur += c;
        }
    }
    flush();
    return out;
}

bool parse_yes_no(std::string_view reply) {
    std::string word;
    for (char c : reply) {
        if (std::isalpha((unsigned char)c)) {
            word += static_cast<char>(std::tolower((unsigned char)c));
        } else if (!word.empty()) {
            break;
        }
    }
    if (word == "yes") return true;
    if (word == "no") return false;
    throw ProtocolError("expected yes/no, got '" + trim(reply) + "'");
}

std::string parse_free_text(std::string_view reply) {
    std::istringstream in{std::string(reply)};
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (!t.empty()) return t;
    }
    throw ProtocolError("empty reply");
}

}  // namespace ognav

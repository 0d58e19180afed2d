#include "clausekit/llm.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <regex>
#include <thread>

namespace clausekit::llm {
namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

std::optional<ParsedUrl> parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[A-Za-z0-9.\-\[\]:]+?(?::\d+)?)(/[^?#]*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) return std::nullopt;
    ParsedUrl p{m[1].str(), m[2].matched ? m[2].str() : ""};
    while (!p.prefix.empty() && p.prefix.back() == '/') p.prefix.pop_back();
    return p;
}

std::vector<std::pair<std::string, std::string>> auth_headers(const ProviderProfile& profile) {
    std::vector<std::pair<std::string, std::string>> h;
    if (auto token = resolve_token(profile)) h.emplace_back("Authorization", "Bearer " + *token);
    return h;
}

nlohmann::json parse_body(const HttpExchange& ex, std::string_view stage) {
    try {
        return nlohmann::json::parse(ex.body);
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::upstream, std::string(stage), "provider returned a non-JSON body");
    }
}

}  // namespace

void ProviderProfile::validate() const {
    if (!parse_url(base_url)) throw Error(ErrorCode::config, "provider", "malformed base_url '" + base_url + "'");
    if (!(timeout_s > 0)) throw Error(ErrorCode::config, "provider", "timeout must be positive");
    if (max_retries < 0) throw Error(ErrorCode::config, "provider", "max_retries must be >= 0");
}

std::optional<std::string> resolve_token(const ProviderProfile& profile) {
    if (profile.auth_token_env_var.empty()) return std::nullopt;
    const char* v = std::getenv(profile.auth_token_env_var.c_str());
    if (v == nullptr || *v == '\0')
        throw Error(ErrorCode::auth, "provider", "environment variable " + profile.auth_token_env_var + " is not set");
    return std::string(v);
}

Transport default_transport() {
    return [](const ProviderProfile& profile, const std::string& path, const std::string& body,
              const std::vector<std::pair<std::string, std::string>>& headers) {
        HttpExchange ex;
        const auto url = parse_url(profile.base_url);
        if (!url) {
            ex.transport_error = "malformed base_url";
            return ex;
        }
        httplib::Client cli(url->origin);
        const auto secs = static_cast<time_t>(profile.timeout_s);
        const auto usecs = static_cast<time_t>((profile.timeout_s - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = cli.Post(url->prefix + path, h, body, "application/json");
        if (!res) {
            ex.timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout;
            ex.transport_error = httplib::to_string(res.error());
            return ex;
        }
        ex.status = res->status;
        ex.body = res->body;
        return ex;
    };
}

HttpExchange post_with_retries(const ProviderProfile& profile, const Transport& transport, const std::string& path,
                               const std::string& body, std::string_view stage) {
    const auto headers = auth_headers(profile);  // AuthError before any network activity
    const std::string st(stage);
    std::string last_problem;
    bool last_timeout = false;
    for (int attempt = 0; attempt <= profile.max_retries; ++attempt) {
        if (attempt > 0 && profile.backoff_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(profile.backoff_ms << (attempt - 1)));
        HttpExchange ex = transport(profile, path, body, headers);
        if (ex.status == 0) {
            last_timeout = ex.timed_out;
            last_problem = ex.transport_error.empty() ? "transport failure" : ex.transport_error;
            continue;
        }
        if (ex.status >= 200 && ex.status < 300) return ex;
        if (ex.status == 401 || ex.status == 403)
            throw Error(ErrorCode::auth, st, "provider rejected credentials (HTTP " + std::to_string(ex.status) + ")");
        if (ex.status == 408 || ex.status == 429 || ex.status >= 500) {
            last_timeout = ex.status == 408;
            last_problem = "HTTP " + std::to_string(ex.status);
            continue;
        }
        throw Error(ErrorCode::upstream, st, "HTTP " + std::to_string(ex.status) + ": " + ex.body.substr(0, 300));
    }
    throw Error(last_timeout ? ErrorCode::timeout : ErrorCode::upstream, st,
                "giving up after " + std::to_string(profile.max_retries + 1) + " attempts: " + last_problem);
}

HttpChatClient::HttpChatClient(ProviderProfile profile, Transport transport)
    : profile_(std::move(profile)), transport_(std::move(transport)) {
    profile_.validate();
}

ChatResponse HttpChatClient::do_complete(const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = profile_.model_id;
    body["temperature"] = request.temperature;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const auto ex = post_with_retries(profile_, transport_, "/chat/completions", body.dump(), "chat");
    const auto j = parse_body(ex, "chat");
    ChatResponse resp;
    try {
        resp.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::upstream, "chat", "response has no choices[0].message.content");
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_integer()) resp.prompt_tokens = u["prompt_tokens"].get<int>();
        if (u.contains("completion_tokens") && u["completion_tokens"].is_number_integer())
            resp.completion_tokens = u["completion_tokens"].get<int>();
    }
    return resp;
}

HttpEmbedder::HttpEmbedder(ProviderProfile profile, std::size_t dim, Transport transport)
    : profile_(std::move(profile)), dim_(dim), transport_(std::move(transport)) {
    profile_.validate();
    if (dim_ == 0) throw Error(ErrorCode::config, "embed", "embedding dimension must be positive");
}

std::vector<std::vector<float>> HttpEmbedder::embed(std::span<const std::string> texts) {
    std::vector<std::vector<float>> out(texts.size());
    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < texts.size(); start += kBatch) {
        const std::size_t end = std::min(texts.size(), start + kBatch);
        nlohmann::json body;
        body["model"] = profile_.model_id;
        body["input"] = std::vector<std::string>(texts.begin() + static_cast<long>(start), texts.begin() + static_cast<long>(end));
        const auto ex = post_with_retries(profile_, transport_, "/embeddings", body.dump(), "embed");
        const auto j = parse_body(ex, "embed");
        try {
            for (const auto& item : j.at("data")) {
                const auto i = item.value("index", std::size_t{0});
                if (start + i >= end) throw Error(ErrorCode::upstream, "embed", "embedding index out of range");
                auto v = item.at("embedding").get<std::vector<float>>();
                if (v.size() != dim_)
                    throw Error(ErrorCode::dimension_mismatch, "embed",
                                "provider returned dimension " + std::to_string(v.size()));
                out[start + i] = std::move(v);
            }
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::upstream, "embed", "response has no data[].embedding");
        }
    }
    for (const auto& v : out)
        if (v.empty()) throw Error(ErrorCode::upstream, "embed", "provider skipped an input");
    return out;
}

HttpReranker::HttpReranker(ProviderProfile profile, Transport transport)
    : profile_(std::move(profile)), transport_(std::move(transport)) {
    profile_.validate();
}

std::vector<double> HttpReranker::score(std::string_view query, std::span<const std::string> passages) {
    if (passages.empty()) return {};
    nlohmann::json body;
    body["model"] = profile_.model_id;
    body["query"] = query;
    body["documents"] = std::vector<std::string>(passages.begin(), passages.end());
    body["texts"] = body["documents"];
    body["raw_scores"] = true;
    const auto ex = post_with_retries(profile_, transport_, "/rerank", body.dump(), "rerank");
    const auto j = parse_body(ex, "rerank");
    const nlohmann::json* items = &j;
    if (j.is_object() && j.contains("results")) items = &j["results"];
    if (!items->is_array()) throw Error(ErrorCode::upstream, "rerank", "unrecognized rerank response");
    std::vector<double> scores(passages.size(), 0.0);
    std::vector<bool> seen(passages.size(), false);
    for (const auto& it : *items) {
        const auto i = it.value("index", std::size_t{passages.size()});
        if (i >= passages.size()) throw Error(ErrorCode::upstream, "rerank", "rerank index out of range");
        if (it.contains("relevance_score")) scores[i] = it["relevance_score"].get<double>();
        else if (it.contains("score")) scores[i] = it["score"].get<double>();
        else throw Error(ErrorCode::upstream, "rerank", "rerank item without a score");
        seen[i] = true;
    }
    for (bool s : seen)
        if (!s) throw Error(ErrorCode::upstream, "rerank", "provider did not score every passage");
    return scores;
}

}  // namespace clausekit::llm

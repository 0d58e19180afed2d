#include "clausekit/config.hpp"

#include "clausekit/text.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>

namespace clausekit::config {
namespace {

[[noreturn]] void bad(std::string_view key, const std::string& why) {
    throw Error(ErrorCode::config, "config", std::string(key) + ": " + why);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    v = text::trim(v);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad(key, "not a number: '" + std::string(v) + "'");
    return out;
}

std::size_t parse_size(std::string_view key, std::string_view v) {
    if (text::trim(v).starts_with("-")) bad(key, "must be nonnegative");
    return parse_number<std::size_t>(key, v);
}

bool parse_bool(std::string_view key, std::string_view v) {
    const std::string s = text::to_lower_ascii(text::trim(v));
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad(key, "not a boolean: '" + std::string(v) + "'");
}

ProviderKind parse_kind(std::string_view key, std::string_view v) {
    const std::string s = text::to_lower_ascii(text::trim(v));
    if (s == "offline" || s == "mock" || s == "hash" || s == "lexical") return ProviderKind::offline;
    if (s == "http") return ProviderKind::http;
    if (s == "replay") return ProviderKind::replay;
    bad(key, "unknown provider '" + std::string(v) + "' (offline, http, replay)");
}

constexpr std::string_view kProviderFields[] = {"provider", "base_url",   "model",       "auth_env",
                                                "timeout_s", "max_retries", "backoff_ms", "temperature"};
constexpr std::string_view kChatOnlyFields[] = {"cassette", "record"};

// Applies a provider field; returns false if `field` is not one.
bool apply_provider(ProviderSpec& p, std::string_view key, std::string_view field, std::string_view value) {
    const std::string v(text::trim(value));
    if (field == "provider") p.kind = parse_kind(key, v);
    else if (field == "base_url") p.profile.base_url = v;
    else if (field == "model") p.profile.model_id = v;
    else if (field == "auth_env") p.profile.auth_token_env_var = v;
    else if (field == "timeout_s") p.profile.timeout_s = parse_number<double>(key, v);
    else if (field == "max_retries") p.profile.max_retries = parse_number<int>(key, v);
    else if (field == "backoff_ms") p.profile.backoff_ms = parse_number<int>(key, v);
    else if (field == "temperature") p.profile.temperature = parse_number<double>(key, v);
    else if (field == "cassette") p.cassette = v;
    else if (field == "record") p.record = parse_bool(key, v);
    else return false;
    return true;
}

std::optional<ChatStage> stage_from(std::string_view s) {
    for (auto st : kChatStages)
        if (to_string(st) == s) return st;
    return std::nullopt;
}

}  // namespace

std::string_view to_string(ChatStage stage) {
    switch (stage) {
        case ChatStage::archivist: return "archivist";
        case ChatStage::interrogator: return "interrogator";
        case ChatStage::researcher: return "researcher";
        case ChatStage::filter: return "filter";
    }
    return "archivist";
}

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    std::vector<std::string> chat_prefixes{"chat"};
    for (auto st : kChatStages) chat_prefixes.emplace_back(to_string(st));
    for (const auto& p : chat_prefixes) {
        for (auto f : kProviderFields) keys.push_back(p + "." + std::string(f));
        for (auto f : kChatOnlyFields) keys.push_back(p + "." + std::string(f));
    }
    for (std::string p : {"embedder", "reranker"})
        for (auto f : kProviderFields) keys.push_back(p + "." + std::string(f));
    keys.emplace_back("embedder.dim");
    for (const char* k : {"bm25_top_n", "bm25_min_norm_score", "dense_top_n", "rrf_k", "rrf_weights", "fused_top_n",
                          "rerank_keep", "sigmoid_threshold", "answer_top_k", "llm_filter", "optimize_query"})
        keys.push_back(std::string("retrieval.") + k);
    for (const char* k : {"d_max", "nl_response", "llm_parsing", "summarize", "storage_root", "host", "port",
                          "api_token_env"})
        keys.emplace_back(k);
    return keys;
}

std::string env_name(std::string_view key) {
    std::string s = "CLAUSEKIT_";
    for (char c : key) s += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

void apply(EngineConfig& c, std::string_view key, std::string_view value) {
    const std::string v(text::trim(value));
    const auto dot = key.find('.');
    if (dot != std::string_view::npos) {
        const auto prefix = key.substr(0, dot);
        const auto field = key.substr(dot + 1);
        const bool chat_field = std::find(std::begin(kChatOnlyFields), std::end(kChatOnlyFields), field) !=
                                std::end(kChatOnlyFields);
        if (prefix == "chat") {
            bool ok = true;
            for (auto st : kChatStages) ok = apply_provider(c.chat[st], key, field, v) && ok;
            if (ok) return;
        } else if (auto st = stage_from(prefix)) {
            if (apply_provider(c.chat[*st], key, field, v)) return;
        } else if (prefix == "embedder" && field == "dim") {
            c.embedding_dim = parse_size(key, v);
            return;
        } else if ((prefix == "embedder" || prefix == "reranker") && !chat_field) {
            if (apply_provider(prefix == "embedder" ? c.embedder : c.reranker, key, field, v)) return;
        } else if (prefix == "retrieval") {
            auto& r = c.retrieval;
            if (field == "bm25_top_n") r.bm25_top_n = parse_size(key, v);
            else if (field == "bm25_min_norm_score") r.bm25_min_norm_score = parse_number<double>(key, v);
            else if (field == "dense_top_n") r.dense_top_n = parse_size(key, v);
            else if (field == "rrf_k") r.rrf_k = parse_number<double>(key, v);
            else if (field == "fused_top_n") r.fused_top_n = parse_size(key, v);
            else if (field == "rerank_keep") r.rerank_keep = parse_size(key, v);
            else if (field == "sigmoid_threshold") r.sigmoid_threshold = parse_number<double>(key, v);
            else if (field == "answer_top_k") r.answer_top_k = parse_size(key, v);
            else if (field == "llm_filter") r.llm_filter = parse_bool(key, v);
            else if (field == "optimize_query") r.optimize_query = parse_bool(key, v);
            else if (field == "rrf_weights") {
                r.rrf_weights.clear();
                std::size_t pos = 0;
                while (pos <= v.size()) {
                    auto comma = v.find(',', pos);
                    if (comma == std::string::npos) comma = v.size();
                    r.rrf_weights.push_back(parse_number<double>(key, v.substr(pos, comma - pos)));
                    pos = comma + 1;
                }
            } else bad(key, "unknown key");
            return;
        }
        bad(key, "unknown key");
    }
    if (key == "d_max") c.d_max = parse_size(key, v);
    else if (key == "nl_response") c.nl_response = parse_bool(key, v);
    else if (key == "llm_parsing") c.llm_parsing = parse_bool(key, v);
    else if (key == "summarize") c.summarize = parse_bool(key, v);
    else if (key == "storage_root") c.storage_root = v;
    else if (key == "host") c.host = v;
    else if (key == "port") c.port = parse_number<int>(key, v);
    else if (key == "api_token_env") c.api_token_env = v;
    else bad(key, "unknown key");
}

namespace {

// chat.* first so that per-stage keys win regardless of their position.
void apply_all(EngineConfig& c, std::vector<std::pair<std::string, std::string>> kv) {
    std::stable_partition(kv.begin(), kv.end(), [](const auto& p) { return p.first.starts_with("chat."); });
    for (const auto& [k, v] : kv) apply(c, k, v);
}

}  // namespace

void apply_file(EngineConfig& c, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config, "config", "cannot read config file " + path.string());
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        std::string_view l = text::trim(std::string_view(line).substr(0, hash));
        if (l.empty()) continue;
        const auto eq = l.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::config, "config", path.filename().string() + ":" + std::to_string(n) + ": expected key = value");
        kv.emplace_back(text::trim(l.substr(0, eq)), text::trim(l.substr(eq + 1)));
    }
    apply_all(c, std::move(kv));
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr) return std::nullopt;
        return std::string(v);
    };
}

void apply_env(EngineConfig& c, const EnvLookup& env) {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& k : known_keys())
        if (auto v = env(env_name(k))) kv.emplace_back(k, *v);
    apply_all(c, std::move(kv));
}

void EngineConfig::validate() const {
    if (d_max < 1) bad("d_max", "must be >= 1");
    if (embedding_dim < 1) bad("embedder.dim", "must be >= 1");
    if (port < 0 || port > 65535) bad("port", "must be in 0..65535");
    if (storage_root.empty()) bad("storage_root", "must not be empty");
    try {
        retrieval.validate();
    } catch (const Error& e) {
        bad("retrieval", e.what());
    }
    auto check = [](const ProviderSpec& p, const std::string& name, bool chat) {
        if (p.kind == ProviderKind::replay) {
            if (!chat) bad(name + ".provider", "replay is only available for chat stages");
            if (p.cassette.empty()) bad(name + ".cassette", "required for the replay provider");
            if (!p.record) return;
        }
        if (p.kind == ProviderKind::offline) return;
        if (p.profile.model_id.empty()) bad(name + ".model", "required for the http provider");
        try {
            p.profile.validate();
        } catch (const Error& e) {
            bad(name, e.what());
        }
    };
    for (auto st : kChatStages) {
        const auto it = chat.find(st);
        if (it != chat.end()) check(it->second, std::string(to_string(st)), true);
    }
    check(embedder, "embedder", false);
    check(reranker, "reranker", false);
}

EngineConfig load(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    EngineConfig c;
    for (auto st : kChatStages) c.chat[st] = {};
    if (file) apply_file(c, *file);
    if (env) apply_env(c, env);
    c.validate();
    return c;
}

Providers make_providers(const EngineConfig& c) {
    Providers p;
    std::shared_ptr<llm::ChatClient> offline = std::make_shared<llm::OfflineChatClient>();
    std::map<std::string, std::shared_ptr<llm::ChatClient>> replay_by_cassette;
    for (auto st : kChatStages) {
        const auto it = c.chat.find(st);
        const ProviderSpec spec = it == c.chat.end() ? ProviderSpec{} : it->second;
        switch (spec.kind) {
            case ProviderKind::offline: p.chat[st] = offline; break;
            case ProviderKind::http: p.chat[st] = std::make_shared<llm::HttpChatClient>(spec.profile); break;
            case ProviderKind::replay: {
                // Stages sharing a cassette share one client so recording appends to one file.
                auto& shared = replay_by_cassette[spec.cassette];
                if (!shared) {
                    std::shared_ptr<llm::ChatClient> inner;
                    if (spec.record) inner = std::make_shared<llm::HttpChatClient>(spec.profile);
                    shared = std::make_shared<llm::ReplayChatClient>(
                        spec.cassette, spec.record ? llm::ReplayChatClient::Mode::record : llm::ReplayChatClient::Mode::replay,
                        inner);
                }
                p.chat[st] = shared;
                break;
            }
        }
    }
    if (c.embedder.kind == ProviderKind::http)
        p.embedder = std::make_shared<llm::HttpEmbedder>(c.embedder.profile, c.embedding_dim);
    else
        p.embedder = std::make_shared<llm::HashEmbedder>(c.embedding_dim);
    if (c.reranker.kind == ProviderKind::http)
        p.reranker = std::make_shared<llm::HttpReranker>(c.reranker.profile);
    else
        p.reranker = std::make_shared<llm::LexicalReranker>();
    return p;
}

}  // namespace clausekit::config

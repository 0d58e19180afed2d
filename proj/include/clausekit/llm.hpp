#pragma once

#include "clausekit/error.hpp"

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clausekit::llm {

/// Which pipeline step issued a model call. The cost ledger counts these.
enum class CallRole {
    archivist_turn,
    archivist_finalize,
    llm_parse,
    interrogator_question,
    researcher_query_extract,
    researcher_nl_response,
    report_refine,
    summarize,
    filter,
};

std::string_view to_string(CallRole role);
std::optional<CallRole> role_from_string(std::string_view name);

struct Message {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
    friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
    CallRole role = CallRole::archivist_turn;
    std::vector<Message> messages;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string text;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
};

/// Provider-agnostic chat completion. Implementations must be safe to call
/// from several threads at once.
class ChatClient {
public:
    virtual ~ChatClient() = default;

    ChatResponse complete(const ChatRequest& request);
    virtual std::string model_id() const = 0;

private:
    virtual ChatResponse do_complete(const ChatRequest& request) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    virtual std::string model_id() const = 0;
    virtual std::vector<std::vector<float>> embed(std::span<const std::string> texts) = 0;

    std::vector<float> embed_one(std::string_view text);
};

/// Cross-encoder style scorer: one raw (unnormalized) relevance score per
/// (query, passage) pair.
class Reranker {
public:
    virtual ~Reranker() = default;
    virtual std::string model_id() const = 0;
    virtual std::vector<double> score(std::string_view query, std::span<const std::string> passages) = 0;
};

// ---------------------------------------------------------------------------
// Cost accounting

struct CallRecord {
    CallRole role;
    double wall_time_s = 0.0;
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;
    std::string model_id;
};

/// Append-only per-call log. Every counter is computed from the records.
class CostLedger {
public:
    void append(CallRecord record);

    std::vector<CallRecord> records() const;
    std::size_t size() const;
    std::size_t count(CallRole role) const;

    std::size_t n_turns() const { return count(CallRole::archivist_turn); }
    std::size_t d_int() const { return count(CallRole::report_refine); }
    bool llm_parsing() const { return count(CallRole::llm_parse) > 0; }
    bool nl_response() const { return count(CallRole::researcher_nl_response) > 0; }
    double total_wall_time_s() const;

private:
    mutable std::mutex mu_;
    std::vector<CallRecord> records_;
};

/// Closed-form model-call count for one analysis:
/// (turns + 1) + [llm parsing] + rounds * (question + research + report),
/// where research = 1 query-extraction call + [NL response].
std::size_t expected_call_count(std::size_t n_turns, std::size_t d_int, bool llm_parsing, bool nl_response);

/// Pairs a client with the ledger that pays for its calls.
class AccountedChat {
public:
    AccountedChat(ChatClient& client, CostLedger& ledger, double temperature = 0.0)
        : client_(&client), ledger_(&ledger), temperature_(temperature) {}

    std::string ask(CallRole role, std::vector<Message> messages);
    std::string ask(CallRole role, std::string system, std::string user);

    CostLedger& ledger() const { return *ledger_; }
    ChatClient& client() const { return *client_; }

private:
    ChatClient* client_;
    CostLedger* ledger_;
    double temperature_;
};

// ---------------------------------------------------------------------------
// Offline clients

/// Responds through a caller-supplied function. Throwing from the function
/// simulates an upstream failure.
class MockChatClient : public ChatClient {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    explicit MockChatClient(Responder responder, std::string model = "mock-chat")
        : responder_(std::move(responder)), model_(std::move(model)) {}

    std::string model_id() const override { return model_; }
    std::size_t calls() const;
    std::vector<ChatRequest> transcript() const;

private:
    ChatResponse do_complete(const ChatRequest& request) override;

    Responder responder_;
    std::string model_;
    mutable std::mutex mu_;
    std::vector<ChatRequest> seen_;
};

/// Returns scripted completions in order, optionally per role. An empty
/// script for the requested role falls back to the shared script; both
/// empty is an UpstreamError.
class ScriptedChatClient : public ChatClient {
public:
    ScriptedChatClient() = default;
    explicit ScriptedChatClient(std::vector<std::string> script);

    void push(std::string completion);
    void push(CallRole role, std::string completion);
    /// Next completion for `role` (or shared) raises UpstreamError instead.
    void push_failure(CallRole role);

    std::string model_id() const override { return "scripted"; }

private:
    ChatResponse do_complete(const ChatRequest& request) override;

    struct Entry {
        std::string text;
        bool fail = false;
    };
    std::mutex mu_;
    std::deque<Entry> shared_;
    std::map<CallRole, std::deque<Entry>> per_role_;
};

/// Deterministic, rule-based stand-in for a chat model that understands the
/// engine's own prompts well enough to drive a full analysis offline. Never
/// emits the confidence phrase, so interrogations run to the turn cap.
class OfflineChatClient : public ChatClient {
public:
    std::string model_id() const override { return "offline-rules"; }

private:
    ChatResponse do_complete(const ChatRequest& request) override;
};

/// Record/replay wrapper backed by a JSONL cassette of
/// {"request_hash": ..., "response": ...} lines.
class ReplayChatClient : public ChatClient {
public:
    enum class Mode { replay, record };

    /// In replay mode `inner` may be null; a cache miss is an UpstreamError.
    ReplayChatClient(std::string cassette_path, Mode mode, std::shared_ptr<ChatClient> inner = nullptr);

    static std::string request_hash(const ChatRequest& request, std::string_view model);

    std::string model_id() const override;

private:
    ChatResponse do_complete(const ChatRequest& request) override;

    std::string path_;
    Mode mode_;
    std::shared_ptr<ChatClient> inner_;
    std::mutex mu_;
    std::multimap<std::string, std::string> entries_;
    std::map<std::string, std::size_t> cursor_;
};

/// Seeded hash projection of the token multiset to `dim` dimensions,
/// L2-normalized. Texts sharing tokens get positively correlated vectors.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 256, std::uint64_t seed = 0x5eed);

    std::size_t dimension() const override { return dim_; }
    std::string model_id() const override;
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Scores by query-token coverage: raw = 6 * (fraction of distinct query
/// content words present in the passage) - 2, plus up to 0.5 for the share
/// of passage tokens that are query words. English stop words are ignored
/// unless the query has nothing else, and only the first kMaxPassageTokens
/// tokens of a passage are read, as with a cross-encoder's input window.
/// sigmoid(raw) >= 0.5 once a third of the content words match.
class LexicalReranker : public Reranker {
public:
    static constexpr std::size_t kMaxPassageTokens = 512;

    std::string model_id() const override { return "lexical-overlap"; }
    std::vector<double> score(std::string_view query, std::span<const std::string> passages) override;
};

// ---------------------------------------------------------------------------
// HTTP providers

struct ProviderProfile {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string model_id;
    std::string auth_token_env_var;  // empty: no Authorization header
    double timeout_s = 60.0;
    int max_retries = 3;
    double temperature = 0.0;
    int backoff_ms = 500;  // doubled per retry

    /// Throws Error(config) if base_url is not http(s)://host[:port][/path]
    /// or timeout is not positive.
    void validate() const;
};

struct HttpExchange {
    int status = 0;  // 0 when the transport failed before a response
    std::string body;
    bool timed_out = false;
    std::string transport_error;
};

/// POSTs a JSON body to base_url + path. Swappable for fault injection.
using Transport = std::function<HttpExchange(const ProviderProfile& profile, const std::string& path,
                                             const std::string& body,
                                             const std::vector<std::pair<std::string, std::string>>& headers)>;

Transport default_transport();

/// Runs `call` with the profile's retry policy. Timeouts, transport errors,
/// 429 and 5xx are retried with exponential backoff; 401/403 raise AuthError
/// immediately; other 4xx raise UpstreamError.
HttpExchange post_with_retries(const ProviderProfile& profile, const Transport& transport, const std::string& path,
                               const std::string& body, std::string_view stage);

/// OpenAI-compatible /chat/completions client.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ProviderProfile profile, Transport transport = default_transport());
    std::string model_id() const override { return profile_.model_id; }

private:
    ChatResponse do_complete(const ChatRequest& request) override;
    ProviderProfile profile_;
    Transport transport_;
};

/// OpenAI-compatible /embeddings client.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(ProviderProfile profile, std::size_t dim, Transport transport = default_transport());
    std::size_t dimension() const override { return dim_; }
    std::string model_id() const override { return profile_.model_id; }
    std::vector<std::vector<float>> embed(std::span<const std::string> texts) override;

private:
    ProviderProfile profile_;
    std::size_t dim_;
    Transport transport_;
};

/// /rerank client. Accepts both {"results":[{index, relevance_score}]} and
/// [{index, score}] responses; requests raw (pre-sigmoid) scores.
class HttpReranker : public Reranker {
public:
    explicit HttpReranker(ProviderProfile profile, Transport transport = default_transport());
    std::string model_id() const override { return profile_.model_id; }
    std::vector<double> score(std::string_view query, std::span<const std::string> passages) override;

private:
    ProviderProfile profile_;
    Transport transport_;
};

/// Resolves the bearer token named by the profile. Throws AuthError when the
/// variable is named but unset or empty.
std::optional<std::string> resolve_token(const ProviderProfile& profile);

}  // namespace clausekit::llm

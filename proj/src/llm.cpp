#include "clausekit/llm.hpp"

#include "clausekit/doctree.hpp"
#include "clausekit/prompts.hpp"
#include "clausekit/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>

namespace clausekit::llm {

std::string_view to_string(CallRole role) {
    switch (role) {
        case CallRole::archivist_turn: return "archivist_turn";
        case CallRole::archivist_finalize: return "archivist_finalize";
        case CallRole::llm_parse: return "llm_parse";
        case CallRole::interrogator_question: return "interrogator_question";
        case CallRole::researcher_query_extract: return "researcher_query_extract";
        case CallRole::researcher_nl_response: return "researcher_nl_response";
        case CallRole::report_refine: return "report_refine";
        case CallRole::summarize: return "summarize";
        case CallRole::filter: return "filter";
    }
    return "unknown";
}

std::optional<CallRole> role_from_string(std::string_view name) {
    for (auto r : {CallRole::archivist_turn, CallRole::archivist_finalize, CallRole::llm_parse,
                   CallRole::interrogator_question, CallRole::researcher_query_extract,
                   CallRole::researcher_nl_response, CallRole::report_refine, CallRole::summarize, CallRole::filter})
        if (to_string(r) == name) return r;
    return std::nullopt;
}

ChatResponse ChatClient::complete(const ChatRequest& request) {
    if (request.messages.empty()) throw Error(ErrorCode::invalid_argument, "chat", "messages must not be empty");
    return do_complete(request);
}

std::vector<float> Embedder::embed_one(std::string_view text) {
    const std::string s(text);
    auto v = embed(std::span<const std::string>(&s, 1));
    if (v.size() != 1) throw Error(ErrorCode::upstream, "embed", "embedder returned no vector");
    return std::move(v.front());
}

// ---------------------------------------------------------------------------

ChatResponse MockChatClient::do_complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mu_);
        seen_.push_back(request);
    }
    return {responder_(request), std::nullopt, std::nullopt};
}

std::size_t MockChatClient::calls() const {
    std::lock_guard lock(mu_);
    return seen_.size();
}

std::vector<ChatRequest> MockChatClient::transcript() const {
    std::lock_guard lock(mu_);
    return seen_;
}

ScriptedChatClient::ScriptedChatClient(std::vector<std::string> script) {
    for (auto& s : script) shared_.push_back({std::move(s), false});
}

void ScriptedChatClient::push(std::string completion) {
    std::lock_guard lock(mu_);
    shared_.push_back({std::move(completion), false});
}

void ScriptedChatClient::push(CallRole role, std::string completion) {
    std::lock_guard lock(mu_);
    per_role_[role].push_back({std::move(completion), false});
}

void ScriptedChatClient::push_failure(CallRole role) {
    std::lock_guard lock(mu_);
    per_role_[role].push_back({{}, true});
}

ChatResponse ScriptedChatClient::do_complete(const ChatRequest& request) {
    std::lock_guard lock(mu_);
    std::deque<Entry>* queue = nullptr;
    if (auto it = per_role_.find(request.role); it != per_role_.end() && !it->second.empty()) queue = &it->second;
    else if (!shared_.empty()) queue = &shared_;
    if (queue == nullptr)
        throw Error(ErrorCode::upstream, "chat", "script exhausted for role " + std::string(to_string(request.role)));
    Entry e = std::move(queue->front());
    queue->pop_front();
    if (e.fail) throw Error(ErrorCode::upstream, "chat", "scripted failure");
    return {std::move(e.text), std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------

namespace {

std::string all_content(const ChatRequest& r) {
    std::string s;
    for (const auto& m : r.messages) {
        s += m.content;
        s += '\n';
    }
    return s;
}

std::string last_tag(const ChatRequest& r, std::string_view tag) {
    for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it) {
        auto v = prompts::extract_tag(it->content, tag);
        if (!v.empty()) return v;
    }
    return {};
}

std::string first_sentence(std::string_view s, std::size_t max_len) {
    const std::string norm = text::normalize_whitespace(s);
    auto end = norm.find(". ");
    if (end == std::string::npos) end = norm.size();
    else end += 1;
    return norm.substr(0, std::min(end, max_len));
}

struct Evidence {
    std::string locator;
    std::string filename;
    std::string quote;
};

std::vector<Evidence> parse_evidence(std::string_view conversation) {
    static const std::regex line_re(R"(^\s*\[(\d+)\]\s+(.*?)\s+\|\s+(.*?)\s+\|\s+\"(.*)\"\s*$)");
    std::vector<Evidence> out;
    std::set<std::string> seen;
    for (const auto& line : text::split_lines(conversation)) {
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        Evidence e{m[3].str(), m[2].str(), m[4].str()};
        if (!seen.insert(e.quote).second) continue;
        out.push_back(std::move(e));
    }
    return out;
}

std::string offline_report(const ChatRequest& r) {
    const std::string query = last_tag(r, "question");
    const std::string conversation = last_tag(r, "conversation");
    const auto evidence = parse_evidence(conversation);
    std::size_t rounds = 0;
    for (const auto& line : text::split_lines(conversation))
        if (line.rfind("Question ", 0) == 0) ++rounds;

    std::ostringstream os;
    os << prompts::kTitleHeading << " Contract analysis: " << first_sentence(query, 90) << "\n\n";
    os << prompts::kSummaryHeading << "\n"
       << "This report examines the question \"" << text::normalize_whitespace(query)
       << "\" against the contract text retrieved over " << rounds << " research round(s).\n\n";
    os << prompts::kReasoningHeading << "\n";
    if (evidence.empty()) {
        os << "No contract language addressing the question was located [1].\n\n";
    } else {
        for (std::size_t i = 0; i < evidence.size() && i < 5; ++i)
            os << "- " << evidence[i].locator << " provides relevant language [" << i + 1 << "].\n";
        os << "\n";
    }
    os << prompts::kAnswerHeading << "\n"
       << "On the evidence gathered, the contract language cited in [1] is the primary basis for answering the "
          "question; the conclusion remains subject to the gaps listed below.\n\n";
    os << prompts::kGapsHeading << "\n"
       << "- Whether other clauses qualify or override the cited language.\n"
       << "- Whether defined terms alter the plain reading of the cited provisions.\n\n";
    os << prompts::kSourcesHeading << "\n";
    if (evidence.empty()) {
        os << "1. No supporting passage retrieved (contract text searched in full)\n";
    } else {
        for (std::size_t i = 0; i < evidence.size(); ++i) {
            const std::string& full = evidence[i].quote;
            const std::string quote = full.substr(0, full.size() > 240 ? text::utf8_floor(full, 240) : full.size());
            os << i + 1 << ". \"" << quote << "\" - " << evidence[i].locator << " (file: " << evidence[i].filename
               << ")\n";
        }
    }
    return os.str();
}

std::string offline_question(const ChatRequest& r) {
    const std::string query = text::normalize_whitespace(last_tag(r, "question"));
    const std::string asked = last_tag(r, "questions");
    std::size_t n = 0;
    if (asked != "(none)")
        for (const auto& line : text::split_lines(asked))
            if (!text::is_blank(line)) ++n;
    static const char* angles[] = {
        "Which clause of the contract directly addresses this question: ",
        "What conditions or exceptions limit the obligations relevant to: ",
        "Which defined terms affect how the contract answers: ",
        "What do the termination and survival provisions say regarding: ",
        "Is there any contract language that points against the current answer to: ",
    };
    std::string q = angles[n % 5] + query;
    if (n >= 5) q += " (follow-up " + std::to_string(n + 1) + ")";
    return q;
}

std::string offline_finalize(const ChatRequest& r) {
    const std::string convo = last_tag(r, "conversation");
    std::vector<std::string> user_lines;
    for (const auto& line : text::split_lines(convo))
        if (line.rfind("user: ", 0) == 0) user_lines.push_back(line.substr(6));
    nlohmann::json j;
    j["query"] = user_lines.empty() ? std::string() : user_lines.back();
    std::string context;
    for (std::size_t i = 0; i + 1 < user_lines.size(); ++i) context += (i ? " " : "") + user_lines[i];
    j["context"] = context;
    j["instructions"] = "";
    return j.dump();
}

std::string offline_parse(const ChatRequest& r) {
    const std::string doc = last_tag(r, "document");
    const auto boundaries = doctree::detect_sections(doc);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : boundaries) {
        if (b.cue == doctree::Cue::none) continue;
        std::string first = std::string(text::trim(doc.substr(b.span.start, std::min<std::size_t>(b.span.length(), 40))));
        first = first.substr(0, first.find('\n'));
        int level = b.cue == doctree::Cue::decimal ? static_cast<int>(b.numbers.size())
                    : b.cue == doctree::Cue::heading ? b.level
                                                      : 4;
        arr.push_back({{"level", level}, {"kind", doctree::to_string(b.kind)}, {"label", b.label}, {"first_words", first}});
    }
    return arr.dump();
}

std::string offline_filter(const ChatRequest& r) {
    const std::string query = last_tag(r, "query");
    const std::string passage = last_tag(r, "passage");
    const auto qt = text::tokenize(query);
    const std::set<std::string> qset(qt.begin(), qt.end());
    // Split into sentences on ". " keeping verbatim text.
    std::vector<std::string> sentences;
    std::size_t pos = 0;
    while (pos < passage.size()) {
        auto end = passage.find(". ", pos);
        end = end == std::string::npos ? passage.size() : end + 1;
        sentences.push_back(passage.substr(pos, end - pos));
        pos = end;
        while (pos < passage.size() && passage[pos] == ' ') ++pos;
    }
    std::size_t best = 0;
    std::size_t best_hits = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        std::size_t hits = 0;
        for (const auto& t : text::tokenize(sentences[i])) hits += qset.count(t);
        if (hits > best_hits) {
            best_hits = hits;
            best = i;
        }
    }
    if (best_hits == 0) return "NONE";
    return std::string(text::trim(sentences[best]));
}

}  // namespace

ChatResponse OfflineChatClient::do_complete(const ChatRequest& request) {
    std::string out;
    switch (request.role) {
        case CallRole::archivist_turn:
            out = "Understood. Is there any background about the parties or the dispute I should know, or any "
                  "preferred format for the answer?";
            break;
        case CallRole::archivist_finalize: out = offline_finalize(request); break;
        case CallRole::llm_parse: out = offline_parse(request); break;
        case CallRole::interrogator_question: out = offline_question(request); break;
        case CallRole::researcher_query_extract: {
            const std::string q = text::normalize_whitespace(last_tag(request, "question"));
            if (all_content(request).find("\"tool\"") != std::string::npos) {
                out = nlohmann::json{{"tool", "in_document"}, {"query", q}}.dump();
            } else {
                out = q;
            }
            break;
        }
        case CallRole::researcher_nl_response: {
            const std::string ev = last_tag(request, "evidence");
            const auto evidence = parse_evidence(ev);
            out = evidence.empty() ? "The retrieved passages do not address the question."
                                   : "The most relevant language is \"" + evidence.front().quote.substr(0, 200) +
                                         "\" [1].";
            break;
        }
        case CallRole::report_refine: out = offline_report(request); break;
        case CallRole::summarize:
            out = first_sentence(last_tag(request, "document"), 300);
            if (out.empty()) out = "Empty document.";
            break;
        case CallRole::filter: out = offline_filter(request); break;
    }
    return {out, std::nullopt, std::nullopt};
}

// ---------------------------------------------------------------------------

ReplayChatClient::ReplayChatClient(std::string cassette_path, Mode mode, std::shared_ptr<ChatClient> inner)
    : path_(std::move(cassette_path)), mode_(mode), inner_(std::move(inner)) {
    if (mode_ == Mode::record && !inner_)
        throw Error(ErrorCode::config, "replay", "record mode needs an inner client");
    std::ifstream in(path_);
    if (!in) {
        if (mode_ == Mode::replay) throw Error(ErrorCode::config, "replay", "cannot open cassette " + path_);
        return;
    }
    std::string line;
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        const auto j = nlohmann::json::parse(line);
        entries_.emplace(j.at("request_hash").get<std::string>(), j.at("response").get<std::string>());
    }
}

std::string ReplayChatClient::model_id() const { return inner_ ? inner_->model_id() : "replay"; }

std::string ReplayChatClient::request_hash(const ChatRequest& request, std::string_view model) {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : request.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
    return text::hex64(text::fnv1a64(j.dump()));
}

ChatResponse ReplayChatClient::do_complete(const ChatRequest& request) {
    const std::string key = request_hash(request, "");
    {
        std::lock_guard lock(mu_);
        auto& used = cursor_[key];
        auto [b, e] = entries_.equal_range(key);
        const auto available = static_cast<std::size_t>(std::distance(b, e));
        if (used < available) {
            std::advance(b, static_cast<long>(used));
            ++used;
            return {b->second, std::nullopt, std::nullopt};
        }
        if (mode_ == Mode::replay)
            throw Error(ErrorCode::upstream, "replay", "cassette has no response for request " + key);
    }
    ChatResponse resp = inner_->complete(request);
    std::lock_guard lock(mu_);
    entries_.emplace(key, resp.text);
    ++cursor_[key];
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::io, "replay", "cannot append to cassette " + path_);
    out << nlohmann::json{{"request_hash", key}, {"response", resp.text}}.dump() << '\n';
    return resp;
}

// ---------------------------------------------------------------------------

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

HashEmbedder::HashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw Error(ErrorCode::invalid_argument, "embed", "dimension must be positive");
}

std::string HashEmbedder::model_id() const {
    return "hash-embed-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

std::vector<std::vector<float>> HashEmbedder::embed(std::span<const std::string> texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        std::unordered_map<std::string, int> counts;
        for (auto& tok : text::tokenize(t)) ++counts[std::move(tok)];
        std::vector<double> acc(dim_, 0.0);
        // Sorted so the floating-point sum order is independent of hashing.
        std::vector<std::pair<std::string, int>> sorted(counts.begin(), counts.end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [tok, c] : sorted) {
            const std::uint64_t h = text::fnv1a64(tok, 0xcbf29ce484222325ULL ^ seed_);
            for (std::size_t i = 0; i < dim_; ++i) {
                const std::uint64_t r = splitmix64(h + i);
                const double u = static_cast<double>(r >> 11) * (1.0 / 9007199254740992.0);
                acc[i] += static_cast<double>(c) * (2.0 * u - 1.0);
            }
        }
        double norm = 0.0;
        for (double v : acc) norm += v * v;
        norm = std::sqrt(norm);
        std::vector<float> v(dim_, 0.0f);
        if (norm > 0)
            for (std::size_t i = 0; i < dim_; ++i) v[i] = static_cast<float>(acc[i] / norm);
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

const std::set<std::string, std::less<>>& stop_words() {
    static const std::set<std::string, std::less<>> words{
        "a",    "an",   "and",  "any",  "are",   "as",    "at",   "be",    "by",    "can",  "could", "did",
        "do",   "does", "for",  "from", "has",   "have",  "how",  "i",     "if",    "in",   "is",    "it",
        "its",  "may",  "must", "my",   "no",    "not",   "of",   "on",    "or",    "our",  "shall", "should",
        "so",   "such", "that", "the",  "their", "there", "this", "to",    "under", "we",   "what",  "when",
        "where", "which", "who", "why", "will",  "with",  "would", "you",  "your",  "been", "than"};
    return words;
}

}  // namespace

std::vector<double> LexicalReranker::score(std::string_view query, std::span<const std::string> passages) {
    const auto qt = text::tokenize(query);
    std::set<std::string> qset;
    for (const auto& t : qt)
        if (!stop_words().contains(t)) qset.insert(t);
    if (qset.empty()) qset.insert(qt.begin(), qt.end());
    std::vector<double> out;
    out.reserve(passages.size());
    for (const auto& p : passages) {
        if (qset.empty()) {
            out.push_back(-2.0);
            continue;
        }
        auto tokens = text::tokenize(p);
        if (tokens.size() > kMaxPassageTokens) tokens.resize(kMaxPassageTokens);
        std::set<std::string> present;
        std::size_t occurrences = 0;
        for (const auto& t : tokens) {
            if (qset.count(t)) {
                present.insert(t);
                ++occurrences;
            }
        }
        const double coverage = static_cast<double>(present.size()) / static_cast<double>(qset.size());
        // Density rather than raw counts, so a focused passage outranks the
        // same words buried in a longer context.
        const double bonus =
            tokens.empty() ? 0.0 : 0.5 * static_cast<double>(occurrences) / static_cast<double>(tokens.size());
        out.push_back(6.0 * coverage - 2.0 + bonus);
    }
    return out;
}

}  // namespace clausekit::llm

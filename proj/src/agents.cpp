#include "clausekit/agents.hpp"

#include "clausekit/prompts.hpp"

#include <json.hpp>

#include <sstream>

namespace clausekit::agents {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string one_line(std::string_view s) { return text::normalize_whitespace(s); }

// Largest {...} object in a reply, tolerating code fences and chatter.
std::optional<json> parse_object(std::string_view reply) {
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    try {
        auto j = json::parse(reply.substr(open, close - open + 1));
        if (j.is_object()) return j;
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

std::string string_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) return {};
    return std::string(text::trim(j[key].get<std::string>()));
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    return text::to_lower_ascii(haystack).find(text::to_lower_ascii(needle)) != std::string::npos;
}

}  // namespace

std::string to_json(const UserBrief& b, int indent) {
    ordered_json j;
    j["query"] = b.query;
    j["context"] = b.context;
    j["instructions"] = b.instructions;
    return j.dump(indent);
}

UserBrief brief_from_json(std::string_view s) {
    try {
        const auto j = json::parse(s);
        return {j.at("query").get<std::string>(), j.value("context", std::string()),
                j.value("instructions", std::string())};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, "brief", e.what());
    }
}

// ---------------------------------------------------------------------------
// Archivist

ArchivistSession::Outcome ArchivistSession::converse(std::string_view user_message, llm::AccountedChat& chat,
                                                     bool finalize_now, bool auto_finalize) {
    if (finalized()) throw Error(ErrorCode::invalid_argument, "archivist", "session is already finalized");
    if (text::is_blank(user_message)) {
        if (finalize_now) return {std::nullopt, finalize(chat)};
        throw Error(ErrorCode::invalid_argument, "archivist", "message is empty");
    }
    transcript_.push_back({"user", std::string(user_message)});
    if (finalize_now) return {std::nullopt, finalize(chat)};

    std::vector<llm::Message> messages{{"system", prompts::archivist_system()}};
    messages.insert(messages.end(), transcript_.begin(), transcript_.end());
    std::string reply;
    try {
        reply = chat.ask(llm::CallRole::archivist_turn, std::move(messages));
    } catch (const Error& e) {
        transcript_.pop_back();
        throw e.with_stage("archivist");
    }
    transcript_.push_back({"assistant", reply});
    const bool ready = reply.find(kReadyMarker) != std::string::npos;
    if (ready) reply.erase(reply.find(kReadyMarker), kReadyMarker.size());
    Outcome out;
    out.reply = std::string(text::trim(reply));
    if (ready && auto_finalize) out.brief = finalize(chat);
    return out;
}

UserBrief ArchivistSession::finalize(llm::AccountedChat& chat) {
    if (finalized()) return *brief_;
    std::string last_user;
    std::string transcript;
    for (const auto& m : transcript_) {
        transcript += m.role + ": " + one_line(m.content) + "\n";
        if (m.role == "user") last_user = std::string(text::trim(m.content));
    }
    if (last_user.empty()) throw Error(ErrorCode::invalid_argument, "archivist", "a query is required to finalize");
    std::string reply;
    try {
        reply = chat.ask(llm::CallRole::archivist_finalize, prompts::archivist_finalize_system(),
                         prompts::archivist_finalize_user(transcript));
    } catch (const Error& e) {
        throw e.with_stage("archivist");
    }
    UserBrief b;
    if (auto j = parse_object(reply)) {
        b.query = string_field(*j, "query");
        b.context = string_field(*j, "context");
        b.instructions = string_field(*j, "instructions");
    }
    if (b.query.empty()) b.query = last_user;
    brief_ = b;
    return b;
}

std::string ArchivistSession::to_json() const {
    ordered_json j;
    j["transcript"] = ordered_json::array();
    for (const auto& m : transcript_) j["transcript"].push_back({{"role", m.role}, {"content", m.content}});
    j["brief"] = brief_ ? ordered_json::parse(agents::to_json(*brief_)) : ordered_json(nullptr);
    return j.dump();
}

ArchivistSession ArchivistSession::from_json(std::string_view s) {
    ArchivistSession a;
    try {
        const auto j = json::parse(s);
        for (const auto& m : j.at("transcript"))
            a.transcript_.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
        if (j.contains("brief") && !j["brief"].is_null()) a.brief_ = brief_from_json(j["brief"].dump());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, "archivist", e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------
// Researcher

std::string ResearchAnswer::render(std::size_t max_spans) const {
    std::ostringstream os;
    const std::size_t n = std::min(max_spans, retrieval.spans.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = retrieval.spans[i];
        std::string path;
        for (const auto& p : s.node_path) path += (path.empty() ? "" : " > ") + p;
        if (path.empty()) path = "document";
        os << "[" << i + 1 << "] " << s.filename << " | " << path << " | \"" << one_line(s.text) << "\"\n";
    }
    if (n == 0) os << "(no passage in the contract matched this question)\n";
    if (nl_answer) os << "Researcher's reading: " << one_line(*nl_answer) << "\n";
    if (!examples.empty()) {
        os << "Labeled examples from related contracts:\n";
        for (const auto& e : examples) os << "- (" << e.label << ") \"" << one_line(e.chunk.text) << "\"\n";
    }
    return os.str();
}

ResearchAnswer researcher_answer(std::string_view question, const ResearchResources& resources,
                                 ResearchClients clients, const ResearchConfig& config) {
    if (resources.index == nullptr)
        throw Error(ErrorCode::invalid_argument, "researcher", "the in-document tool needs an index");
    std::vector<prompts::ToolDescription> tools{
        {std::string(kInDocumentTool), "hybrid lexical and semantic search over the contract under review"}};
    const bool graph_tool = resources.graph != nullptr && !resources.graph->empty();
    if (graph_tool)
        tools.push_back({std::string(kCrossDocumentTool),
                         "searches related contracts and returns labeled example clauses for comparison"});

    ResearchAnswer ans;
    ans.tool = std::string(kInDocumentTool);
    std::string reply;
    try {
        reply = clients.chat.ask(llm::CallRole::researcher_query_extract, prompts::researcher_query_system(tools),
                                 prompts::researcher_query_user(question));
    } catch (const Error& e) {
        throw e.with_stage("query_extraction");
    }
    if (graph_tool) {
        if (auto j = parse_object(reply)) {
            const auto tool = string_field(*j, "tool");
            if (tool == kCrossDocumentTool) ans.tool = tool;
            else if (!tool.empty() && tool != kInDocumentTool)
                ans.warnings.push_back("unknown tool '" + tool + "', using " + std::string(kInDocumentTool));
            ans.query = string_field(*j, "query");
        } else {
            ans.warnings.push_back("tool choice was not JSON; using " + std::string(kInDocumentTool));
        }
    } else {
        ans.query = std::string(text::trim(reply));
    }
    if (text::is_blank(ans.query)) ans.query = std::string(text::trim(question));

    ans.retrieval = retrieval::retrieve_prepared(
        ans.query, *resources.index, {clients.embedder, clients.reranker, nullptr, clients.filter_chat},
        config.retrieval);
    if (ans.tool == kCrossDocumentTool) {
        try {
            ans.examples = index::cross_document_examples(*resources.graph, ans.query, clients.embedder,
                                                          config.cross_document_examples);
        } catch (const Error& e) {
            throw e.with_stage("cross_document");
        }
    }
    if (config.nl_response) {
        try {
            ans.nl_answer = clients.chat.ask(
                llm::CallRole::researcher_nl_response, prompts::researcher_answer_system(),
                prompts::researcher_answer_user(question, ans.render(config.retrieval.answer_top_k)));
        } catch (const Error& e) {
            throw e.with_stage("researcher");
        }
    }
    return ans;
}

// ---------------------------------------------------------------------------
// Interrogator

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::none: return "none";
        case StopReason::confidence_phrase: return "confidence_phrase";
        case StopReason::turn_cap: return "turn_cap";
    }
    return "none";
}

NextQuestion interrogator_next_question(InterrogationState& state, llm::AccountedChat& chat,
                                        const InterrogationOptions& options) {
    if (state.stopped_by != StopReason::none) return {std::nullopt, state.stopped_by};
    if (state.turns.size() >= state.d_max) return {std::nullopt, StopReason::turn_cap};

    std::vector<std::string> asked;
    for (const auto& t : state.turns) asked.push_back(t.question);
    const std::string report_md = state.report ? report::render_markdown(*state.report) : std::string();
    const auto is_repeat = [&](const std::string& q) {
        return std::find(asked.begin(), asked.end(), q) != asked.end();
    };

    std::string user = prompts::interrogator_user(report_md, asked, state.brief.query);
    for (int attempt = 0; attempt <= options.max_regenerations; ++attempt) {
        std::string reply;
        try {
            reply = chat.ask(llm::CallRole::interrogator_question,
                             prompts::interrogator_system(state.d_max - state.turns.size()), user);
        } catch (const Error& e) {
            throw e.with_stage("interrogator");
        }
        if (contains_ci(reply, options.stop_marker)) {
            if (!state.turns.empty()) return {std::nullopt, StopReason::confidence_phrase};
            state.warnings.push_back("stop phrase before any research; starting from the user's question");
            return {state.brief.query, StopReason::none};
        }
        std::string q(text::trim(reply));
        if (!q.empty() && !is_repeat(q)) return {q, StopReason::none};
        state.warnings.push_back(q.empty() ? "interrogator produced an empty question"
                                           : "interrogator repeated a question: " + q.substr(0, 80));
        user += q.empty() ? "\n\nYour last reply was empty. Ask one new question."
                          : "\n\nYour last question was already asked. Ask a different one.";
    }
    if (state.turns.empty() && !is_repeat(state.brief.query)) return {state.brief.query, StopReason::none};
    return {std::nullopt, StopReason::turn_cap};
}

std::string render_conversation(const InterrogationState& state, std::size_t max_spans) {
    std::ostringstream os;
    for (std::size_t i = 0; i < state.turns.size(); ++i) {
        os << "Question " << i + 1 << ": " << one_line(state.turns[i].question) << "\n";
        os << "Answer " << i + 1 << ":\n" << state.turns[i].answer.render(max_spans) << "\n";
    }
    return os.str();
}

namespace {

std::optional<std::string> report_problem(const std::string& markdown, report::Report& out) {
    try {
        out = report::parse_report_markdown(markdown);
    } catch (const Error& e) {
        return std::string(e.what());
    }
    return report::validate(out);
}

}  // namespace

report::Report refine_report(InterrogationState& state, llm::AccountedChat& chat, const InterrogationOptions& options) {
    if (state.turns.empty())
        throw Error(ErrorCode::invalid_argument, "refine", "refinement needs at least one research turn");
    const std::string existing = state.report ? report::render_markdown(*state.report) : std::string();
    std::vector<llm::Message> messages{
        {"system", prompts::refine_system()},
        {"user", prompts::refine_user(state.brief.query, state.brief.context, state.brief.instructions,
                                      render_conversation(state, options.research.retrieval.answer_top_k), existing)},
    };
    try {
        std::string reply = chat.ask(llm::CallRole::report_refine, messages);
        report::Report r;
        auto problem = report_problem(reply, r);
        if (problem) {
            state.warnings.push_back("report needed repair: " + *problem);
            messages.push_back({"assistant", reply});
            messages.push_back({"user", prompts::repair_user(*problem)});
            reply = chat.ask(llm::CallRole::report_refine, messages);
            problem = report_problem(reply, r);
            if (problem)
                throw Error(ErrorCode::schema_violation, "refine", "report still malformed after repair: " + *problem);
        }
        state.report = r;
        return r;
    } catch (const Error& e) {
        throw e.with_stage("refine");
    }
}

InterrogationResult run_interrogation(const UserBrief& brief, const ResearchResources& resources,
                                      ResearchClients clients, const InterrogationOptions& options,
                                      const TurnCallback& on_turn) {
    if (options.d_max < 1) throw Error(ErrorCode::invalid_argument, "interrogator", "d_max must be >= 1");
    if (text::is_blank(brief.query)) throw Error(ErrorCode::invalid_argument, "interrogator", "brief has no query");
    InterrogationState state;
    state.brief = brief;
    state.d_max = options.d_max;
    try {
        for (;;) {
            auto next = interrogator_next_question(state, clients.chat, options);
            if (!next.question) {
                state.stopped_by = next.stop;
                break;
            }
            Turn turn;
            turn.question = *next.question;
            turn.answer = researcher_answer(turn.question, resources, clients, options.research);
            state.turns.push_back(std::move(turn));
            refine_report(state, clients.chat, options);
            if (on_turn) on_turn(state);
        }
    } catch (const Error& e) {
        throw InterrogationError(e, std::make_shared<const InterrogationState>(state));
    }
    return {*state.report, std::move(state)};
}

std::string to_json(const InterrogationState& state, int indent) {
    ordered_json j;
    j["brief"] = ordered_json::parse(to_json(state.brief));
    j["d_max"] = state.d_max;
    j["stopped_by"] = to_string(state.stopped_by);
    j["turns"] = ordered_json::array();
    for (const auto& t : state.turns) {
        ordered_json o;
        o["question"] = t.question;
        o["tool"] = t.answer.tool;
        o["retrieval"] = ordered_json::parse(retrieval::to_json(t.answer.retrieval));
        o["nl_answer"] = t.answer.nl_answer ? ordered_json(*t.answer.nl_answer) : ordered_json(nullptr);
        o["examples"] = ordered_json::array();
        for (const auto& e : t.answer.examples)
            o["examples"].push_back({{"chunk_id", e.chunk.id}, {"label", e.label}, {"score", e.score}});
        o["warnings"] = t.answer.warnings;
        j["turns"].push_back(std::move(o));
    }
    j["report"] = state.report ? ordered_json::parse(report::to_json(*state.report)) : ordered_json(nullptr);
    j["warnings"] = state.warnings;
    return j.dump(indent);
}

}  // namespace clausekit::agents

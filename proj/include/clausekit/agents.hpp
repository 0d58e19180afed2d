#pragma once

#include "clausekit/index.hpp"
#include "clausekit/llm.hpp"
#include "clausekit/report.hpp"
#include "clausekit/retrieval.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clausekit::agents {

struct UserBrief {
    std::string query;
    std::string context;
    std::string instructions;
};

std::string to_json(const UserBrief& brief, int indent = -1);
UserBrief brief_from_json(std::string_view json);

// ---------------------------------------------------------------------------
// Archivist

/// Intake dialogue. Each converse() is one archivist_turn call; finalize()
/// is one archivist_finalize call.
class ArchivistSession {
public:
    struct Outcome {
        std::optional<std::string> reply;  // set for an ordinary turn
        std::optional<UserBrief> brief;    // set once finalized
    };

    /// Marker the assistant appends when it considers the question clear.
    static constexpr std::string_view kReadyMarker = "[READY]";

    /// Appends the message. With `finalize` set no dialogue call is made and
    /// the session is finalized right away. Otherwise the assistant replies;
    /// when `auto_finalize` is on and the reply carries the ready marker the
    /// session is finalized as well.
    Outcome converse(std::string_view user_message, llm::AccountedChat& chat, bool finalize = false,
                     bool auto_finalize = false);

    /// Distills the transcript into a brief. Throws invalid_argument when the
    /// user has said nothing.
    UserBrief finalize(llm::AccountedChat& chat);

    const std::vector<llm::Message>& transcript() const { return transcript_; }
    const std::optional<UserBrief>& brief() const { return brief_; }
    bool finalized() const { return brief_.has_value(); }

    std::string to_json() const;
    static ArchivistSession from_json(std::string_view json);

private:
    std::vector<llm::Message> transcript_;  // user / assistant only
    std::optional<UserBrief> brief_;
};

// ---------------------------------------------------------------------------
// Researcher

struct ResearchResources {
    const index::ChunkIndex* index = nullptr;     // in-document tool; required
    const index::CorpusGraph* graph = nullptr;    // cross-document tool; optional
};

struct ResearchClients {
    llm::AccountedChat& chat;
    llm::Embedder& embedder;
    llm::Reranker& reranker;
    llm::AccountedChat* filter_chat = nullptr;
};

struct ResearchConfig {
    retrieval::RetrievalConfig retrieval;
    bool nl_response = true;
    std::size_t cross_document_examples = 3;
};

inline constexpr std::string_view kInDocumentTool = "in_document";
inline constexpr std::string_view kCrossDocumentTool = "cross_document";

struct ResearchAnswer {
    std::string tool;
    std::string query;  // search query after extraction
    retrieval::RetrievalResult retrieval;
    std::optional<std::string> nl_answer;
    std::vector<index::LabeledExample> examples;
    std::vector<std::string> warnings;

    /// Evidence block: one `[n] file | path | "text"` line per span, then
    /// the NL answer and examples when present.
    std::string render(std::size_t max_spans) const;
};

/// One researcher_query_extract call (tool choice is folded into it when
/// the graph tool is available), retrieval, and an optional
/// researcher_nl_response call.
ResearchAnswer researcher_answer(std::string_view question, const ResearchResources& resources,
                                 ResearchClients clients, const ResearchConfig& config);

// ---------------------------------------------------------------------------
// Interrogator

enum class StopReason { none, confidence_phrase, turn_cap };
std::string_view to_string(StopReason reason);

struct Turn {
    std::string question;
    ResearchAnswer answer;
};

struct InterrogationState {
    UserBrief brief;
    std::vector<Turn> turns;
    std::optional<report::Report> report;
    std::size_t d_max = 5;
    StopReason stopped_by = StopReason::none;
    std::vector<std::string> warnings;
};

struct InterrogationOptions {
    std::size_t d_max = 5;
    /// Case-insensitive substring that ends the loop.
    std::string stop_marker = "i am now in a position to answer";
    /// Regenerations after an empty or repeated question before giving up.
    int max_regenerations = 2;
    ResearchConfig research;
};

struct NextQuestion {
    std::optional<std::string> question;  // nullopt: done
    StopReason stop = StopReason::none;
};

/// Next question, or done on the stop marker / turn cap. A question that is
/// empty or byte-identical to an earlier one is regenerated up to
/// max_regenerations times, after which the loop ends as turn_cap. On the
/// very first turn a stop or degenerate output falls back to the user's
/// query so every run researches at least once.
NextQuestion interrogator_next_question(InterrogationState& state, llm::AccountedChat& chat,
                                        const InterrogationOptions& options);

/// Question/answer history in the form the refine prompt receives.
std::string render_conversation(const InterrogationState& state, std::size_t max_spans);

/// One report_refine call, plus one repair call when the output does not
/// parse or validate. Replaces state.report. Throws SchemaViolation.
report::Report refine_report(InterrogationState& state, llm::AccountedChat& chat, const InterrogationOptions& options);

/// Raised by run_interrogation; carries the state reached before failing.
class InterrogationError : public Error {
public:
    InterrogationError(const Error& cause, std::shared_ptr<const InterrogationState> state)
        : Error(cause), state_(std::move(state)) {}
    const InterrogationState& state() const { return *state_; }

private:
    std::shared_ptr<const InterrogationState> state_;
};

using TurnCallback = std::function<void(const InterrogationState&)>;

struct InterrogationResult {
    report::Report report;
    InterrogationState state;
};

/// question -> research -> refine, until the stop marker or d_max turns.
InterrogationResult run_interrogation(const UserBrief& brief, const ResearchResources& resources,
                                      ResearchClients clients, const InterrogationOptions& options,
                                      const TurnCallback& on_turn = {});

std::string to_json(const InterrogationState& state, int indent = -1);

}  // namespace clausekit::agents

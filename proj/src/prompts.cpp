#include "clausekit/prompts.hpp"

#include <sstream>

namespace clausekit::prompts {

std::string extract_tag(std::string_view text, std::string_view tag) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const auto b = text.find(open);
    if (b == std::string_view::npos) return {};
    const auto start = b + open.size();
    const auto e = text.find(close, start);
    if (e == std::string_view::npos) return {};
    std::string_view body = text.substr(start, e - start);
    while (!body.empty() && body.front() == '\n') body.remove_prefix(1);
    while (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    return std::string(body);
}

std::string wrap_tag(std::string_view tag, std::string_view body) {
    std::string out;
    out += "<";
    out += tag;
    out += ">\n";
    out += body;
    out += "\n</";
    out += tag;
    out += ">";
    return out;
}

std::string parse_system() {
    return "You segment contracts into their structural sections (titles, clauses, paragraphs, enumerated list "
           "items). Reply with a JSON array only. Each element is an object with keys \"level\" (1 for top-level "
           "sections, increasing with nesting), \"kind\" (title|clause|paragraph|list_item), \"label\" (the "
           "numbering or heading, may be empty) and \"first_words\" (the first 5-12 words of the section copied "
           "verbatim). List sections in document order.";
}

std::string parse_user(std::string_view document) { return wrap_tag("document", document); }

std::string summary_system() {
    return "You write a short neutral summary of a contract: the parties, the type of agreement and its main "
           "obligations, in at most three sentences. Reply with the summary text only.";
}

std::string summary_user(std::string_view filename, std::string_view document) {
    return "File: " + std::string(filename) + "\n" + wrap_tag("document", document);
}

std::string archivist_system() {
    return "You are the intake assistant of a contract-analysis service. Talk with the user to understand the "
           "legal question they want answered about their contract, any background context, and any instructions "
           "on how the answer should be given. Ask one short clarifying question at a time when something is "
           "ambiguous. When you have a clear question, say so and end your message with [READY].";
}

std::string archivist_finalize_system() {
    return "Distill the conversation into a research brief. Reply with a JSON object with string keys "
           "\"query\" (the legal question, self-contained), \"context\" (background facts the user gave, may be "
           "empty) and \"instructions\" (requirements on the answer, may be empty). Reply with JSON only.";
}

std::string archivist_finalize_user(std::string_view transcript) { return wrap_tag("conversation", transcript); }

std::string interrogator_system(std::size_t remaining_questions) {
    std::ostringstream os;
    os << "You are a legal interrogator questioning a legal researcher who can search the contract under review. "
          "Your goal is to gather the evidence needed to answer the user's legal question.\n\n"
          "Read the current draft report first: its preliminary interpretation, acknowledged knowledge gaps, "
          "open uncertainties and listed follow-up questions tell you what is still missing.\n\n"
          "You have "
       << remaining_questions
       << " questions remaining. Ask exactly one question per turn. Target the most important unresolved gap, "
          "press for exact contract language, clause references and counterarguments, and never repeat a "
          "question that was already asked or answered.\n\n"
          "When you have everything needed, stop by replying with exactly:\n"
       << kConfidencePhrase << "\n\nOtherwise reply with the next question only.";
    return os.str();
}

std::string interrogator_user(std::string_view report_markdown, std::span<const std::string> questions,
                              std::string_view user_query) {
    std::ostringstream os;
    os << "Legal question under investigation:\n" << wrap_tag("question", user_query) << "\n\n";
    os << "Current draft report:\n"
       << wrap_tag("report", report_markdown.empty() ? "(no report yet)" : report_markdown) << "\n\n";
    std::string list;
    for (std::size_t i = 0; i < questions.size(); ++i) list += std::to_string(i + 1) + ". " + questions[i] + "\n";
    if (list.empty()) list = "(none)";
    os << "Questions asked so far:\n" << wrap_tag("questions", list) << "\n\n";
    os << "Ask your next question.";
    return os.str();
}

std::string researcher_query_system(std::span<const ToolDescription> tools) {
    std::ostringstream os;
    if (tools.size() <= 1) {
        os << "Rewrite the question into a concise search query for retrieving the relevant contract passages. "
              "Keep the legally significant terms. Reply with the query only.";
        return os.str();
    }
    os << "You route a question to one retrieval tool and write the search query for it. Available tools:\n";
    for (const auto& t : tools) os << "- " << t.name << ": " << t.description << "\n";
    os << "Reply with a JSON object {\"tool\": <tool name>, \"query\": <search query>} and nothing else.";
    return os.str();
}

std::string researcher_query_user(std::string_view question) { return wrap_tag("question", question); }

std::string researcher_answer_system() {
    return "You are a legal researcher. Answer the question using only the numbered evidence passages. Quote the "
           "exact supporting language in double quotes and cite passages as [n]. Say plainly when the evidence "
           "does not settle the question.";
}

std::string researcher_answer_user(std::string_view question, std::string_view evidence) {
    return wrap_tag("question", question) + "\n\n" + wrap_tag("evidence", evidence);
}

std::string refine_system() {
    std::ostringstream os;
    os << "You are a legal technical writer maintaining a structured report that answers a legal question about "
          "a contract. You receive the question, background context, the full conversation between an "
          "interrogator and a researcher, and the current draft report (possibly empty).\n\n"
          "Produce a complete replacement report that integrates the new findings into one coherent document. "
          "Rewrite rather than append, and never mention earlier drafts, the interrogator or the researcher. "
          "The report develops the reasoning toward an answer and may revise earlier directions.\n\n"
          "Use exactly these markdown headings, in this order:\n"
       << kTitleHeading << " <title>\n"
       << kSummaryHeading << "\n"
       << kReasoningHeading << "\n"
       << kAnswerHeading << "\n"
       << kGapsHeading << "\n"
       << kSourcesHeading << "\n\n"
       << "Under Gaps list each missing piece of evidence or follow-up question as a \"- \" bullet. Under Sources "
          "number every reference as \"1.\", \"2.\", ... starting from 1 and cite them inline as [1], [2]. Each "
          "source quotes the exact contract language in double quotes and says where to find it (clause, section "
          "or file). Keep the report under about 500 words, formal and precise.";
    return os.str();
}

std::string refine_user(std::string_view query, std::string_view context, std::string_view instructions,
                        std::string_view conversation, std::string_view existing_report) {
    std::ostringstream os;
    os << "Refine the report for this legal question.\n\n"
       << wrap_tag("question", query) << "\n\n"
       << wrap_tag("context", context) << "\n\n"
       << wrap_tag("instructions", instructions) << "\n\n"
       << wrap_tag("conversation", conversation) << "\n\n"
       << wrap_tag("report", existing_report.empty() ? "(no report yet)" : existing_report);
    return os.str();
}

std::string repair_user(std::string_view problem) {
    return "The report you produced does not follow the required structure: " + std::string(problem) +
           "\nReply with the corrected complete report using every required heading.";
}

std::string filter_system() {
    return "From the passage, copy the sentence or sentences that directly answer the query, exactly as written, "
           "one per line. Do not paraphrase. If nothing is relevant reply NONE.";
}

std::string filter_user(std::string_view query, std::string_view passage) {
    return wrap_tag("query", query) + "\n\n" + wrap_tag("passage", passage);
}

}  // namespace clausekit::prompts

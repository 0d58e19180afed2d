#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

// Prompt templates for every model call the engine makes. Inputs are wrapped
// in XML-style tags (<question>, <report>, <conversation>, ...) so that both
// real models and the offline rule-based client can locate them.
namespace clausekit::prompts {

/// Sentence the interrogator is told to emit when it has enough evidence.
inline constexpr std::string_view kConfidencePhrase =
    "Thank you, I am now in a position to answer the question with confidence.";

/// Report skeleton headings, in order.
inline constexpr std::string_view kTitleHeading = "## Title:";
inline constexpr std::string_view kSummaryHeading = "### Summary:";
inline constexpr std::string_view kReasoningHeading = "### Legal Reasoning & Analysis:";
inline constexpr std::string_view kAnswerHeading = "### Preliminary Answer & Direction for Further Research:";
inline constexpr std::string_view kGapsHeading = "### Gaps & Next Questions:";
inline constexpr std::string_view kSourcesHeading = "### Sources:";

/// Text between <tag> and </tag>, or empty.
std::string extract_tag(std::string_view text, std::string_view tag);
std::string wrap_tag(std::string_view tag, std::string_view body);

std::string parse_system();
std::string parse_user(std::string_view document);

std::string summary_system();
std::string summary_user(std::string_view filename, std::string_view document);

std::string archivist_system();
std::string archivist_finalize_system();
std::string archivist_finalize_user(std::string_view transcript);

std::string interrogator_system(std::size_t remaining_questions);
std::string interrogator_user(std::string_view report_markdown, std::span<const std::string> questions,
                              std::string_view user_query);

struct ToolDescription {
    std::string name;
    std::string description;
};
std::string researcher_query_system(std::span<const ToolDescription> tools);
std::string researcher_query_user(std::string_view question);

std::string researcher_answer_system();
std::string researcher_answer_user(std::string_view question, std::string_view evidence);

std::string refine_system();
std::string refine_user(std::string_view query, std::string_view context, std::string_view instructions,
                        std::string_view conversation, std::string_view existing_report);
std::string repair_user(std::string_view problem);

std::string filter_system();
std::string filter_user(std::string_view query, std::string_view passage);

}  // namespace clausekit::prompts

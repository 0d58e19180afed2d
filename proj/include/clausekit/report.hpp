#pragma once

#include "clausekit/error.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace clausekit::report {

struct Source {
    int number = 0;
    std::string quote;
    std::string locator;  // clause / section / page descriptor
    std::string filename;
    friend bool operator==(const Source&, const Source&) = default;
};

struct Report {
    std::string title;
    std::string summary;
    std::string legal_reasoning;
    std::string preliminary_answer;
    std::vector<std::string> gaps_and_questions;
    std::vector<Source> sources;
    friend bool operator==(const Report&, const Report&) = default;
};

inline constexpr std::string_view kDisclaimer =
    "This report was produced by an automated assistive tool. It is not legal advice.";

/// Splits markdown on the six report headings (matched case-insensitively,
/// trailing colon optional). Text under unknown headings stays in the
/// preceding known section. Throws SchemaViolation naming what is missing.
Report parse_report_markdown(std::string_view markdown);

/// First problem found, or nullopt: empty sections, empty gaps (unless
/// allowed), non-consecutive source numbers, unresolved [n] citations.
std::optional<std::string> validate(const Report& report, bool allow_empty_gaps = false);

/// Markdown with the fixed heading skeleton. Parses back to the same Report.
std::string render_markdown(const Report& report, bool with_disclaimer = false);

std::string to_json(const Report& report, int indent = -1);
Report from_json(std::string_view json);

enum class NliLabel { entailment, contradiction, neutral, unknown };
std::string_view to_string(NliLabel label);

/// Looks in the preliminary answer, then the reasoning. An emphasized label
/// (**X**, __X__, *X*, _X_) beats a plain one; among equals the last wins.
/// Only standalone uppercase tokens count.
NliLabel extract_nli_label(const Report& report);

}  // namespace clausekit::report

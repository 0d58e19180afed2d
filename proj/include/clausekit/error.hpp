#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clausekit {

enum class ErrorCode {
    invalid_argument,
    upstream,
    timeout,
    auth,
    schema_violation,
    degenerate_question,
    dimension_mismatch,
    span_out_of_bounds,
    empty_graph,
    empty_ground_truth,
    not_found,
    config,
    bind,
    io,
};

std::string_view to_string(ErrorCode code);

/// Typed failure carried through every layer. `stage` names the pipeline
/// step that raised it ("bm25", "rerank", "interrogator", ...), and is what
/// the HTTP layer reports in its error bodies.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string stage, const std::string& message)
        : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }

    /// Same error re-tagged with the stage that observed it.
    Error with_stage(std::string stage) const { return Error(code_, std::move(stage), what()); }

private:
    ErrorCode code_;
    std::string stage_;
};

}  // namespace clausekit

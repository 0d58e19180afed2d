#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace clausekit {

/// Half-open byte interval [start, end) into a UTF-8 source document.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end > start ? end - start : 0; }
    bool empty() const noexcept { return end <= start; }
    bool overlaps(const Span& o) const noexcept { return start < o.end && o.start < end; }
    bool contains(const Span& o) const noexcept { return start <= o.start && o.end <= end; }
    friend bool operator==(const Span&, const Span&) = default;
};

namespace text {

/// Collapse whitespace runs to one space and trim both ends.
std::string normalize_whitespace(std::string_view s);

/// normalize_whitespace followed by lowercasing; the dedup key for chunks.
std::string normalize_for_dedup(std::string_view s);

std::string_view trim(std::string_view s);

bool is_blank(std::string_view s);

/// Word tokens for lexical search: lowercase, maximal runs of alphanumeric
/// code points. Non-ASCII code points count as word characters unless they
/// fall in a punctuation/space block. No stemming, no stop words.
std::vector<std::string> tokenize(std::string_view s);

/// Largest offset <= pos that does not split a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t pos);

std::string to_lower_ascii(std::string_view s);

/// 64-bit FNV-1a; stable across platforms, used for ids and cassette keys.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace text
}  // namespace clausekit

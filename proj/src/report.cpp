#include "clausekit/report.hpp"

#include "clausekit/prompts.hpp"
#include "clausekit/text.hpp"

#include <json.hpp>

#include <array>
#include <regex>
#include <sstream>

namespace clausekit::report {
namespace {

enum Section { kTitle, kSummary, kReasoning, kAnswer, kGaps, kSources, kSectionCount };

constexpr std::array<std::string_view, kSectionCount> kHeadings{
    prompts::kTitleHeading,     prompts::kSummaryHeading, prompts::kReasoningHeading,
    prompts::kAnswerHeading,    prompts::kGapsHeading,    prompts::kSourcesHeading,
};

// Heading name without the leading #'s and trailing colon, lowercased.
std::string heading_key(std::string_view heading) {
    while (!heading.empty() && heading.front() == '#') heading.remove_prefix(1);
    heading = text::trim(heading);
    if (!heading.empty() && heading.back() == ':') heading.remove_suffix(1);
    std::string k = text::to_lower_ascii(text::trim(heading));
    for (auto pos = k.find(" and "); pos != std::string::npos; pos = k.find(" and ")) k.replace(pos, 5, " & ");
    return k;
}

struct HeadingMatch {
    int section = -1;
    std::string inline_text;  // text after "Title:" on the same line
};

HeadingMatch match_heading(std::string_view line) {
    std::string_view t = text::trim(line);
    if (t.empty() || t.front() != '#') return {};
    std::string_view body = t;
    while (!body.empty() && body.front() == '#') body.remove_prefix(1);
    body = text::trim(body);
    const std::string lower = text::to_lower_ascii(body);
    if (lower.rfind("title", 0) == 0 && (lower.size() == 5 || lower[5] == ':' || lower[5] == ' ')) {
        std::string_view rest = body.substr(5);
        rest = text::trim(rest);
        if (!rest.empty() && rest.front() == ':') rest.remove_prefix(1);
        return {kTitle, std::string(text::trim(rest))};
    }
    const std::string key = heading_key(t);
    for (int s = kSummary; s < kSectionCount; ++s)
        if (key == heading_key(kHeadings[static_cast<std::size_t>(s)])) return {s, {}};
    return {};
}

std::string join_block(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return std::string(text::trim(out));
}

const std::regex& item_re() {
    static const std::regex re(R"(^\s*(?:[-*+]|\d+[.)])\s+(.*)$)");
    return re;
}

std::vector<std::string> parse_gaps(const std::vector<std::string>& lines) {
    std::vector<std::string> items;
    for (const auto& line : lines) {
        if (text::is_blank(line)) continue;
        std::smatch m;
        if (std::regex_match(line, m, item_re())) {
            items.emplace_back(text::trim(m[1].str()));
        } else if (!items.empty()) {
            items.back() += " " + std::string(text::trim(line));
        } else {
            items.emplace_back(text::trim(line));
        }
    }
    std::erase_if(items, [](const std::string& s) { return text::is_blank(s); });
    return items;
}

constexpr std::string_view kOpenQuote = "\xe2\x80\x9c";   // left double quotation mark
constexpr std::string_view kCloseQuote = "\xe2\x80\x9d";  // right double quotation mark

Source parse_source_body(int number, std::string body) {
    Source s;
    s.number = number;
    static const std::regex file_re(R"(\(file:\s*([^)]*)\))");
    std::smatch fm;
    if (std::regex_search(body, fm, file_re)) {
        s.filename = std::string(text::trim(fm[1].str()));
        body = fm.prefix().str() + fm.suffix().str();
    }
    std::size_t open = body.find('"');
    std::size_t open_len = 1;
    if (const auto curly = body.find(kOpenQuote); curly != std::string::npos && curly < open) {
        open = curly;
        open_len = kOpenQuote.size();
    }
    std::string rest;
    if (open != std::string::npos) {
        std::size_t close = body.rfind('"');
        std::size_t close_len = 1;
        if (const auto curly = body.rfind(kCloseQuote);
            curly != std::string::npos && (close == std::string::npos || close < open + open_len || curly > close)) {
            close = curly;
            close_len = kCloseQuote.size();
        }
        if (close != std::string::npos && close >= open + open_len) {
            s.quote = body.substr(open + open_len, close - open - open_len);
            rest = body.substr(0, open) + " " + body.substr(close + close_len);
        } else {
            s.quote = body.substr(open + open_len);
        }
    } else {
        s.quote = body;
    }
    std::string_view loc = text::trim(rest);
    auto strip_lead = [&] {
        for (;;) {
            loc = text::trim(loc);
            if (loc.starts_with("-") || loc.starts_with(":") || loc.starts_with(",")) loc.remove_prefix(1);
            else if (loc.starts_with("\xe2\x80\x94") || loc.starts_with("\xe2\x80\x93")) loc.remove_prefix(3);
            else break;
        }
    };
    strip_lead();
    s.locator = std::string(loc);
    s.quote = std::string(text::trim(s.quote));
    return s;
}

std::vector<Source> parse_sources(const std::vector<std::string>& lines) {
    static const std::regex src_re(R"(^\s*(?:(\d+)[.)]|\[(\d+)\])\s*(.*)$)");
    std::vector<std::pair<int, std::string>> items;
    for (const auto& line : lines) {
        if (text::is_blank(line)) continue;
        std::smatch m;
        if (std::regex_match(line, m, src_re)) {
            const int n = std::stoi(m[1].matched ? m[1].str() : m[2].str());
            items.emplace_back(n, std::string(text::trim(m[3].str())));
        } else if (!items.empty()) {
            items.back().second += " " + std::string(text::trim(line));
        } else {
            // Bulleted or bare sources are numbered by position.
            std::smatch b;
            std::string body = std::regex_match(line, b, item_re()) ? b[1].str() : line;
            items.emplace_back(static_cast<int>(items.size() + 1), std::string(text::trim(body)));
        }
    }
    std::vector<Source> out;
    out.reserve(items.size());
    for (auto& [n, body] : items) out.push_back(parse_source_body(n, std::move(body)));
    return out;
}

std::string one_line(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c == '\n' || c == '\r') c = ' ';
    return out;
}

}  // namespace

Report parse_report_markdown(std::string_view markdown) {
    std::array<std::vector<std::string>, kSectionCount> blocks;
    std::array<bool, kSectionCount> seen{};
    std::string inline_title;
    int current = -1;
    bool done = false;
    for (const auto& line : text::split_lines(markdown)) {
        if (done) break;
        const auto h = match_heading(line);
        if (h.section >= 0 && !seen[static_cast<std::size_t>(h.section)]) {
            current = h.section;
            seen[static_cast<std::size_t>(current)] = true;
            if (current == kTitle) inline_title = h.inline_text;
            continue;
        }
        if (current < 0) continue;
        if (current == kSources && text::trim(line) == "---") {
            done = true;
            continue;
        }
        blocks[static_cast<std::size_t>(current)].push_back(line);
    }
    std::string missing;
    for (std::size_t s = 0; s < kSectionCount; ++s)
        if (!seen[s]) missing += (missing.empty() ? "" : ", ") + std::string(kHeadings[s]);
    if (!missing.empty()) throw Error(ErrorCode::schema_violation, "report_parse", "missing heading(s): " + missing);

    Report r;
    r.title = inline_title.empty() ? join_block(blocks[kTitle]) : inline_title;
    r.summary = join_block(blocks[kSummary]);
    r.legal_reasoning = join_block(blocks[kReasoning]);
    r.preliminary_answer = join_block(blocks[kAnswer]);
    r.gaps_and_questions = parse_gaps(blocks[kGaps]);
    r.sources = parse_sources(blocks[kSources]);
    return r;
}

std::optional<std::string> validate(const Report& r, bool allow_empty_gaps) {
    if (text::is_blank(r.title)) return "title is empty";
    if (text::is_blank(r.summary)) return "summary is empty";
    if (text::is_blank(r.legal_reasoning)) return "legal reasoning is empty";
    if (text::is_blank(r.preliminary_answer)) return "preliminary answer is empty";
    if (r.gaps_and_questions.empty() && !allow_empty_gaps) return "gaps & next questions is empty";
    if (r.sources.empty()) return "sources is empty";
    for (std::size_t i = 0; i < r.sources.size(); ++i) {
        if (r.sources[i].number != static_cast<int>(i + 1))
            return "source numbers must run 1.." + std::to_string(r.sources.size()) + " consecutively";
        if (text::is_blank(r.sources[i].quote)) return "source " + std::to_string(i + 1) + " has no quote";
    }
    static const std::regex cite_re(R"(\[(\d+(?:\s*[,\-]\s*\d+)*)\])");
    static const std::regex num_re(R"(\d+)");
    const auto n_sources = static_cast<long>(r.sources.size());
    auto check = [&](const std::string& s) -> std::optional<std::string> {
        for (std::sregex_iterator it(s.begin(), s.end(), cite_re), end; it != end; ++it) {
            const std::string inner = (*it)[1].str();
            for (std::sregex_iterator n(inner.begin(), inner.end(), num_re); n != end; ++n) {
                const long v = std::stol(n->str());
                if (v < 1 || v > n_sources) return "citation [" + n->str() + "] has no matching source";
            }
        }
        return std::nullopt;
    };
    for (const std::string* s : {&r.title, &r.summary, &r.legal_reasoning, &r.preliminary_answer})
        if (auto p = check(*s)) return p;
    for (const auto& g : r.gaps_and_questions)
        if (auto p = check(g)) return p;
    return std::nullopt;
}

std::string render_markdown(const Report& r, bool with_disclaimer) {
    std::ostringstream os;
    os << prompts::kTitleHeading << " " << one_line(r.title) << "\n\n";
    os << prompts::kSummaryHeading << "\n" << r.summary << "\n\n";
    os << prompts::kReasoningHeading << "\n" << r.legal_reasoning << "\n\n";
    os << prompts::kAnswerHeading << "\n" << r.preliminary_answer << "\n\n";
    os << prompts::kGapsHeading << "\n";
    for (const auto& g : r.gaps_and_questions) os << "- " << one_line(g) << "\n";
    os << "\n" << prompts::kSourcesHeading << "\n";
    for (const auto& s : r.sources) {
        os << s.number << ". \"" << one_line(s.quote) << "\"";
        if (!s.locator.empty()) os << " - " << one_line(s.locator);
        if (!s.filename.empty()) os << " (file: " << one_line(s.filename) << ")";
        os << "\n";
    }
    if (with_disclaimer) os << "\n---\n\n_" << kDisclaimer << "_\n";
    return os.str();
}

std::string to_json(const Report& r, int indent) {
    nlohmann::ordered_json j;
    j["title"] = r.title;
    j["summary"] = r.summary;
    j["legal_reasoning"] = r.legal_reasoning;
    j["preliminary_answer"] = r.preliminary_answer;
    j["gaps_and_questions"] = r.gaps_and_questions;
    j["sources"] = nlohmann::ordered_json::array();
    for (const auto& s : r.sources)
        j["sources"].push_back({{"number", s.number}, {"quote", s.quote}, {"locator", s.locator}, {"filename", s.filename}});
    return j.dump(indent);
}

Report from_json(std::string_view json) {
    try {
        const auto j = nlohmann::json::parse(json);
        Report r;
        r.title = j.at("title").get<std::string>();
        r.summary = j.at("summary").get<std::string>();
        r.legal_reasoning = j.at("legal_reasoning").get<std::string>();
        r.preliminary_answer = j.at("preliminary_answer").get<std::string>();
        r.gaps_and_questions = j.at("gaps_and_questions").get<std::vector<std::string>>();
        for (const auto& s : j.at("sources"))
            r.sources.push_back({s.at("number").get<int>(), s.at("quote").get<std::string>(),
                                 s.value("locator", std::string()), s.value("filename", std::string())});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::schema_violation, "report_json", e.what());
    }
}

std::string_view to_string(NliLabel label) {
    switch (label) {
        case NliLabel::entailment: return "ENTAILMENT";
        case NliLabel::contradiction: return "CONTRADICTION";
        case NliLabel::neutral: return "NEUTRAL";
        case NliLabel::unknown: return "UNKNOWN";
    }
    return "UNKNOWN";
}

namespace {

bool is_word_byte(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

bool is_emph(char c) { return c == '*' || c == '_'; }

std::optional<NliLabel> scan_labels(std::string_view s) {
    struct Hit {
        std::size_t pos;
        NliLabel label;
        bool emphasized;
    };
    std::vector<Hit> hits;
    for (auto [word, label] : {std::pair{std::string_view("ENTAILMENT"), NliLabel::entailment},
                               std::pair{std::string_view("CONTRADICTION"), NliLabel::contradiction},
                               std::pair{std::string_view("NEUTRAL"), NliLabel::neutral}}) {
        for (auto pos = s.find(word); pos != std::string_view::npos; pos = s.find(word, pos + 1)) {
            const std::size_t end = pos + word.size();
            if ((pos > 0 && is_word_byte(s[pos - 1])) || (end < s.size() && is_word_byte(s[end]))) continue;
            std::size_t l = pos;
            while (l > 0 && s[l - 1] == ' ') --l;
            std::size_t r = end;
            while (r < s.size() && s[r] == ' ') ++r;
            bool emph = l > 0 && r < s.size() && is_emph(s[l - 1]) && is_emph(s[r]);
            emph = emph || (s.substr(0, pos).ends_with("\\textbf{") && end < s.size() && s[end] == '}');
            hits.push_back({pos, label, emph});
        }
    }
    if (hits.empty()) return std::nullopt;
    const Hit* best = nullptr;
    for (const auto& h : hits) {
        if (best == nullptr || h.emphasized > best->emphasized ||
            (h.emphasized == best->emphasized && h.pos > best->pos))
            best = &h;
    }
    return best->label;
}

}  // namespace

NliLabel extract_nli_label(const Report& report) {
    if (auto l = scan_labels(report.preliminary_answer)) return *l;
    if (auto l = scan_labels(report.legal_reasoning)) return *l;
    return NliLabel::unknown;
}

}  // namespace clausekit::report

#include "clausekit/doctree.hpp"

#include "clausekit/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <regex>

namespace clausekit::doctree {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Line {
    std::size_t start = 0;  // first byte of the line
    std::size_t end = 0;    // one past the last byte, excluding '\n'
    std::size_t content = 0;  // first non-whitespace byte
    std::size_t indent = 0;   // columns, tab = 4
    bool blank = true;
};

std::vector<Line> scan_lines(std::string_view text) {
    std::vector<Line> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        Line line{pos, nl, pos, 0, true};
        std::size_t i = pos;
        while (i < nl && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r' || text[i] == '\f' || text[i] == '\v')) {
            line.indent += text[i] == '\t' ? 4 : 1;
            ++i;
        }
        line.content = i;
        line.blank = text::is_blank(text.substr(i, nl - i));
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

int roman_value(std::string_view s) {
    auto digit = [](char c) {
        switch (std::tolower(static_cast<unsigned char>(c))) {
            case 'i': return 1;
            case 'v': return 5;
            case 'x': return 10;
            case 'l': return 50;
            case 'c': return 100;
            default: return 0;
        }
    };
    if (s.empty()) return 0;
    int total = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const int v = digit(s[i]);
        if (v == 0) return 0;
        const int next = i + 1 < s.size() ? digit(s[i + 1]) : 0;
        total += v < next ? -v : v;
    }
    if (total <= 0 || total > 199) return 0;
    // Reject non-canonical spellings ("iiii", "vx") by re-encoding.
    static const std::pair<int, const char*> table[] = {{100, "c"}, {90, "xc"}, {50, "l"}, {40, "xl"}, {10, "x"},
                                                        {9, "ix"},  {5, "v"},   {4, "iv"}, {1, "i"}};
    std::string canon;
    int rest = total;
    for (const auto& [v, sym] : table) {
        while (rest >= v) {
            canon += sym;
            rest -= v;
        }
    }
    return text::to_lower_ascii(s) == canon ? total : 0;
}

bool all_caps_heading(std::string_view content) {
    if (content.size() > 100) return false;
    int letters = 0;
    for (char c : content) {
        const auto u = static_cast<unsigned char>(c);
        if (std::islower(u)) return false;
        if (std::isupper(u)) ++letters;
    }
    return letters >= 3;
}

bool heading_like(std::string_view rest_of_line) {
    const auto t = text::trim(rest_of_line);
    if (t.empty()) return true;
    if (t.size() > 80) return false;
    const char last = t.back();
    return last != '.' && last != ';' && last != ',';
}

struct Classified {
    Cue cue = Cue::none;
    NodeKind kind = NodeKind::paragraph;
    std::string label;
    int level = 0;
    std::vector<int> numbers;
};

// Tracks open enumerations so "(i)" after "(h)" stays alphabetic.
struct ListState {
    char last_alpha = 0;
    bool roman_open = false;
};

std::vector<int> split_numbers(const std::string& dotted) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < dotted.size()) {
        auto dot = dotted.find('.', pos);
        if (dot == std::string::npos) dot = dotted.size();
        if (dot > pos) out.push_back(std::stoi(dotted.substr(pos, dot - pos)));
        pos = dot + 1;
    }
    return out;
}

std::optional<Classified> classify_numbering(std::string_view content, ListState& lists) {
    static const std::regex decimal_re(
        R"(^((?:(?:Section|SECTION|Article|ARTICLE|Clause|CLAUSE)\s+)?)(\d{1,3}(?:\.\d{1,3})*)([.)]?)(?=\s|$))");
    static const std::regex keyword_roman_re(R"(^((?:Section|SECTION|Article|ARTICLE)\s+)([IVXLC]+)\b\.?(?=\s|$))");
    static const std::regex upper_roman_re(R"(^([IVXLC]+)\.(?=\s|$))");
    static const std::regex paren_re(R"(^(\(([A-Za-z]{1,4}|\d{1,3})\)|([a-z]{1,4})\))(?=\s|$))");

    const std::string s(content.substr(0, std::min<std::size_t>(content.size(), 64)));
    std::smatch m;
    if (std::regex_search(s, m, decimal_re)) {
        const bool keyword = m[1].length() > 0;
        const std::string dotted = m[2].str();
        const bool multi = dotted.find('.') != std::string::npos;
        if (keyword || multi || m[3].length() > 0) {
            Classified c;
            c.cue = Cue::decimal;
            c.label = m[0].str();
            c.numbers = split_numbers(dotted);
            c.level = static_cast<int>(c.numbers.size());
            const auto rest = content.substr(static_cast<std::size_t>(m[0].length()));
            const auto first_line = rest.substr(0, rest.find('\n'));
            c.kind = (c.numbers.size() == 1 && heading_like(first_line)) ? NodeKind::title : NodeKind::clause;
            lists = {};
            return c;
        }
    }
    int roman = 0;
    if (std::regex_search(s, m, keyword_roman_re)) {
        roman = roman_value(m[2].str());
    } else if (std::regex_search(s, m, upper_roman_re)) {
        roman = roman_value(m[1].str());
    }
    if (roman > 0) {
        Classified c;
        c.cue = Cue::decimal;
        c.label = m[0].str();
        c.numbers = {roman};
        c.level = 1;
        const auto rest = content.substr(static_cast<std::size_t>(m[0].length()));
        c.kind = heading_like(rest.substr(0, rest.find('\n'))) ? NodeKind::title : NodeKind::clause;
        lists = {};
        return c;
    }
    if (std::regex_search(s, m, paren_re)) {
        const std::string inner = m[2].matched ? m[2].str() : m[3].str();
        const std::string lower = text::to_lower_ascii(inner);
        const bool digits = std::isdigit(static_cast<unsigned char>(inner[0])) != 0;
        const bool roman_ok = !digits && roman_value(lower) > 0;
        bool is_roman = false;
        if (roman_ok) {
            if (lower.size() == 1) {
                const char prev = static_cast<char>(lower[0] - 1);
                const bool continues_alpha = lists.last_alpha != 0 && std::tolower(lists.last_alpha) == prev;
                if (lower == "i") {
                    is_roman = !continues_alpha;
                } else if (lower == "v" || lower == "x") {
                    is_roman = lists.roman_open && !continues_alpha;
                }
            } else {
                is_roman = true;
            }
        }
        if (!is_roman && !digits && inner.size() > 1) {
            // multi-letter non-roman: only "aa", "bb" style
            if (!std::all_of(inner.begin(), inner.end(), [&](char c) { return c == inner[0]; })) return std::nullopt;
        }
        Classified c;
        c.cue = is_roman ? Cue::roman : Cue::alpha;
        c.kind = NodeKind::list_item;
        c.label = m[1].str();
        if (is_roman) {
            lists.roman_open = true;
        } else {
            lists.roman_open = false;
            lists.last_alpha = digits ? 0 : inner.back();
        }
        return c;
    }
    return std::nullopt;
}

std::optional<Classified> classify_heading(std::string_view content) {
    std::size_t hashes = 0;
    while (hashes < content.size() && content[hashes] == '#') ++hashes;
    if (hashes >= 1 && hashes <= 6 && (hashes == content.size() || content[hashes] == ' ' || content[hashes] == '\t')) {
        Classified c;
        c.cue = Cue::heading;
        c.kind = NodeKind::title;
        c.level = static_cast<int>(hashes);
        c.label = std::string(text::trim(content.substr(hashes)));
        return c;
    }
    if (all_caps_heading(content)) {
        Classified c;
        c.cue = Cue::heading;
        c.kind = NodeKind::title;
        c.level = 1;
        c.label = std::string(text::trim(content));
        return c;
    }
    return std::nullopt;
}

Span trimmed_span(std::string_view text, std::size_t start, std::size_t end) {
    while (start < end && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
    while (end > start && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return {start, end};
}

SectionNode make_node(NodeId id, const SectionBoundary& b, std::string_view text) {
    SectionNode n;
    n.id = id;
    n.kind = b.kind;
    n.label = b.label;
    n.span = b.span;
    n.text = std::string(text.substr(b.span.start, b.span.length()));
    return n;
}

DocumentTree empty_tree(std::string_view text) {
    DocumentTree tree;
    tree.source_text = std::string(text);
    SectionNode root;
    root.kind = NodeKind::root;
    root.span = {0, text.size()};
    tree.nodes.push_back(std::move(root));
    return tree;
}

bool is_prefix(const std::vector<int>& a, const std::vector<int>& b) {
    return a.size() < b.size() && std::equal(a.begin(), a.end(), b.begin());
}

DocumentTree fallback_tree(std::string_view raw, std::size_t window) {
    DocumentTree tree = empty_tree(raw);
    tree.parse_mode = ParseMode::fallback_flat;
    if (window == 0) window = 1000;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t end = std::min(raw.size(), pos + window);
        const std::size_t floored = text::utf8_floor(raw, end);
        if (floored > pos) end = floored;
        const auto piece = raw.substr(pos, end - pos);
        if (!text::is_blank(piece)) {
            SectionNode n;
            n.id = tree.nodes.size();
            n.kind = NodeKind::paragraph;
            n.span = {pos, end};
            n.text = std::string(piece);
            n.depth = 1;
            n.parent = kRootId;
            tree.nodes[kRootId].children.push_back(n.id);
            tree.nodes.push_back(std::move(n));
        }
        pos = end;
    }
    return tree;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::root: return "root";
        case NodeKind::title: return "title";
        case NodeKind::clause: return "clause";
        case NodeKind::paragraph: return "paragraph";
        case NodeKind::list_item: return "list_item";
    }
    return "paragraph";
}

std::string_view to_string(ParseMode mode) {
    return mode == ParseMode::structural ? "structural" : "fallback_flat";
}

namespace {
NodeKind kind_from_string(std::string_view s) {
    if (s == "root") return NodeKind::root;
    if (s == "title") return NodeKind::title;
    if (s == "clause") return NodeKind::clause;
    if (s == "list_item") return NodeKind::list_item;
    return NodeKind::paragraph;
}
}  // namespace

std::vector<NodeId> DocumentTree::ancestors(NodeId id) const {
    std::vector<NodeId> chain;
    auto p = nodes.at(id).parent;
    while (p && *p != root) {
        chain.push_back(*p);
        p = nodes.at(*p).parent;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

std::vector<NodeId> DocumentTree::descendants(NodeId id) const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack(nodes.at(id).children.rbegin(), nodes.at(id).children.rend());
    while (!stack.empty()) {
        const NodeId cur = stack.back();
        stack.pop_back();
        out.push_back(cur);
        const auto& ch = nodes.at(cur).children;
        stack.insert(stack.end(), ch.rbegin(), ch.rend());
    }
    return out;
}

std::vector<SectionBoundary> detect_sections(std::string_view text, const ParseOptions& options) {
    std::vector<SectionBoundary> out;
    const auto lines = scan_lines(text);
    ListState lists;
    bool after_blank = true;
    std::size_t open_start = 0;
    bool open = false;
    std::size_t last_nonblank_end = 0;

    auto close_open = [&](std::size_t end) {
        if (!open) return;
        out.back().span = trimmed_span(text, open_start, end);
        open = false;
    };

    for (const auto& line : lines) {
        if (line.blank) {
            after_blank = true;
            continue;
        }
        const auto content = text.substr(line.content, text.size() - line.content);
        std::optional<Classified> cls;
        if (options.numbering) cls = classify_numbering(content, lists);
        if (!cls && options.headings) {
            cls = classify_heading(text.substr(line.content, line.end - line.content));
            if (cls) lists = {};
        }
        const bool starts_paragraph = !cls && (after_blank && (options.paragraphs || !open));
        if (cls || starts_paragraph || !open) {
            close_open(last_nonblank_end);
            SectionBoundary b;
            if (cls) {
                b.kind = cls->kind;
                b.label = cls->label;
                b.cue = cls->cue;
                b.level = cls->cue == Cue::alpha || cls->cue == Cue::roman ? static_cast<int>(line.indent) : cls->level;
                b.numbers = cls->numbers;
            } else {
                b.kind = NodeKind::paragraph;
                b.cue = Cue::none;
                b.level = options.indentation ? static_cast<int>(line.indent) : 0;
            }
            b.span = {line.content, line.end};
            out.push_back(std::move(b));
            open = true;
            open_start = line.content;
        }
        last_nonblank_end = line.end;
        after_blank = false;
    }
    close_open(last_nonblank_end);
    return out;
}

DocumentTree build_hierarchy(const std::vector<SectionBoundary>& boundaries, std::string_view text) {
    DocumentTree tree = empty_tree(text);
    tree.parse_mode = ParseMode::structural;

    struct Open {
        NodeId id;
        const SectionBoundary* b;
    };
    std::vector<Open> stack;  // root is implicit below the stack

    auto top_is = [&](auto pred) { return !stack.empty() && pred(*stack.back().b); };

    for (const auto& b : boundaries) {
        switch (b.cue) {
            case Cue::heading:
                while (top_is([&](const SectionBoundary& t) { return !(t.cue == Cue::heading && t.level < b.level); }))
                    stack.pop_back();
                break;
            case Cue::decimal: {
                while (top_is([&](const SectionBoundary& t) {
                    return t.cue != Cue::heading && !(t.cue == Cue::decimal && t.numbers.size() < b.numbers.size());
                }))
                    stack.pop_back();
                if (top_is([&](const SectionBoundary& t) { return t.cue == Cue::decimal && !is_prefix(t.numbers, b.numbers); })) {
                    tree.warnings.push_back("numbering '" + b.label + "' does not continue '" + stack.back().b->label +
                                            "'; attached under the last coherent ancestor");
                    while (top_is([&](const SectionBoundary& t) {
                        return t.cue == Cue::decimal && !is_prefix(t.numbers, b.numbers);
                    }))
                        stack.pop_back();
                }
                break;
            }
            case Cue::alpha:
                while (top_is([&](const SectionBoundary& t) {
                    return t.cue == Cue::roman || t.cue == Cue::none || (t.cue == Cue::alpha && t.level >= b.level);
                }))
                    stack.pop_back();
                break;
            case Cue::roman:
                while (top_is([&](const SectionBoundary& t) {
                    return t.cue == Cue::none || (t.cue == Cue::roman && t.level >= b.level);
                }))
                    stack.pop_back();
                break;
            case Cue::none:
                while (top_is([&](const SectionBoundary& t) {
                    return (t.cue == Cue::none || t.cue == Cue::alpha || t.cue == Cue::roman) && t.level >= b.level;
                }))
                    stack.pop_back();
                break;
        }

        const NodeId parent = stack.empty() ? kRootId : stack.back().id;
        // Sibling monotonicity for decimal numbering.
        if (b.cue == Cue::decimal && !tree.nodes[parent].children.empty()) {
            const NodeId prev = tree.nodes[parent].children.back();
            const auto it = std::find_if(boundaries.begin(), boundaries.end(), [&](const SectionBoundary& x) {
                return x.span == tree.nodes[prev].span;
            });
            if (it != boundaries.end() && it->cue == Cue::decimal && it->numbers.size() == b.numbers.size() &&
                it->numbers.back() >= b.numbers.back()) {
                tree.warnings.push_back("non-monotone numbering: '" + b.label + "' follows '" + it->label + "'");
            }
        }

        SectionNode n = make_node(tree.nodes.size(), b, text);
        n.parent = parent;
        n.depth = tree.nodes[parent].depth + 1;
        tree.nodes[parent].children.push_back(n.id);
        stack.push_back({n.id, &b});
        tree.nodes.push_back(std::move(n));
    }
    return tree;
}

DocumentTree parse_document(std::string_view raw, std::string filename, const ParseOptions& options) {
    const auto boundaries = detect_sections(raw, options);
    const auto cued = std::count_if(boundaries.begin(), boundaries.end(),
                                    [](const SectionBoundary& b) { return b.cue != Cue::none; });
    DocumentTree tree = static_cast<std::size_t>(cued) >= options.min_structural_sections
                            ? build_hierarchy(boundaries, raw)
                            : fallback_tree(raw, options.fallback_chunk_chars);
    tree.filename = std::move(filename);
    return tree;
}

DocumentTree parse_document_llm(std::string_view raw, std::string filename, llm::AccountedChat& chat,
                                const ParseOptions& options) {
    const std::string reply = chat.ask(llm::CallRole::llm_parse, prompts::parse_system(), prompts::parse_user(raw));

    auto fallback = [&](const std::string& why) {
        DocumentTree t = parse_document(raw, filename, options);
        t.warnings.push_back("llm parse rejected (" + why + "); used rule-based parse");
        return t;
    };

    nlohmann::json sections;
    try {
        const auto first = reply.find('[');
        const auto last = reply.rfind(']');
        if (first == std::string::npos || last == std::string::npos || last < first) return fallback("no JSON array");
        sections = nlohmann::json::parse(reply.substr(first, last - first + 1));
    } catch (const nlohmann::json::exception&) {
        return fallback("malformed JSON");
    }

    std::vector<SectionBoundary> boundaries;
    std::vector<std::size_t> starts;
    std::size_t cursor = 0;
    for (const auto& s : sections) {
        if (!s.is_object() || !s.contains("first_words") || !s["first_words"].is_string()) return fallback("bad entry");
        const std::string needle(text::trim(s["first_words"].get<std::string>()));
        if (needle.empty()) return fallback("empty anchor");
        const auto at = raw.find(needle, cursor);
        if (at == std::string_view::npos) return fallback("anchor not found: " + needle);
        SectionBoundary b;
        b.cue = Cue::heading;
        b.level = std::max(1, s.value("level", 1));
        b.kind = kind_from_string(s.value("kind", std::string("clause")));
        if (b.kind == NodeKind::root) b.kind = NodeKind::clause;
        b.label = s.value("label", std::string());
        boundaries.push_back(std::move(b));
        starts.push_back(at);
        cursor = at + needle.size();
    }
    if (boundaries.size() < options.min_structural_sections) return fallback("too few sections");

    std::vector<SectionBoundary> all;
    if (!text::is_blank(raw.substr(0, starts.front()))) {
        SectionBoundary pre;
        pre.kind = NodeKind::paragraph;
        pre.cue = Cue::none;
        pre.span = trimmed_span(raw, 0, starts.front());
        all.push_back(pre);
    }
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
        const std::size_t end = i + 1 < starts.size() ? starts[i + 1] : raw.size();
        boundaries[i].span = trimmed_span(raw, starts[i], end);
        all.push_back(boundaries[i]);
    }
    DocumentTree tree = build_hierarchy(all, raw);
    tree.filename = std::move(filename);
    return tree;
}

SummarizeOutcome summarize_document(DocumentTree tree, llm::AccountedChat& chat) {
    try {
        std::string reply = chat.ask(llm::CallRole::summarize, prompts::summary_system(),
                                     prompts::summary_user(tree.filename, tree.source_text));
        std::string summary(text::trim(reply));
        if (summary.empty()) {
            return {std::move(tree), Error(ErrorCode::upstream, "summarize", "model returned an empty summary")};
        }
        tree.summary = std::move(summary);
        return {std::move(tree), std::nullopt};
    } catch (const Error& e) {
        return {std::move(tree), e.with_stage("summarize")};
    }
}

std::optional<std::string> validate(const DocumentTree& tree) {
    if (tree.nodes.empty()) return "tree has no root";
    const auto& root = tree.nodes[tree.root];
    if (root.depth != 0 || !root.label.empty() || root.parent) return "root must have depth 0, no label, no parent";
    std::vector<int> seen(tree.nodes.size(), 0);
    std::vector<NodeId> stack{tree.root};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        if (seen[id]++) return "node " + std::to_string(id) + " reachable twice";
        const auto& n = tree.nodes[id];
        std::optional<Span> prev;
        for (NodeId c : n.children) {
            if (c >= tree.nodes.size()) return "dangling child id";
            const auto& ch = tree.nodes[c];
            if (ch.parent != id) return "child/parent mismatch at " + std::to_string(c);
            if (ch.depth != n.depth + 1) return "depth mismatch at " + std::to_string(c);
            if (prev && ch.span.start < prev->end) return "sibling spans overlap at " + std::to_string(c);
            if (id != tree.root && !(n.span.contains(ch.span) || ch.span.start >= n.span.end))
                return "child span precedes parent at " + std::to_string(c);
            if (ch.span.end > tree.source_text.size()) return "span out of bounds at " + std::to_string(c);
            prev = ch.span;
            stack.push_back(c);
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) return "orphan node " + std::to_string(i);
    if (tree.summary && tree.summary->empty()) return "summary present but empty";
    return std::nullopt;
}

std::string normalized_concatenation(const DocumentTree& tree) {
    std::vector<const SectionNode*> order;
    for (const auto& n : tree.nodes)
        if (n.id != tree.root) order.push_back(&n);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->span.start < b->span.start; });
    std::string joined;
    std::size_t prev_end = 0;
    for (const auto* n : order) {
        if (n->span.start > prev_end) joined.push_back(' ');
        joined += n->text;
        prev_end = n->span.end;
    }
    return text::normalize_whitespace(joined);
}

std::string to_json(const DocumentTree& tree, int indent) {
    ordered_json j;
    j["filename"] = tree.filename;
    j["parse_mode"] = to_string(tree.parse_mode);
    j["summary"] = tree.summary ? ordered_json(*tree.summary) : ordered_json(nullptr);
    j["warnings"] = tree.warnings;
    ordered_json nodes = ordered_json::array();
    for (const auto& n : tree.nodes) {
        ordered_json o;
        o["id"] = n.id;
        o["kind"] = to_string(n.kind);
        o["label"] = n.label;
        o["start"] = n.span.start;
        o["end"] = n.span.end;
        o["depth"] = n.depth;
        o["parent"] = n.parent ? ordered_json(*n.parent) : ordered_json(nullptr);
        nodes.push_back(std::move(o));
    }
    j["nodes"] = std::move(nodes);
    return j.dump(indent);
}

DocumentTree tree_from_json(std::string_view json, std::string source_text) {
    const auto j = nlohmann::json::parse(json);
    DocumentTree tree;
    tree.filename = j.at("filename").get<std::string>();
    tree.parse_mode = j.at("parse_mode").get<std::string>() == "structural" ? ParseMode::structural : ParseMode::fallback_flat;
    if (!j.at("summary").is_null()) tree.summary = j.at("summary").get<std::string>();
    tree.warnings = j.value("warnings", std::vector<std::string>{});
    tree.source_text = std::move(source_text);
    for (const auto& o : j.at("nodes")) {
        SectionNode n;
        n.id = o.at("id").get<NodeId>();
        n.kind = kind_from_string(o.at("kind").get<std::string>());
        n.label = o.at("label").get<std::string>();
        n.span = {o.at("start").get<std::size_t>(), o.at("end").get<std::size_t>()};
        n.depth = o.at("depth").get<std::size_t>();
        if (!o.at("parent").is_null()) n.parent = o.at("parent").get<NodeId>();
        if (n.span.end > tree.source_text.size()) throw Error(ErrorCode::io, "doctree", "node span exceeds source text");
        if (n.kind != NodeKind::root) n.text = tree.source_text.substr(n.span.start, n.span.length());
        if (n.id != tree.nodes.size()) throw Error(ErrorCode::io, "doctree", "node ids must be dense and ordered");
        tree.nodes.push_back(std::move(n));
    }
    for (const auto& n : tree.nodes)
        if (n.parent) tree.nodes.at(*n.parent).children.push_back(n.id);
    return tree;
}

}  // namespace clausekit::doctree

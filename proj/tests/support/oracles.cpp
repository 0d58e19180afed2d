#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracles {

std::vector<double> bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
                         double k1, double b) {
    const std::size_t n = docs.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    std::size_t total = 0;
    for (const auto& d : docs) total += d.size();
    const double avgdl = static_cast<double>(total) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        double score = 0.0;
        for (const auto& term : query) {
            std::size_t df = 0;
            for (const auto& d : docs)
                if (std::find(d.begin(), d.end(), term) != d.end()) ++df;
            if (df == 0) continue;
            const auto tf = static_cast<std::size_t>(std::count(docs[i].begin(), docs[i].end(), term));
            if (tf == 0) continue;
            const double idf = std::log(1.0 + (static_cast<double>(n) - static_cast<double>(df) + 0.5) /
                                                  (static_cast<double>(df) + 0.5));
            const double f = static_cast<double>(tf);
            const double norm = k1 * (1.0 - b + b * static_cast<double>(docs[i].size()) / avgdl);
            score += idf * (f * (k1 + 1.0)) / (f + norm);
        }
        out[i] = score;
    }
    return out;
}

std::vector<Fused> rrf(const std::vector<std::vector<std::string>>& rankings, const std::vector<double>& weights,
                       double k) {
    std::vector<std::string> ids;
    for (const auto& r : rankings)
        for (const auto& id : r)
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    std::vector<Fused> out;
    for (const auto& id : ids) {
        double s = 0.0;
        for (std::size_t i = 0; i < rankings.size(); ++i) {
            for (std::size_t r = 0; r < rankings[i].size(); ++r)
                if (rankings[i][r] == id) s += weights[i] / (k + static_cast<double>(r + 1));
        }
        out.push_back({id, s});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t best = i;
        for (std::size_t j = i + 1; j < out.size(); ++j) {
            const bool better = out[j].score > out[best].score || (out[j].score == out[best].score && out[j].id < out[best].id);
            if (better) best = j;
        }
        std::swap(out[i], out[best]);
    }
    return out;
}

PR char_bitmap(const std::vector<clausekit::Span>& retrieved, const std::vector<clausekit::Span>& truth, std::size_t k,
               std::size_t n) {
    std::vector<bool> r(n, false), t(n, false);
    for (std::size_t i = 0; i < std::min(k, retrieved.size()); ++i)
        for (std::size_t c = retrieved[i].start; c < retrieved[i].end && c < n; ++c) r[c] = true;
    for (const auto& s : truth)
        for (std::size_t c = s.start; c < s.end && c < n; ++c) t[c] = true;
    std::size_t both = 0, rs = 0, ts = 0;
    for (std::size_t c = 0; c < n; ++c) {
        both += (r[c] && t[c]) ? 1 : 0;
        rs += r[c] ? 1 : 0;
        ts += t[c] ? 1 : 0;
    }
    return {rs == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(rs),
            ts == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(ts)};
}

}  // namespace oracles

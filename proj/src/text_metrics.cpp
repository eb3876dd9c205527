#include "decitool/text_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>

#include "decitool/error.hpp"

namespace decitool {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts out;
    if (tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return out;
}

double f1(std::size_t overlap, std::size_t cand_total, std::size_t ref_total) {
    if (overlap == 0 || cand_total == 0 || ref_total == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(cand_total);
    const double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
    return 2.0 * p * r / (p + r);
}

double rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t n) {
    const auto c = ngrams(cand, n);
    const auto r = ngrams(ref, n);
    std::size_t overlap = 0, c_total = 0, r_total = 0;
    for (const auto& [g, cnt] : c) {
        c_total += cnt;
        auto it = r.find(g);
        if (it != r.end()) overlap += std::min(cnt, it->second);
    }
    for (const auto& [g, cnt] : r) r_total += cnt;
    return f1(overlap, c_total, r_total);
}

}  // namespace

std::vector<std::string> metric_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double bleu(std::string_view candidate, std::span<const std::string> references, std::size_t max_n) {
    if (max_n == 0) throw InvalidArgument("bleu: max_n must be at least 1");
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) {
        auto t = metric_tokens(r);
        if (!t.empty()) refs.push_back(std::move(t));
    }
    if (refs.empty()) throw EmptyReference("bleu: no non-empty reference");

    const auto cand = metric_tokens(candidate);
    if (cand.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto c = ngrams(cand, n);
        NgramCounts max_ref;
        for (const auto& r : refs) {
            for (const auto& [g, cnt] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], cnt);
        }
        std::size_t clipped = 0, total = 0;
        for (const auto& [g, cnt] : c) {
            total += cnt;
            auto it = max_ref.find(g);
            if (it != max_ref.end()) clipped += std::min(cnt, it->second);
        }
        double p;
        if (clipped > 0) {
            p = static_cast<double>(clipped) / static_cast<double>(total);
        } else if (n == 1) {
            return 0.0;
        } else {
            p = 1.0 / static_cast<double>(total + 1);
        }
        log_sum += std::log(p);
    }

    const auto c_len = static_cast<long>(cand.size());
    long r_len = static_cast<long>(refs.front().size());
    for (const auto& r : refs) {
        const long len = static_cast<long>(r.size());
        const long d = std::labs(len - c_len), best = std::labs(r_len - c_len);
        if (d < best || (d == best && len < r_len)) r_len = len;
    }
    const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c_len));
    return bp * std::exp(log_sum / static_cast<double>(max_n));
}

double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n) {
    const std::string refs[] = {std::string(reference)};
    return bleu(candidate, std::span<const std::string>(refs), max_n);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScores rouge(std::string_view candidate, std::string_view reference) {
    const auto cand = metric_tokens(candidate);
    const auto ref = metric_tokens(reference);
    RougeScores s;
    s.rouge1_f = rouge_n(cand, ref, 1);
    s.rouge2_f = rouge_n(cand, ref, 2);
    s.rougeL_f = f1(lcs_length(cand, ref), cand.size(), ref.size());
    return s;
}

}  // namespace decitool

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace decitool {

/// Lowercased runs of ASCII letters and digits.
std::vector<std::string> metric_tokens(std::string_view text);

/// Sentence BLEU against one or more references. Orders n >= 2 with no
/// matching n-gram use (0 + 1) / (total + 1). Throws EmptyReference when no
/// reference has a token.
double bleu(std::string_view candidate, std::span<const std::string> references, std::size_t max_n = 4);
double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n = 4);

struct RougeScores {
    double rouge1_f = 0.0;
    double rouge2_f = 0.0;
    double rougeL_f = 0.0;
};

RougeScores rouge(std::string_view candidate, std::string_view reference);

/// Length of the longest common subsequence of two token lists.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace decitool

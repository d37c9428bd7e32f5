#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace glyphalign {

struct TranscriptPair {
    std::string ground_truth;
    std::string predicted;
    std::string lang;
    std::string box_id;
};

struct EvalOptions {
    enum class Normalization { None, Nfc };
    Normalization normalization = Normalization::None;
    bool trim_trailing_whitespace = false;
};

/// Counts from a minimal-edit (unit cost) alignment. Among all minimal-cost
/// alignments the one with the most matches is used, which makes the counts
/// well defined without reference to a particular backtrace order.
struct EditCounts {
    std::int64_t matches = 0;
    std::int64_t substitutions = 0;
    std::int64_t deletions = 0;
    std::int64_t insertions = 0;
    std::int64_t distance = 0;
};

EditCounts edit_align(std::span<const char32_t> ground_truth, std::span<const char32_t> predicted);

/// Alignment operations as one char per step: '=' match, '*' substitution,
/// '-' deletion, '+' insertion. Same convention as edit_align.
std::string edit_alignment_ops(std::span<const char32_t> ground_truth,
                               std::span<const char32_t> predicted);

/// Fraction of ground-truth characters reproduced correctly:
/// (|gt| - substitutions - deletions) / |gt|, in [0,1]. Insertions are
/// tracked separately and do not lower the score. Throws EmptyGroundTruthError.
double char_precision(const TranscriptPair& pair, const EvalOptions& options = {});

/// 1 iff predicted equals ground truth exactly after the configured
/// preprocessing, else 0.
int sentence_precision(const TranscriptPair& pair, const EvalOptions& options = {});

struct LanguageStats {
    double char_precision = 0.0;     // weighted by ground-truth length
    double sentence_precision = 0.0; // mean of per-box indicators
    double insertion_rate = 0.0;     // insertions per ground-truth character
    std::int64_t box_count = 0;
    std::int64_t char_count = 0;
};

struct PrecisionReport {
    std::map<std::string, LanguageStats> per_language;
    LanguageStats overall;
};

/// Throws EmptyInputError on an empty pair list.
PrecisionReport aggregate(const std::vector<TranscriptPair>& pairs,
                          const EvalOptions& options = {});

/// Parses JSONL lines of {"gt","pred","lang","box"}; blank lines are skipped.
/// Throws ValidationError naming the offending line number.
std::vector<TranscriptPair> parse_pairs_jsonl(std::istream& input);

std::string to_json(const PrecisionReport& report);

/// Human-readable gt/pred/ops triples for each pair.
std::string format_aligned_diff(const std::vector<TranscriptPair>& pairs,
                                const EvalOptions& options = {});

} // namespace glyphalign

#include "glyphalign/eval.hpp"

#include "glyphalign/errors.hpp"
#include "glyphalign/unicode.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <istream>

namespace glyphalign {

namespace {

bool is_trimmable_ws(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\x0b' ||
           cp == U'\f' || cp == 0x00A0 || cp == 0x3000;
}

std::u32string preprocess(const std::string& utf8, const EvalOptions& options) {
    std::string text(utf8);
    if (options.normalization == EvalOptions::Normalization::Nfc) text = normalize_nfc(text);
    std::u32string decoded = utf8_decode(text);
    if (options.trim_trailing_whitespace) {
        while (!decoded.empty() && is_trimmable_ws(decoded.back())) decoded.pop_back();
    }
    return decoded;
}

struct CellScore {
    std::int32_t cost;
    std::int32_t matches;
};

// Lexicographic improvement: lower cost first, then more matches.
inline bool better(CellScore a, CellScore b) {
    return a.cost < b.cost || (a.cost == b.cost && a.matches > b.matches);
}

EditCounts counts_from(std::int64_t gt_len, std::int64_t pred_len, CellScore final) {
    EditCounts counts;
    counts.distance = final.cost;
    counts.matches = final.matches;
    counts.substitutions = gt_len + pred_len - 2 * final.matches - final.cost;
    counts.deletions = gt_len - final.matches - counts.substitutions;
    counts.insertions = pred_len - final.matches - counts.substitutions;
    return counts;
}

} // namespace

EditCounts edit_align(std::span<const char32_t> gt, std::span<const char32_t> pred) {
    const size_t n = gt.size();
    const size_t m = pred.size();

    CellScore stack_rows[2][96];
    std::vector<CellScore> heap_rows;
    CellScore* prev;
    CellScore* curr;
    if (m + 1 <= 96) {
        prev = stack_rows[0];
        curr = stack_rows[1];
    } else {
        heap_rows.resize(2 * (m + 1));
        prev = heap_rows.data();
        curr = heap_rows.data() + (m + 1);
    }

    for (size_t j = 0; j <= m; ++j) prev[j] = {static_cast<std::int32_t>(j), 0};
    for (size_t i = 1; i <= n; ++i) {
        curr[0] = {static_cast<std::int32_t>(i), 0};
        const char32_t g = gt[i - 1];
        for (size_t j = 1; j <= m; ++j) {
            const bool match = g == pred[j - 1];
            CellScore best = {prev[j - 1].cost + (match ? 0 : 1),
                              prev[j - 1].matches + (match ? 1 : 0)};
            const CellScore del = {prev[j].cost + 1, prev[j].matches};
            if (better(del, best)) best = del;
            const CellScore ins = {curr[j - 1].cost + 1, curr[j - 1].matches};
            if (better(ins, best)) best = ins;
            curr[j] = best;
        }
        std::swap(prev, curr);
    }
    return counts_from(static_cast<std::int64_t>(n), static_cast<std::int64_t>(m), prev[m]);
}

std::string edit_alignment_ops(std::span<const char32_t> gt, std::span<const char32_t> pred) {
    const size_t n = gt.size();
    const size_t m = pred.size();
    std::vector<CellScore> table((n + 1) * (m + 1));
    auto cell = [&](size_t i, size_t j) -> CellScore& { return table[i * (m + 1) + j]; };
    for (size_t j = 0; j <= m; ++j) cell(0, j) = {static_cast<std::int32_t>(j), 0};
    for (size_t i = 1; i <= n; ++i) {
        cell(i, 0) = {static_cast<std::int32_t>(i), 0};
        for (size_t j = 1; j <= m; ++j) {
            const bool match = gt[i - 1] == pred[j - 1];
            CellScore best = {cell(i - 1, j - 1).cost + (match ? 0 : 1),
                              cell(i - 1, j - 1).matches + (match ? 1 : 0)};
            const CellScore del = {cell(i - 1, j).cost + 1, cell(i - 1, j).matches};
            if (better(del, best)) best = del;
            const CellScore ins = {cell(i, j - 1).cost + 1, cell(i, j - 1).matches};
            if (better(ins, best)) best = ins;
            cell(i, j) = best;
        }
    }
    std::string ops;
    size_t i = n, j = m;
    while (i > 0 || j > 0) {
        const CellScore here = cell(i, j);
        if (i > 0 && j > 0) {
            const bool match = gt[i - 1] == pred[j - 1];
            const CellScore diag = {cell(i - 1, j - 1).cost + (match ? 0 : 1),
                                    cell(i - 1, j - 1).matches + (match ? 1 : 0)};
            if (diag.cost == here.cost && diag.matches == here.matches) {
                ops += match ? '=' : '*';
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && cell(i - 1, j).cost + 1 == here.cost && cell(i - 1, j).matches == here.matches) {
            ops += '-';
            --i;
            continue;
        }
        ops += '+';
        --j;
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

double char_precision(const TranscriptPair& pair, const EvalOptions& options) {
    const std::u32string gt = preprocess(pair.ground_truth, options);
    if (gt.empty()) throw EmptyGroundTruthError();
    const std::u32string pred = preprocess(pair.predicted, options);
    const EditCounts counts = edit_align(gt, pred);
    const double precision = static_cast<double>(counts.matches) / static_cast<double>(gt.size());
    return std::clamp(precision, 0.0, 1.0);
}

int sentence_precision(const TranscriptPair& pair, const EvalOptions& options) {
    return preprocess(pair.ground_truth, options) == preprocess(pair.predicted, options) ? 1 : 0;
}

PrecisionReport aggregate(const std::vector<TranscriptPair>& pairs, const EvalOptions& options) {
    if (pairs.empty()) throw EmptyInputError("no transcript pairs to aggregate");

    struct Accumulator {
        std::int64_t chars = 0;
        std::int64_t matches = 0;
        std::int64_t insertions = 0;
        std::int64_t exact = 0;
        std::int64_t boxes = 0;
    };
    std::map<std::string, Accumulator> groups;
    Accumulator total;

    for (const TranscriptPair& pair : pairs) {
        const std::u32string gt = preprocess(pair.ground_truth, options);
        if (gt.empty()) throw EmptyGroundTruthError();
        const std::u32string pred = preprocess(pair.predicted, options);
        const EditCounts counts = edit_align(gt, pred);
        const int exact = gt == pred ? 1 : 0;
        for (Accumulator* acc : {&groups[pair.lang], &total}) {
            acc->chars += static_cast<std::int64_t>(gt.size());
            acc->matches += counts.matches;
            acc->insertions += counts.insertions;
            acc->exact += exact;
            acc->boxes += 1;
        }
    }

    auto to_stats = [](const Accumulator& acc) {
        LanguageStats stats;
        stats.box_count = acc.boxes;
        stats.char_count = acc.chars;
        stats.char_precision = static_cast<double>(acc.matches) / static_cast<double>(acc.chars);
        stats.sentence_precision = static_cast<double>(acc.exact) / static_cast<double>(acc.boxes);
        stats.insertion_rate = static_cast<double>(acc.insertions) / static_cast<double>(acc.chars);
        return stats;
    };

    PrecisionReport report;
    for (const auto& [lang, acc] : groups) report.per_language[lang] = to_stats(acc);
    report.overall = to_stats(total);
    return report;
}

std::vector<TranscriptPair> parse_pairs_jsonl(std::istream& input) {
    std::vector<TranscriptPair> pairs;
    std::string line;
    size_t line_number = 0;
    while (std::getline(input, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            TranscriptPair pair;
            pair.ground_truth = j.at("gt").get<std::string>();
            pair.predicted = j.at("pred").get<std::string>();
            pair.lang = j.value("lang", "unknown");
            pair.box_id = j.contains("box") && j["box"].is_string()
                              ? j["box"].get<std::string>()
                              : (j.contains("box") ? j["box"].dump() : std::to_string(line_number));
            pairs.push_back(std::move(pair));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    return pairs;
}

std::string to_json(const PrecisionReport& report) {
    nlohmann::ordered_json j;
    j["convention"] =
        "char precision = matched ground-truth characters under a minimal-edit alignment "
        "(max-match tie-break) / ground-truth length; insertions reported separately";
    auto stats_json = [](const LanguageStats& stats) {
        nlohmann::ordered_json s;
        s["char_precision"] = stats.char_precision;
        s["sentence_precision"] = stats.sentence_precision;
        s["insertion_rate"] = stats.insertion_rate;
        s["box_count"] = stats.box_count;
        s["char_count"] = stats.char_count;
        return s;
    };
    j["overall"] = stats_json(report.overall);
    j["per_language"] = nlohmann::ordered_json::object();
    for (const auto& [lang, stats] : report.per_language) j["per_language"][lang] = stats_json(stats);
    return j.dump(2);
}

std::string format_aligned_diff(const std::vector<TranscriptPair>& pairs,
                                const EvalOptions& options) {
    std::string out;
    for (const TranscriptPair& pair : pairs) {
        const std::u32string gt = preprocess(pair.ground_truth, options);
        const std::u32string pred = preprocess(pair.predicted, options);
        out += "box " + pair.box_id + " lang " + pair.lang + "\n";
        out += "  gt:   " + utf8_encode(gt) + "\n";
        out += "  pred: " + utf8_encode(pred) + "\n";
        out += "  ops:  " + edit_alignment_ops(gt, pred) + "\n";
    }
    return out;
}

} // namespace glyphalign

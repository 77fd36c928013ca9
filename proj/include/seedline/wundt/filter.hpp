// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "seedline/corpus/corpus.hpp"
#include "seedline/lines.hpp"
#include "seedline/lm/model.hpp"

namespace seedline::wundt {

inline constexpr std::size_t kDefaultNgram = 3;

/// Every word k-gram (1 <= k <= n) of a reference corpus.
class NgramIndex {
public:
    NgramIndex() = default;

    explicit NgramIndex(std::size_t n) : n_(n) {
        if (n_ < 2) throw Error(Errc::BadParams, "novelty n must be >= 2");
    }

    NgramIndex(const Corpus& corpus, std::size_t n = kDefaultNgram) : NgramIndex(n) {
        for (const auto& line : corpus.lines) add(line.text);
    }

    void add(const std::string& text) {
        const auto words = split_words(text);
        for (std::size_t k = 1; k <= n_; ++k)
            for (std::size_t i = 0; i + k <= words.size(); ++i) grams_.insert(key(words, i, k));
    }

    [[nodiscard]] std::size_t n() const noexcept { return n_; }

    [[nodiscard]] bool contains(const std::vector<std::string>& words, std::size_t begin, std::size_t k) const {
        return grams_.count(key(words, begin, k)) > 0;
    }

private:
    static std::string key(const std::vector<std::string>& words, std::size_t begin, std::size_t k) {
        std::string s;
        for (std::size_t i = begin; i < begin + k; ++i) {
            if (i > begin) s.push_back(' ');
            s += words[i];
        }
        return s;
    }

    std::size_t n_ = kDefaultNgram;
    std::unordered_set<std::string> grams_;
};

/// 1 - (line n-grams found in the reference) / (line n-grams). Lines shorter
/// than n use their own length as n. An empty line scores 0.
inline double novelty(const std::string& text, const NgramIndex& index) {
    const auto words = split_words(text);
    if (words.empty()) return 0.0;
    const std::size_t k = std::min(index.n(), words.size());
    const std::size_t total = words.size() - k + 1;
    std::size_t found = 0;
    for (std::size_t i = 0; i < total; ++i) found += index.contains(words, i, k) ? 1 : 0;
    return 1.0 - static_cast<double>(found) / static_cast<double>(total);
}

inline double novelty(const TokenizedLine& line, const Corpus& corpus, std::size_t n = kDefaultNgram) {
    return novelty(line.text, NgramIndex(corpus, n));
}

/// Surprisal band, either absolute (nats/token) or as quantiles of a
/// reference sample that are resolved to absolute bounds before filtering.
struct BandConfig {
    enum class Mode { Absolute, Quantile };
    Mode mode = Mode::Quantile;
    double low = -std::numeric_limits<double>::infinity();
    double high = std::numeric_limits<double>::infinity();
    double q_low = 0.25;
    double q_high = 0.75;
    std::size_t reference_size = 1000;

    static BandConfig absolute(double low, double high) {
        BandConfig b;
        b.mode = Mode::Absolute;
        b.low = low;
        b.high = high;
        b.validate();
        return b;
    }

    static BandConfig quantiles(double q_low, double q_high, std::size_t reference_size = 1000) {
        BandConfig b;
        b.mode = Mode::Quantile;
        b.q_low = q_low;
        b.q_high = q_high;
        b.reference_size = reference_size;
        b.validate();
        return b;
    }

    static BandConfig everything() { return absolute(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()); }

    void validate() const {
        if (mode == Mode::Absolute && !(low < high)) throw Error(Errc::BadParams, "band_low must be < band_high");
        if (mode == Mode::Quantile &&
            !(q_low > 0.0 && q_low < 1.0 && q_high > 0.0 && q_high < 1.0 && q_low < q_high))
            throw Error(Errc::BadParams, "band quantiles must satisfy 0 < q_low < q_high < 1");
        if (mode == Mode::Quantile && reference_size < 1) throw Error(Errc::BadParams, "reference_size must be >= 1");
    }

    friend bool operator==(const BandConfig&, const BandConfig&) = default;
};

namespace detail {
inline nlohmann::ordered_json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}
inline double finite_or(const nlohmann::ordered_json& j, const char* key, double fallback) {
    return j.contains(key) && !j[key].is_null() ? j[key].get<double>() : fallback;
}
} // namespace detail

inline nlohmann::ordered_json to_json(const BandConfig& b) {
    if (b.mode == BandConfig::Mode::Absolute)
        return {{"mode", "absolute"}, {"low", detail::finite_or_null(b.low)}, {"high", detail::finite_or_null(b.high)}};
    return {{"mode", "quantile"}, {"q_low", b.q_low}, {"q_high", b.q_high}, {"reference_size", b.reference_size}};
}

inline BandConfig band_config_from_json(const nlohmann::ordered_json& j) {
    const auto mode = j.value("mode", std::string("quantile"));
    BandConfig b;
    if (mode == "absolute") {
        b = BandConfig::everything();
        b.low = detail::finite_or(j, "low", -std::numeric_limits<double>::infinity());
        b.high = detail::finite_or(j, "high", std::numeric_limits<double>::infinity());
    } else if (mode == "quantile") {
        b.q_low = j.value("q_low", b.q_low);
        b.q_high = j.value("q_high", b.q_high);
        b.reference_size = j.value("reference_size", b.reference_size);
    } else {
        throw Error(Errc::BadParams, "band mode must be 'absolute' or 'quantile'");
    }
    b.validate();
    return b;
}

/// Inclusive absolute bounds.
struct ResolvedBand {
    double low = -std::numeric_limits<double>::infinity();
    double high = std::numeric_limits<double>::infinity();

    [[nodiscard]] bool contains(double s) const noexcept { return low <= s && s <= high; }
};

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(Errc::BadParams, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline ResolvedBand resolve(const BandConfig& band, std::span<const double> reference) {
    band.validate();
    if (band.mode == BandConfig::Mode::Absolute) return {band.low, band.high};
    std::vector<double> ref(reference.begin(), reference.end());
    return {quantile(ref, band.q_low), quantile(ref, band.q_high)};
}

/// Surprisal under `lm` and novelty against `index`; in_band against `band`.
inline LineScore score_line(const std::vector<TokenId>& tokens, const std::string& text, const lm::LmModel& lm,
                            const NgramIndex& index, const ResolvedBand& band) {
    LineScore s;
    s.surprisal = lm.line_surprisal(tokens);
    s.novelty = novelty(text, index);
    s.in_band = band.contains(s.surprisal);
    s.components["surprisal"] = s.surprisal;
    s.components["novelty"] = s.novelty;
    return s;
}

inline LineScore score_line(const GeneratedLine& line, const lm::LmModel& lm, const NgramIndex& index,
                            const ResolvedBand& band) {
    return score_line(line.tokens, line.text, lm, index, band);
}

struct BandReport {
    std::size_t below = 0;
    std::size_t in = 0;
    std::size_t above = 0;
    ResolvedBand band;
    std::vector<std::pair<double, double>> quantiles; // (q, value)
};

inline constexpr double kReportQuantiles[] = {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};

inline nlohmann::ordered_json to_json(const BandReport& r) {
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& [p, v] : r.quantiles) {
        char key[16];
        std::snprintf(key, sizeof key, "%.2f", p);
        q[key] = v;
    }
    return {{"counts", {{"below", r.below}, {"in", r.in}, {"above", r.above}}},
            {"band", {{"low", detail::finite_or_null(r.band.low)}, {"high", detail::finite_or_null(r.band.high)}}},
            {"quantiles", q}};
}

struct FilterResult {
    std::vector<GeneratedLine> pool;
    BandReport report;
};

/// Keeps lines whose surprisal lies in the inclusive band, in input order.
/// Kept lines carry their score with in_band set.
inline FilterResult band_filter(const std::vector<GeneratedLine>& pool, const std::vector<LineScore>& scores,
                                const ResolvedBand& band) {
    if (pool.size() != scores.size())
        throw Error(Errc::MisalignedScores, std::to_string(scores.size()) + " scores for " + std::to_string(pool.size()) + " lines");
    FilterResult r;
    r.report.band = band;
    std::vector<double> values;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double s = scores[i].surprisal;
        values.push_back(s);
        if (s < band.low) {
            ++r.report.below;
        } else if (s > band.high) {
            ++r.report.above;
        } else {
            ++r.report.in;
            GeneratedLine kept = pool[i];
            kept.score = scores[i];
            kept.score->in_band = true;
            r.pool.push_back(std::move(kept));
        }
    }
    if (!values.empty())
        for (double q : kReportQuantiles) r.report.quantiles.emplace_back(q, quantile(values, q));
    return r;
}

/// Quantile bands are resolved against the scores being filtered.
inline FilterResult band_filter(const std::vector<GeneratedLine>& pool, const std::vector<LineScore>& scores,
                                const BandConfig& band) {
    std::vector<double> s;
    for (const auto& sc : scores) s.push_back(sc.surprisal);
    if (band.mode == BandConfig::Mode::Quantile && s.empty()) return band_filter(pool, scores, ResolvedBand{});
    return band_filter(pool, scores, resolve(band, s));
}

/// Drops exact-text duplicates, keeping first occurrences in order.
inline std::vector<GeneratedLine> dedup(const std::vector<GeneratedLine>& pool) {
    std::unordered_set<std::string> seen;
    std::vector<GeneratedLine> out;
    for (const auto& l : pool)
        if (seen.insert(l.text).second) out.push_back(l);
    return out;
}

/// {"lines": [{text, surprisal, novelty, in_band}], "quantiles": {...}, ...}
inline nlohmann::ordered_json score_report(const std::vector<std::string>& texts, const std::vector<LineScore>& scores,
                                           const BandReport& report) {
    nlohmann::ordered_json lines = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < texts.size(); ++i)
        lines.push_back({{"text", texts[i]},
                         {"surprisal", scores[i].surprisal},
                         {"novelty", scores[i].novelty},
                         {"in_band", scores[i].in_band}});
    auto r = to_json(report);
    nlohmann::ordered_json j;
    j["lines"] = std::move(lines);
    j["quantiles"] = r["quantiles"];
    j["band"] = r["band"];
    j["counts"] = r["counts"];
    return j;
}

} // namespace seedline::wundt

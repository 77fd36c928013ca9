// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedline/corpus/vocabulary.hpp"

namespace seedline {

inline constexpr std::size_t kDefaultMaxLen = 15;
inline constexpr std::size_t kDefaultMinCount = 2;

/// A corpus line as word ids. Never contains PAD, SOS or EOS.
struct TokenizedLine {
    std::vector<TokenId> ids;
    std::string text;

    [[nodiscard]] std::size_t size() const noexcept { return ids.size(); }
    friend bool operator==(const TokenizedLine&, const TokenizedLine&) = default;
};

/// `text` must already be normalized. Unknown words become UNK; over-long
/// lines are rejected rather than truncated.
inline TokenizedLine encode_line(const std::string& text, const Vocabulary& vocab, std::size_t max_len = kDefaultMaxLen) {
    const auto words = split_words(text);
    if (words.empty()) throw Error(Errc::EmptyLine, "line has no tokens");
    if (words.size() > max_len)
        throw Error(Errc::TooLong, std::to_string(words.size()) + " tokens exceeds max_len " + std::to_string(max_len));
    TokenizedLine line;
    line.text = join_words(words);
    line.ids.reserve(words.size());
    for (const auto& w : words) line.ids.push_back(vocab.id(w));
    return line;
}

struct Corpus {
    std::vector<TokenizedLine> lines;
    std::vector<std::optional<std::string>> tags; // aligned with lines
    std::vector<std::string> tag_inventory;       // sorted, unique
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::size_t skipped = 0;
    std::size_t max_len = kDefaultMaxLen;

    [[nodiscard]] bool empty() const noexcept { return lines.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return lines.size(); }

    [[nodiscard]] std::vector<const TokenizedLine*> train_lines() const {
        std::vector<const TokenizedLine*> out;
        for (std::size_t i : train) out.push_back(&lines[i]);
        return out;
    }

    [[nodiscard]] std::optional<std::size_t> tag_index(const std::string& tag) const {
        auto it = std::lower_bound(tag_inventory.begin(), tag_inventory.end(), tag);
        if (it == tag_inventory.end() || *it != tag) return std::nullopt;
        return static_cast<std::size_t>(it - tag_inventory.begin());
    }
};

struct CorpusOptions {
    std::size_t min_count = kDefaultMinCount;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
    std::size_t max_len = kDefaultMaxLen;
};

namespace detail {

inline void split_corpus(Corpus& c, double val_fraction, std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw Error(Errc::BadParams, "val_fraction must be in [0, 1)");
    std::vector<std::size_t> order(c.lines.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(order.size())));
    c.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    c.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(c.validation.begin(), c.validation.end());
    std::sort(c.train.begin(), c.train.end());
}

} // namespace detail

struct LoadedCorpus {
    Corpus corpus;
    Vocabulary vocab;
};

/// Builds a corpus from raw (text, tag) records. Lines that normalize to
/// nothing or exceed max_len are skipped and counted. If `vocab` is given it
/// is used as-is, otherwise one is built from the kept lines.
inline LoadedCorpus make_corpus(const std::vector<std::pair<std::string, std::optional<std::string>>>& records,
                                const CorpusOptions& opt, const Vocabulary* vocab = nullptr) {
    LoadedCorpus out;
    std::vector<std::string> kept_text;
    std::vector<std::optional<std::string>> kept_tags;
    for (const auto& [text, tag] : records) {
        std::string norm = normalize(text);
        const auto n = split_words(norm).size();
        if (n == 0 || n > opt.max_len) {
            ++out.corpus.skipped;
            continue;
        }
        kept_text.push_back(std::move(norm));
        kept_tags.push_back(tag);
    }
    out.vocab = vocab ? *vocab : build_vocabulary(kept_text, opt.min_count);
    std::set<std::string> inventory;
    for (std::size_t i = 0; i < kept_text.size(); ++i) {
        out.corpus.lines.push_back(encode_line(kept_text[i], out.vocab, opt.max_len));
        out.corpus.tags.push_back(kept_tags[i]);
        if (kept_tags[i]) inventory.insert(*kept_tags[i]);
    }
    out.corpus.tag_inventory.assign(inventory.begin(), inventory.end());
    out.corpus.max_len = opt.max_len;
    detail::split_corpus(out.corpus, opt.val_fraction, opt.seed);
    return out;
}

inline LoadedCorpus make_corpus(const std::vector<std::string>& texts, const CorpusOptions& opt) {
    std::vector<std::pair<std::string, std::optional<std::string>>> records;
    for (const auto& t : texts) records.emplace_back(t, std::nullopt);
    return make_corpus(records, opt);
}

/// Reads JSONL records {"text": ..., "tag": ...}. Blank lines are ignored.
inline std::vector<std::pair<std::string, std::optional<std::string>>> read_corpus_records(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!std::filesystem::is_regular_file(path) || !in) throw Error(Errc::FileNotFound, path.string());
    std::vector<std::pair<std::string, std::optional<std::string>>> records;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
            throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": missing string field \"text\"");
        std::optional<std::string> tag;
        if (j.contains("tag") && !j["tag"].is_null()) {
            if (!j["tag"].is_string())
                throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": \"tag\" must be a string");
            tag = j["tag"].get<std::string>();
        }
        records.emplace_back(j["text"].get<std::string>(), std::move(tag));
    }
    return records;
}

inline LoadedCorpus load_corpus(const std::filesystem::path& path, const CorpusOptions& opt,
                                const Vocabulary* vocab = nullptr) {
    LoadedCorpus out = make_corpus(read_corpus_records(path), opt, vocab);
    if (out.corpus.skipped)
        std::clog << "seedline: skipped " << out.corpus.skipped << " unusable line(s) in " << path.string() << "\n";
    return out;
}

} // namespace seedline

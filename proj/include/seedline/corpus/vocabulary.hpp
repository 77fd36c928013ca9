// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "seedline/error.hpp"

namespace seedline {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kSos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kFirstWordId = 4;

inline bool is_special(TokenId id) noexcept { return id < kFirstWordId; }

/// Lowercases ASCII, turns punctuation into word breaks (apostrophes survive
/// only between two word characters), collapses whitespace and trims.
/// Bytes >= 0x80 are treated as word characters and passed through.
inline std::string normalize(std::string_view text) {
    auto is_word = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
    std::string mapped;
    mapped.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        // U+2019 RIGHT SINGLE QUOTATION MARK is folded into an ASCII apostrophe.
        if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
            static_cast<unsigned char>(text[i + 2]) == 0x99) {
            mapped.push_back('\'');
            i += 2;
        } else if (c < 0x80 && std::isalnum(c)) {
            mapped.push_back(static_cast<char>(std::tolower(c)));
        } else if (c >= 0x80 || c == '\'') {
            mapped.push_back(static_cast<char>(c));
        } else {
            mapped.push_back(' ');
        }
    }
    std::string out;
    out.reserve(mapped.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < mapped.size(); ++i) {
        char c = mapped[i];
        if (c == '\'') {
            const bool internal = i > 0 && i + 1 < mapped.size() && is_word(static_cast<unsigned char>(mapped[i - 1])) &&
                                  is_word(static_cast<unsigned char>(mapped[i + 1]));
            if (!internal) c = ' ';
        }
        if (c == ' ') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

inline std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) words.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

/// Bidirectional word <-> id map. Ids 0..3 are PAD, SOS, EOS, UNK.
class Vocabulary {
public:
    Vocabulary() : words_{"<pad>", "<sos>", "<eos>", "<unk>"} { reindex(); }

    explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
        if (words_.size() < kFirstWordId || words_[kPad] != "<pad>" || words_[kSos] != "<sos>" ||
            words_[kEos] != "<eos>" || words_[kUnk] != "<unk>")
            throw Error(Errc::CheckpointMismatch, "vocabulary must start with <pad> <sos> <eos> <unk>");
        reindex();
        if (index_.size() != words_.size()) throw Error(Errc::CheckpointMismatch, "vocabulary has duplicate words");
    }

    [[nodiscard]] std::size_t size() const noexcept { return words_.size(); }

    [[nodiscard]] TokenId id(const std::string& word) const {
        auto it = index_.find(word);
        return it == index_.end() ? kUnk : it->second;
    }

    [[nodiscard]] bool contains(const std::string& word) const { return index_.count(word) && id(word) >= kFirstWordId; }

    [[nodiscard]] const std::string& word(TokenId id) const {
        if (id >= words_.size()) throw Error(Errc::IndexOutOfRange, "token id " + std::to_string(id));
        return words_[id];
    }

    [[nodiscard]] const std::vector<std::string>& words() const noexcept { return words_; }

    /// Space-joined words for ids; specials other than UNK are skipped.
    [[nodiscard]] std::string decode(const std::vector<TokenId>& ids) const {
        std::vector<std::string> ws;
        for (TokenId t : ids)
            if (t == kUnk || !is_special(t)) ws.push_back(word(t));
        return join_words(ws);
    }

    [[nodiscard]] std::string dump() const {
        nlohmann::json j;
        j["words"] = words_;
        return j.dump();
    }

    static Vocabulary from_json(const nlohmann::json& j) { return Vocabulary(j.at("words").get<std::vector<std::string>>()); }

    /// FNV-1a 64 of dump(), as 16 hex digits.
    [[nodiscard]] std::string hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : dump()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

private:
    void reindex() {
        index_.clear();
        for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
    }

    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Specials plus every word with frequency >= min_count, ordered by
/// descending frequency then lexicographically.
inline Vocabulary build_vocabulary(const std::vector<std::string>& corpus_lines, std::size_t min_count) {
    if (min_count < 1) throw Error(Errc::BadParams, "min_count must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& line : corpus_lines)
        for (auto& w : split_words(line)) ++counts[w];
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [w, c] : counts)
        if (c >= min_count) kept.emplace_back(w, c);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> words{"<pad>", "<sos>", "<eos>", "<unk>"};
    for (auto& [w, c] : kept) words.push_back(w);
    return Vocabulary(std::move(words));
}

} // namespace seedline

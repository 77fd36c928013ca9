// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedline/lines.hpp"
#include "seedline/wundt/filter.hpp"

namespace seedline::service {

/// Checkpoints a session draws on. Empty corpus: novelty is measured against
/// the corpus recorded in the VAE sidecar, if any.
struct ModelRefs {
    std::string vae;
    std::string lm;
    std::optional<std::string> corpus;

    friend bool operator==(const ModelRefs&, const ModelRefs&) = default;
};

/// Pool, pinned set and arrangement of one composition.
/// Invariants: arrangement is a duplicate-free subset of pinned, pinned is a
/// subset of pool ids, pool ids are unique.
struct Session {
    std::string id;
    std::int64_t created_ms = 0;
    std::int64_t modified_ms = 0;
    ModelRefs models;
    wundt::BandConfig band;
    std::optional<wundt::ResolvedBand> resolved_band;
    std::uint64_t next_line_id = 1;
    std::vector<GeneratedLine> pool;
    std::set<std::uint64_t> pinned;
    std::vector<std::uint64_t> arrangement;

    [[nodiscard]] const GeneratedLine* find(std::uint64_t line_id) const {
        for (const auto& l : pool)
            if (l.id == line_id) return &l;
        return nullptr;
    }

    [[nodiscard]] bool invariants_hold() const {
        std::set<std::uint64_t> ids;
        for (const auto& l : pool)
            if (!ids.insert(l.id).second) return false;
        for (auto p : pinned)
            if (!ids.count(p)) return false;
        std::set<std::uint64_t> seen;
        for (auto a : arrangement)
            if (!pinned.count(a) || !seen.insert(a).second) return false;
        return true;
    }

    /// Arrangement texts joined by '\n' (no trailing newline).
    [[nodiscard]] std::string poem_text() const {
        std::string out;
        for (std::size_t i = 0; i < arrangement.size(); ++i) {
            if (i) out.push_back('\n');
            out += find(arrangement[i])->text;
        }
        return out;
    }
};

inline nlohmann::ordered_json to_json(const Session& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["created_ms"] = s.created_ms;
    j["modified_ms"] = s.modified_ms;
    nlohmann::ordered_json models{{"vae", s.models.vae}, {"lm", s.models.lm}};
    if (s.models.corpus) models["corpus"] = *s.models.corpus;
    j["models"] = std::move(models);
    j["band"] = wundt::to_json(s.band);
    if (s.resolved_band)
        j["resolved_band"] = {{"low", wundt::detail::finite_or_null(s.resolved_band->low)},
                              {"high", wundt::detail::finite_or_null(s.resolved_band->high)}};
    j["next_line_id"] = s.next_line_id;
    auto pool = nlohmann::ordered_json::array();
    for (const auto& l : s.pool) pool.push_back(to_json(l));
    j["pool"] = std::move(pool);
    j["pinned"] = std::vector<std::uint64_t>(s.pinned.begin(), s.pinned.end());
    j["arrangement"] = s.arrangement;
    return j;
}

inline Session session_from_json(const nlohmann::ordered_json& j) {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.created_ms = j.at("created_ms").get<std::int64_t>();
    s.modified_ms = j.at("modified_ms").get<std::int64_t>();
    const auto& m = j.at("models");
    s.models.vae = m.at("vae").get<std::string>();
    s.models.lm = m.at("lm").get<std::string>();
    if (m.contains("corpus")) s.models.corpus = m["corpus"].get<std::string>();
    s.band = wundt::band_config_from_json(j.at("band"));
    if (j.contains("resolved_band")) {
        const auto& rb = j["resolved_band"];
        s.resolved_band = wundt::ResolvedBand{wundt::detail::finite_or(rb, "low", -std::numeric_limits<double>::infinity()),
                                              wundt::detail::finite_or(rb, "high", std::numeric_limits<double>::infinity())};
    }
    s.next_line_id = j.at("next_line_id").get<std::uint64_t>();
    for (const auto& l : j.at("pool")) s.pool.push_back(generated_line_from_json(l));
    for (auto id : j.at("pinned")) s.pinned.insert(id.get<std::uint64_t>());
    s.arrangement = j.at("arrangement").get<std::vector<std::uint64_t>>();
    if (!s.invariants_hold()) throw Error(Errc::MalformedRecord, "session " + s.id + " violates its invariants");
    return s;
}

/// Canonical serialisation used both for persistence and for JSON export.
inline std::string session_document(const Session& s) { return to_json(s).dump(2) + "\n"; }

inline Session import_session(const std::string& document) {
    try {
        return session_from_json(nlohmann::ordered_json::parse(document));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedRecord, e.what());
    }
}

} // namespace seedline::service

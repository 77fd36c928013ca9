// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "seedline/corpus/vocabulary.hpp"

namespace seedline {

/// Position of a line on the predictable <-> random spectrum.
struct LineScore {
    double surprisal = 0.0; // nats/token
    double novelty = 0.0;   // fraction in [0, 1]
    bool in_band = false;
    std::map<std::string, double> components;

    friend bool operator==(const LineScore&, const LineScore&) = default;
};

enum class SamplerKind { Prior, Neighborhood, Interpolation };

inline std::string to_string(SamplerKind k) {
    switch (k) {
    case SamplerKind::Prior: return "prior";
    case SamplerKind::Neighborhood: return "neighborhood";
    case SamplerKind::Interpolation: return "interpolation";
    }
    return "prior";
}

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "prior") return SamplerKind::Prior;
    if (s == "neighborhood") return SamplerKind::Neighborhood;
    if (s == "interpolation") return SamplerKind::Interpolation;
    throw Error(Errc::BadParams, "unknown sampler kind " + s);
}

/// Where a generated line came from. `kind` decides which optionals are set:
/// neighborhood lines carry origin + radius, interpolation lines carry
/// origin, target and position; parent ids are filled in by the pool service.
struct Provenance {
    SamplerKind kind = SamplerKind::Prior;
    std::vector<double> latent;
    std::optional<double> temperature; // absent: greedy decoding
    std::optional<std::vector<double>> origin;
    std::optional<double> radius;
    std::optional<std::vector<double>> target;
    std::optional<double> position;
    std::optional<std::uint64_t> parent_id;
    std::optional<std::uint64_t> other_parent_id;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct GeneratedLine {
    std::uint64_t id = 0;
    std::string text;
    std::vector<TokenId> tokens;
    Provenance provenance;
    std::optional<LineScore> score;

    friend bool operator==(const GeneratedLine&, const GeneratedLine&) = default;
};

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const LineScore& s) {
    ordered_json j;
    j["surprisal"] = s.surprisal;
    j["novelty"] = s.novelty;
    j["in_band"] = s.in_band;
    j["components"] = ordered_json(s.components);
    return j;
}

inline LineScore line_score_from_json(const nlohmann::ordered_json& j) {
    LineScore s;
    s.surprisal = j.at("surprisal").get<double>();
    s.novelty = j.at("novelty").get<double>();
    s.in_band = j.at("in_band").get<bool>();
    if (j.contains("components"))
        for (const auto& [k, v] : j["components"].items()) s.components[k] = v.get<double>();
    return s;
}

inline ordered_json to_json(const Provenance& p) {
    ordered_json j;
    j["kind"] = to_string(p.kind);
    j["latent"] = p.latent;
    if (p.temperature) j["temperature"] = *p.temperature;
    if (p.origin) j["origin"] = *p.origin;
    if (p.radius) j["radius"] = *p.radius;
    if (p.target) j["target"] = *p.target;
    if (p.position) j["position"] = *p.position;
    if (p.parent_id) j["parent_id"] = *p.parent_id;
    if (p.other_parent_id) j["other_parent_id"] = *p.other_parent_id;
    return j;
}

inline Provenance provenance_from_json(const nlohmann::ordered_json& j) {
    Provenance p;
    p.kind = sampler_kind_from_string(j.at("kind").get<std::string>());
    p.latent = j.at("latent").get<std::vector<double>>();
    if (j.contains("temperature")) p.temperature = j["temperature"].get<double>();
    if (j.contains("origin")) p.origin = j["origin"].get<std::vector<double>>();
    if (j.contains("radius")) p.radius = j["radius"].get<double>();
    if (j.contains("target")) p.target = j["target"].get<std::vector<double>>();
    if (j.contains("position")) p.position = j["position"].get<double>();
    if (j.contains("parent_id")) p.parent_id = j["parent_id"].get<std::uint64_t>();
    if (j.contains("other_parent_id")) p.other_parent_id = j["other_parent_id"].get<std::uint64_t>();
    return p;
}

inline ordered_json to_json(const GeneratedLine& l) {
    ordered_json j;
    j["id"] = l.id;
    j["text"] = l.text;
    j["tokens"] = l.tokens;
    j["provenance"] = to_json(l.provenance);
    if (l.score) j["score"] = to_json(*l.score);
    return j;
}

inline GeneratedLine generated_line_from_json(const nlohmann::ordered_json& j) {
    GeneratedLine l;
    l.id = j.at("id").get<std::uint64_t>();
    l.text = j.at("text").get<std::string>();
    l.tokens = j.at("tokens").get<std::vector<TokenId>>();
    l.provenance = provenance_from_json(j.at("provenance"));
    if (j.contains("score")) l.score = line_score_from_json(j["score"]);
    return l;
}

} // namespace seedline

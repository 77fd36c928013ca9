// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "seedline/numerics/parameters.hpp"

namespace seedline {

namespace fs = std::filesystem;

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written document.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::FileNotFound, path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace seedline

namespace seedline::num {

inline constexpr const char* kCheckpointMagic = "SEEDLINE-CKPT-1";

/// Parameter checkpoint: {"magic", "kind", "params": {name: {"shape", "values"}}}.
/// Parameters are listed in store order, which is deterministic per model kind.
inline nlohmann::ordered_json checkpoint_to_json(const std::string& kind, const ParameterStore& params) {
    nlohmann::ordered_json j;
    j["magic"] = kCheckpointMagic;
    j["kind"] = kind;
    auto& ps = j["params"] = nlohmann::ordered_json::object();
    for (const auto& p : params) {
        ps[p->name] = {{"shape", p->value.shape()}, {"values", p->value.storage()}};
    }
    return j;
}

inline void save_checkpoint(const fs::path& path, const std::string& kind, const ParameterStore& params) {
    write_file_atomic(path, checkpoint_to_json(kind, params).dump() + "\n");
}

struct LoadedCheckpoint {
    std::string kind;
    ParameterStore params;
};

inline LoadedCheckpoint load_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw Error(Errc::CheckpointMismatch, "checkpoint not found: " + path.string());
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::CheckpointMismatch, path.string() + ": " + e.what());
    }
    if (j.value("magic", "") != kCheckpointMagic)
        throw Error(Errc::CheckpointMismatch, path.string() + ": bad magic");
    LoadedCheckpoint out;
    out.kind = j.at("kind").get<std::string>();
    for (const auto& [name, entry] : j.at("params").items()) {
        out.params.add(name, Tensor(entry.at("shape").get<Shape>(), entry.at("values").get<std::vector<double>>()));
    }
    return out;
}

/// Copies values from `src` into `dst`, requiring identical names and shapes.
inline void assign_parameters(ParameterStore& dst, const ParameterStore& src) {
    if (dst.size() != src.size()) throw Error(Errc::CheckpointMismatch, "parameter count differs");
    for (auto& p : dst) {
        const Parameter& s = src.at(p->name);
        if (s.value.shape() != p->value.shape())
            throw Error(Errc::CheckpointMismatch, "shape of " + p->name + " is " + shape_str(s.value.shape()) +
                                                      ", model expects " + shape_str(p->value.shape()));
        p->value = s.value;
    }
}

} // namespace seedline::num

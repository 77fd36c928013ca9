// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "seedline/numerics/checkpoint.hpp"
#include "seedline/pipeline.hpp"
#include "seedline/service/session.hpp"

namespace seedline::service {

namespace fs = std::filesystem;

struct PoolParams {
    std::size_t n = 350;
    std::optional<double> temperature = 1.0; // empty: greedy
    std::uint64_t seed = 0;
    bool apply_band = false;
};

struct PoolOutcome {
    std::vector<GeneratedLine> added;
    wundt::BandReport report;
    std::size_t pool_size = 0;
};

enum class VaryMode { Neighborhood, Interpolate };

struct VaryParams {
    std::uint64_t line_id = 0;
    VaryMode mode = VaryMode::Neighborhood;
    double radius = 0.1;
    std::size_t n = 8;
    std::optional<std::uint64_t> other_line_id;
    std::size_t steps = 5;
    std::optional<double> temperature; // empty: greedy
    std::uint64_t seed = 0;
};

enum class ExportFormat { Text, Json };

/// Owns loaded models and curation sessions persisted as one JSON document
/// per session in `data_dir`. Operations on one session are serialised;
/// different sessions proceed independently. Every mutating operation
/// works on a copy and commits (disk first, then memory) only on success.
class PoolService {
public:
    struct Options {
        fs::path data_dir;
        ModelRefs defaults;
        std::function<std::int64_t()> clock;
    };

    explicit PoolService(Options opt) : opt_(std::move(opt)) {
        if (!opt_.clock) {
            opt_.clock = [] {
                return std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                    .count();
            };
        }
        fs::create_directories(opt_.data_dir);
    }

    /// Loads (or reuses) the referenced models and persists an empty session.
    std::string create_session(std::optional<ModelRefs> refs = {}, std::optional<wundt::BandConfig> band = {}) {
        ModelRefs r = refs.value_or(opt_.defaults);
        if (r.vae.empty()) r.vae = opt_.defaults.vae;
        if (r.lm.empty()) r.lm = opt_.defaults.lm;
        if (!r.corpus) r.corpus = opt_.defaults.corpus;
        workbench(r);

        Session s;
        {
            std::lock_guard lock(store_mu_);
            s.id = next_session_id();
        }
        s.created_ms = s.modified_ms = opt_.clock();
        s.models = r;
        if (band) s.band = *band;
        persist(s);
        std::lock_guard lock(store_mu_);
        auto slot = std::make_shared<Slot>();
        slot->session = std::move(s);
        sessions_[slot->session.id] = slot;
        return slot->session.id;
    }

    Session get(const std::string& id) {
        auto slot = find(id);
        std::lock_guard lock(slot->mu);
        return slot->session;
    }

    PoolOutcome generate_pool(const std::string& id, const PoolParams& p) {
        if (p.n < 1 || p.n > 10000) throw Error(Errc::BadParams, "n must be in [1, 10000]");
        if (p.temperature && !(*p.temperature > 0.0)) throw Error(Errc::BadParams, "temperature must be > 0");
        return mutate(id, [&](Session& s) {
            const auto wb = workbench(s.models);
            std::unordered_set<std::string> existing;
            for (const auto& l : s.pool) existing.insert(l.text);
            PoolRequest req;
            req.n = p.n;
            req.temperature = p.temperature;
            req.seed = p.seed;
            req.apply_band = p.apply_band;
            req.band = s.band;
            auto res = generate_scored_pool(*wb, req, &existing);
            s.resolved_band = res.report.band;
            PoolOutcome out;
            for (auto& l : res.lines) {
                l.id = s.next_line_id++;
                s.pool.push_back(l);
                out.added.push_back(std::move(l));
            }
            out.report = res.report;
            out.pool_size = s.pool.size();
            return out;
        });
    }

    Session pin(const std::string& id, std::uint64_t line_id) {
        return mutate(id, [&](Session& s) {
            require_line(s, line_id);
            s.pinned.insert(line_id);
            return s;
        });
    }

    /// Also drops the line from the arrangement.
    Session unpin(const std::string& id, std::uint64_t line_id) {
        return mutate(id, [&](Session& s) {
            require_line(s, line_id);
            s.pinned.erase(line_id);
            std::erase(s.arrangement, line_id);
            return s;
        });
    }

    Session arrange(const std::string& id, const std::vector<std::uint64_t>& line_ids) {
        return mutate(id, [&](Session& s) {
            std::set<std::uint64_t> seen;
            for (auto l : line_ids) {
                require_line(s, l);
                if (!s.pinned.count(l)) throw Error(Errc::NotPinned, "line " + std::to_string(l) + " is not pinned");
                if (!seen.insert(l).second) throw Error(Errc::DuplicateId, "line " + std::to_string(l) + " appears twice");
            }
            s.arrangement = line_ids;
            return s;
        });
    }

    std::vector<GeneratedLine> vary(const std::string& id, const VaryParams& p) {
        if (p.mode == VaryMode::Neighborhood && (!(p.radius > 0.0) || p.n < 1 || p.n > 10000))
            throw Error(Errc::BadParams, "neighborhood needs radius > 0 and 1 <= n <= 10000");
        if (p.mode == VaryMode::Interpolate && (!p.other_line_id || p.steps < 2 || p.steps > 1000))
            throw Error(Errc::BadParams, "interpolate needs other_line_id and 2 <= steps <= 1000");
        if (p.temperature && !(*p.temperature > 0.0)) throw Error(Errc::BadParams, "temperature must be > 0");
        return mutate(id, [&](Session& s) {
            const GeneratedLine& parent = require_line(s, p.line_id);
            const auto wb = workbench(s.models);
            std::vector<GeneratedLine> fresh;
            if (p.mode == VaryMode::Neighborhood) {
                vae::Rng rng(p.seed);
                fresh = vae::sample_neighborhood(wb->vae, parent.provenance.latent, p.radius, p.n, p.temperature, rng);
            } else {
                const GeneratedLine& other = require_line(s, *p.other_line_id);
                fresh = vae::interpolate(wb->vae, parent.provenance.latent, other.provenance.latent, p.steps);
            }
            if (!s.resolved_band) s.resolved_band = resolve_band(*wb, s.band, 1.0, 0);
            for (auto& l : fresh) {
                l.id = s.next_line_id++;
                l.provenance.parent_id = p.line_id;
                if (p.mode == VaryMode::Interpolate) l.provenance.other_parent_id = p.other_line_id;
                l.score = wundt::score_line(l, wb->lm, wb->index, *s.resolved_band);
                s.pool.push_back(l);
            }
            return fresh;
        });
    }

    std::string export_session(const std::string& id, ExportFormat format) {
        const Session s = get(id);
        return format == ExportFormat::Text ? s.poem_text() : session_document(s);
    }

    [[nodiscard]] const fs::path& data_dir() const noexcept { return opt_.data_dir; }

    [[nodiscard]] fs::path session_path(const std::string& id) const { return opt_.data_dir / (id + ".json"); }

private:
    struct Slot {
        std::mutex mu;
        Session session;
    };

    template <class F>
    std::invoke_result_t<F&, Session&> mutate(const std::string& id, F&& f) {
        auto slot = find(id);
        std::lock_guard lock(slot->mu);
        Session draft = slot->session;
        auto result = f(draft);
        draft.modified_ms = opt_.clock();
        if (!draft.invariants_hold()) throw Error(Errc::BadParams, "operation would break session invariants");
        persist(draft);
        slot->session = std::move(draft);
        if constexpr (std::is_same_v<std::decay_t<decltype(result)>, Session>) return slot->session;
        else return result;
    }

    static const GeneratedLine& require_line(const Session& s, std::uint64_t line_id) {
        const GeneratedLine* l = s.find(line_id);
        if (!l) throw Error(Errc::UnknownLine, "no line " + std::to_string(line_id) + " in session " + s.id);
        return *l;
    }

    std::shared_ptr<Slot> find(const std::string& id) {
        std::lock_guard lock(store_mu_);
        if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
        if (!valid_id(id)) throw Error(Errc::SessionNotFound, "no session " + id);
        const fs::path path = session_path(id);
        if (!fs::exists(path)) throw Error(Errc::SessionNotFound, "no session " + id);
        auto slot = std::make_shared<Slot>();
        slot->session = import_session(read_file(path));
        sessions_[id] = slot;
        return slot;
    }

    static bool valid_id(const std::string& id) {
        return id.size() == 7 && id[0] == 's' &&
               std::all_of(id.begin() + 1, id.end(), [](char c) { return c >= '0' && c <= '9'; });
    }

    std::string next_session_id() {
        if (!next_id_) {
            std::uint64_t max_seen = 0;
            for (const auto& e : fs::directory_iterator(opt_.data_dir)) {
                const auto stem = e.path().stem().string();
                if (e.path().extension() == ".json" && valid_id(stem)) max_seen = std::max<std::uint64_t>(max_seen, std::stoull(stem.substr(1)));
            }
            next_id_ = max_seen + 1;
        }
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>((*next_id_)++));
        return buf;
    }

    void persist(const Session& s) { write_file_atomic(session_path(s.id), session_document(s)); }

    std::shared_ptr<const Workbench> workbench(const ModelRefs& r) {
        const std::string key = r.vae + "\n" + r.lm + "\n" + r.corpus.value_or("");
        std::lock_guard lock(models_mu_);
        if (auto it = workbenches_.find(key); it != workbenches_.end()) return it->second;
        if (r.vae.empty() || r.lm.empty()) throw Error(Errc::CheckpointMismatch, "session needs both a vae and an lm checkpoint");
        std::optional<fs::path> corpus;
        if (r.corpus) corpus = *r.corpus;
        else corpus = Workbench::recorded_corpus(r.vae);
        try {
            auto wb = std::make_shared<const Workbench>(Workbench::load(r.vae, r.lm, corpus));
            workbenches_[key] = wb;
            return wb;
        } catch (const Error& e) {
            if (e.code() == Errc::CheckpointMismatch) throw;
            throw Error(Errc::CheckpointMismatch, e.what());
        } catch (const std::exception& e) {
            throw Error(Errc::CheckpointMismatch, e.what());
        }
    }

    Options opt_;
    std::mutex store_mu_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::optional<std::uint64_t> next_id_;
    std::mutex models_mu_;
    std::map<std::string, std::shared_ptr<const Workbench>> workbenches_;
};

} // namespace seedline::service

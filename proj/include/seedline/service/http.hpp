// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "seedline/service/pool_service.hpp"

namespace seedline::service {

using json = nlohmann::ordered_json;

inline int http_status(Errc code) {
    switch (code) {
    case Errc::SessionNotFound:
    case Errc::UnknownLine: return 404;
    case Errc::NotPinned:
    case Errc::DuplicateId: return 409;
    case Errc::BadParams:
    case Errc::NonPositiveTemperature:
    case Errc::CheckpointMismatch:
    case Errc::MalformedRecord:
    case Errc::MissingTag: return 400;
    default: return 500;
    }
}

namespace detail {

inline void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

inline void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& detail) {
    reply_json(res, status, json{{"error", code}, {"detail", detail}});
}

inline json parse_body(const httplib::Request& req, bool allow_empty = false) {
    if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) {
        if (allow_empty) return json::object();
        throw Error(Errc::BadParams, "request body must be a JSON object");
    }
    json j;
    try {
        j = json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(Errc::BadParams, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(Errc::BadParams, "request body must be a JSON object");
    return j;
}

template <class T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(Errc::BadParams, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::BadParams, std::string("field '") + key + "' has the wrong type");
    }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return field<T>(j, key);
}

/// Unsigned integer field; rejects negatives and non-integers.
inline std::uint64_t uint_field(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number_unsigned())
        throw Error(Errc::BadParams, std::string("field '") + key + "' must be a non-negative integer");
    return j.at(key).get<std::uint64_t>();
}

inline std::uint64_t uint_field_or(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return uint_field(j, key);
}

/// Temperature 0 selects greedy decoding; absent yields the fallback.
inline std::optional<double> temperature_field(const json& j, std::optional<double> fallback) {
    if (!j.contains("temperature") || j["temperature"].is_null()) return fallback;
    const double t = field<double>(j, "temperature");
    if (t == 0.0) return std::nullopt;
    if (!(t > 0.0)) throw Error(Errc::BadParams, "temperature must be >= 0");
    return t;
}

} // namespace detail

inline json session_summary(const Session& s) { return to_json(s); }

/// Binds the documented HTTP/JSON routes onto `server`.
inline void install_routes(httplib::Server& server, PoolService& svc) {
    using namespace detail;
    auto guarded = [](auto handler) {
        return [handler](const httplib::Request& req, httplib::Response& res) {
            try {
                handler(req, res);
            } catch (const Error& e) {
                reply_error(res, http_status(e.code()), std::string(to_string(e.code())), e.detail());
            } catch (const std::exception& e) {
                reply_error(res, 500, "Internal", e.what());
            }
        };
    };

    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req, true);
        std::optional<ModelRefs> refs;
        if (body.contains("vae") || body.contains("lm") || body.contains("corpus")) {
            ModelRefs r;
            r.vae = field_or<std::string>(body, "vae", "");
            r.lm = field_or<std::string>(body, "lm", "");
            if (body.contains("corpus")) r.corpus = field<std::string>(body, "corpus");
            refs = r;
        }
        std::optional<wundt::BandConfig> band;
        if (body.contains("band")) {
            try {
                band = wundt::band_config_from_json(body["band"]);
            } catch (const json::exception& e) {
                throw Error(Errc::BadParams, e.what());
            }
        }
        const auto id = svc.create_session(refs, band);
        reply_json(res, 201, json{{"id", id}});
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        reply_json(res, 200, session_summary(svc.get(req.matches[1])));
    }));

    server.Post(R"(/sessions/([^/]+)/pool)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req, true);
        PoolParams p;
        p.n = uint_field_or(body, "n", p.n);
        p.temperature = temperature_field(body, 1.0);
        p.seed = uint_field_or(body, "seed", 0);
        p.apply_band = field_or<bool>(body, "apply_band", false);
        auto out = svc.generate_pool(req.matches[1], p);
        json lines = json::array();
        for (const auto& l : out.added) lines.push_back(to_json(l));
        reply_json(res, 200, json{{"added", lines}, {"report", wundt::to_json(out.report)}, {"pool_size", out.pool_size}});
    }));

    auto pin_route = [&svc](bool pin) {
        return [&svc, pin](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            const auto line = uint_field(body, "line_id");
            const Session s = pin ? svc.pin(req.matches[1], line) : svc.unpin(req.matches[1], line);
            reply_json(res, 200, session_summary(s));
        };
    };
    server.Post(R"(/sessions/([^/]+)/pin)", guarded(pin_route(true)));
    server.Post(R"(/sessions/([^/]+)/unpin)", guarded(pin_route(false)));

    server.Put(R"(/sessions/([^/]+)/arrangement)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.contains("line_ids") || !body["line_ids"].is_array())
            throw Error(Errc::BadParams, "field 'line_ids' must be an array");
        std::vector<std::uint64_t> ids;
        for (const auto& v : body["line_ids"]) {
            if (!v.is_number_unsigned()) throw Error(Errc::BadParams, "line ids must be non-negative integers");
            ids.push_back(v.get<std::uint64_t>());
        }
        reply_json(res, 200, session_summary(svc.arrange(req.matches[1], ids)));
    }));

    server.Post(R"(/sessions/([^/]+)/vary)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        VaryParams p;
        p.line_id = uint_field(body, "line_id");
        const auto mode = field<std::string>(body, "mode");
        if (mode == "neighborhood") p.mode = VaryMode::Neighborhood;
        else if (mode == "interpolate") p.mode = VaryMode::Interpolate;
        else throw Error(Errc::BadParams, "mode must be 'neighborhood' or 'interpolate'");
        p.radius = field_or<double>(body, "radius", p.radius);
        p.n = uint_field_or(body, "n", p.n);
        if (body.contains("other_line_id")) p.other_line_id = uint_field(body, "other_line_id");
        p.steps = uint_field_or(body, "steps", p.steps);
        p.temperature = temperature_field(body, std::nullopt);
        p.seed = uint_field_or(body, "seed", 0);
        const auto lines = svc.vary(req.matches[1], p);
        json out = json::array();
        for (const auto& l : lines) out.push_back(to_json(l));
        reply_json(res, 200, json{{"added", out}});
    }));

    server.Get(R"(/sessions/([^/]+)/export)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
        const std::string format = req.has_param("format") ? req.get_param_value("format") : "text";
        if (format == "text") {
            res.status = 200;
            res.set_content(svc.export_session(req.matches[1], ExportFormat::Text), "text/plain; charset=utf-8");
        } else if (format == "json") {
            res.status = 200;
            res.set_content(svc.export_session(req.matches[1], ExportFormat::Json), "application/json; charset=utf-8");
        } else {
            throw Error(Errc::BadParams, "format must be 'text' or 'json'");
        }
    }));
}

} // namespace seedline::service

// Copyright (C) 2026 The Seedline Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seedline {

enum class Errc {
    ShapeMismatch,
    NonScalarLoss,
    IndexOutOfRange,
    NonFinite,
    EmptyLine,
    TooLong,
    FileNotFound,
    MalformedRecord,
    MissingTag,
    NonPositiveTemperature,
    EmptyBatch,
    EmptyCorpus,
    MisalignedScores,
    BadParams,
    CheckpointMismatch,
    SessionNotFound,
    UnknownLine,
    NotPinned,
    DuplicateId,
    Io,
};

constexpr std::string_view to_string(Errc e) noexcept {
    switch (e) {
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyLine: return "EmptyLine";
    case Errc::TooLong: return "TooLong";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::MissingTag: return "MissingTag";
    case Errc::NonPositiveTemperature: return "NonPositiveTemperature";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::MisalignedScores: return "MisalignedScores";
    case Errc::BadParams: return "BadParams";
    case Errc::CheckpointMismatch: return "CheckpointMismatch";
    case Errc::SessionNotFound: return "SessionNotFound";
    case Errc::UnknownLine: return "UnknownLine";
    case Errc::NotPinned: return "NotPinned";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// service and CLI map codes to HTTP statuses and exit codes.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

} // namespace seedline

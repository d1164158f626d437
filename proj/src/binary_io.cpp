/*
 * Copyright 2026 The gpmeta Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "gpmeta/binary_io.hpp"

#include <vector>

namespace gpmeta {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedStream: return "TruncatedStream";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::OutOfSpan: return "OutOfSpan";
    case ErrorCode::MissingData: return "MissingData";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

namespace binio {

void write_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), magic.size()); }

void expect_magic(std::istream& is, std::string_view magic, std::string_view what) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), got.size());
    if (is.gcount() != static_cast<std::streamsize>(magic.size()))
        fail(ErrorCode::TruncatedStream, std::string(what) + ": stream ended inside the magic bytes");
    if (got != magic) fail(ErrorCode::BadMagic, std::string(what) + ": expected magic '" + std::string(magic) + "'");
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), s.size());
}

std::string read_string(std::istream& is, std::string_view what) {
    const auto len = read_pod<std::uint32_t>(is, what);
    if (len > (1u << 20)) fail(ErrorCode::BadFormat, std::string(what) + ": implausible string length");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (is.gcount() != static_cast<std::streamsize>(len))
        fail(ErrorCode::TruncatedStream, std::string(what) + ": stream ended inside a string");
    return s;
}

} // namespace binio
} // namespace gpmeta

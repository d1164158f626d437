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

#include <fstream>
#include <iterator>

#include "gpmeta/tasks.hpp"

namespace gpmeta {

namespace {

constexpr std::uint8_t kUnsignedByteType = 0x08;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

} // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) fail(ErrorCode::TruncatedStream, "idx: stream shorter than the magic number");
    if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != kUnsignedByteType || bytes[3] == 0)
        fail(ErrorCode::BadMagic, "idx: magic " + std::to_string(read_be32(bytes, 0)) +
                                      " is not an unsigned-byte tensor header");
    const std::size_t ndims = bytes[3];
    const std::size_t header = 4 + 4 * ndims;
    if (bytes.size() < header) fail(ErrorCode::TruncatedStream, "idx: stream ends inside the dimension header");

    IdxTensor tensor;
    std::uint64_t total = 1;
    for (std::size_t d = 0; d < ndims; ++d) {
        tensor.dims.push_back(read_be32(bytes, 4 + 4 * d));
        total *= tensor.dims.back();
    }
    const std::uint64_t available = bytes.size() - header;
    if (available < total)
        fail(ErrorCode::TruncatedStream, "idx: expected " + std::to_string(total) + " data bytes, found " +
                                             std::to_string(available));
    if (available > total)
        fail(ErrorCode::TrailingBytes, "idx: " + std::to_string(available - total) + " bytes past the end of the data");
    tensor.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return tensor;
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor) {
    if (tensor.dims.empty() || tensor.dims.size() > 255)
        fail(ErrorCode::InvalidArgument, "idx: tensor needs between 1 and 255 dimensions");
    std::uint64_t total = 1;
    for (auto d : tensor.dims) total *= d;
    if (total != tensor.data.size()) fail(ErrorCode::DimensionMismatch, "idx: data size does not match dims");
    std::vector<std::uint8_t> out{0, 0, kUnsignedByteType, static_cast<std::uint8_t>(tensor.dims.size())};
    for (auto d : tensor.dims) append_be32(out, d);
    out.insert(out.end(), tensor.data.begin(), tensor.data.end());
    return out;
}

IdxTensor read_idx_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorCode::MissingData, "cannot open IDX file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

void write_idx_file(const std::filesystem::path& path, const IdxTensor& tensor) {
    const auto bytes = serialize_idx(tensor);
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace gpmeta

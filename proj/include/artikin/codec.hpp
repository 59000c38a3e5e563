// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace artikin {

std::string base64_encode(std::string_view bytes);
/// Throws ValidationError on malformed input.
std::string base64_decode(std::string_view text);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

} // namespace artikin

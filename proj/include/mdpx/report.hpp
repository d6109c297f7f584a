#pragma once

#include <string>

#include "json.hpp"
#include "mdpx/rational.hpp"

namespace mdpx {

using Json = nlohmann::ordered_json;

/// {"exact": "num/den", "decimal": "..."} with round-half-even rendering.
Json ratJson(const Rat& r, int digits);

/// FNV-1a 64-bit digest of raw content, hex-encoded.
std::string contentDigest(const std::string& content);

std::string readFile(const std::string& path);  // throws std::runtime_error

}  // namespace mdpx

// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "artikin/boundary_refiner.hpp"
#include "artikin/coarse_segmenter.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

// Optional network backends for the part-count query and the promptable
// segmenter. Nothing here opens a connection unless one of the two classes
// is constructed and queried; tests only exercise the request builders and
// reply parsers.

namespace artikin {

/// The part-count question, verbatim.
inline constexpr std::string_view kPartCountPrompt =
    "Compare the two images. How many components moved?\n"
    "Answer: 'Number of moved components: [N]'.";

struct HttpEndpoint {
    /// scheme://host[:port]/path
    std::string url;
    std::string token;
    std::string model;
    int timeout_seconds = 120;

    /// Reads <PREFIX>_URL, <PREFIX>_TOKEN and <PREFIX>_MODEL. Throws
    /// ValidationError when the URL is unset.
    static HttpEndpoint from_env(std::string_view prefix);
};

struct ParsedUrl {
    /// scheme://host:port, as accepted by the HTTP client.
    std::string origin;
    std::string path;
};

/// Throws ValidationError for anything but http(s)://host[:port][/path].
ParsedUrl parse_url(std::string_view url);

/// Chat-completion request carrying the prompt and both images as PNG data
/// URLs.
nlohmann::json build_part_count_request(const ImagePair& pair, const std::string& model);

/// Count from the first "Number of moved components: N" (brackets optional,
/// case-insensitive) in the text; nullopt when absent.
std::optional<int> parse_part_count(std::string_view text);

/// Count from a chat-completion reply body. Throws RuntimeFailure when the
/// reply has no parsable answer.
int parse_part_count_reply(const nlohmann::json& reply);

/// Request: {"view", "label", "width", "height", "image": base64 PNG,
/// "positives": [[x, y], ...], "negatives": [[x, y], ...]}.
nlohmann::json build_segment_request(const SegmentRequest& request);

/// Reply: {"mask": base64 binary PGM}. Throws RuntimeFailure on a malformed
/// reply or a size mismatch.
PartMask parse_segment_reply(const nlohmann::json& reply, const SegmentRequest& request);

/// POST a JSON body with an optional bearer token; returns the parsed JSON
/// reply. Throws RuntimeFailure on transport errors and non-2xx statuses.
nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body);

class HttpProvider final : public PartCountProvider {
public:
    explicit HttpProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    [[nodiscard]] std::string name() const override { return "http"; }
    std::vector<int> query(const ImagePair& pair) override;

private:
    HttpEndpoint endpoint_;
};

class HttpSegmenter final : public Segmenter {
public:
    explicit HttpSegmenter(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    [[nodiscard]] std::string name() const override { return "http"; }
    PartMask segment(const SegmentRequest& request) override;

private:
    HttpEndpoint endpoint_;
};

} // namespace artikin

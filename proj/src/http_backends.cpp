// Copyright Contributors to the artikin project
// SPDX-License-Identifier: Apache-2.0

#include "artikin/http_backends.hpp"

#include "artikin/codec.hpp"
#include "artikin/error.hpp"
#include "artikin/image_io.hpp"

#include <cstdlib>
#include <regex>

// Last: <resolv.h>, pulled in by httplib, defines `_res` as a macro, which
// breaks Eigen's templates when it comes first.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace artikin {

namespace {

std::string env_or_empty(const std::string& name)
{
    const char* v = std::getenv(name.c_str());
    return v != nullptr ? std::string(v) : std::string();
}

std::string png_data_url(int width, int height, const std::vector<double>& rgb)
{
    return "data:image/png;base64," + base64_encode(encode_png(width, height, rgb));
}

nlohmann::json pixel_list(const std::vector<Pixel>& pixels)
{
    nlohmann::json out = nlohmann::json::array();
    for (const Pixel& p : pixels) {
        out.push_back({p.x, p.y});
    }
    return out;
}

} // namespace

HttpEndpoint HttpEndpoint::from_env(std::string_view prefix)
{
    const std::string p(prefix);
    HttpEndpoint e;
    e.url = env_or_empty(p + "_URL");
    e.token = env_or_empty(p + "_TOKEN");
    e.model = env_or_empty(p + "_MODEL");
    if (e.url.empty()) {
        throw ValidationError("http backend selected but " + p + "_URL is not set");
    }
    parse_url(e.url);
    return e;
}

ParsedUrl parse_url(std::string_view url)
{
    static const std::regex pattern(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(:[0-9]{1,5})?(/.*)?$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(url.begin(), url.end(), m, pattern)) {
        throw ValidationError("invalid endpoint URL '" + std::string(url) + "'");
    }
    ParsedUrl out;
    out.origin = m[1].str() + "://" + m[2].str() + m[3].str();
    out.path = m[4].matched ? m[4].str() : "/";
    return out;
}

nlohmann::json build_part_count_request(const ImagePair& pair, const std::string& model)
{
    const std::size_t expected = 3 * static_cast<std::size_t>(pair.width) * pair.height;
    if (pair.rgb_a.size() != expected || pair.rgb_b.size() != expected) {
        throw ValidationError("image pair is missing pixels");
    }
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", std::string(kPartCountPrompt)}});
    for (const auto* rgb : {&pair.rgb_a, &pair.rgb_b}) {
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", png_data_url(pair.width, pair.height, *rgb)}}}});
    }
    nlohmann::json body = {{"messages", {{{"role", "user"}, {"content", content}}}}, {"temperature", 0}};
    if (!model.empty()) {
        body["model"] = model;
    }
    return body;
}

std::optional<int> parse_part_count(std::string_view text)
{
    static const std::regex pattern(R"(number\s+of\s+moved\s+components\s*:\s*\[?\s*(\d{1,6})\s*\]?)",
                                    std::regex::icase);
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(text.begin(), text.end(), m, pattern)) {
        return std::nullopt;
    }
    return std::stoi(m[1].str());
}

int parse_part_count_reply(const nlohmann::json& reply)
{
    const auto* content = reply.is_object() && reply.contains("choices") && reply["choices"].is_array() &&
                                  !reply["choices"].empty()
                              ? &reply["choices"][0]
                              : nullptr;
    if (content == nullptr || !content->contains("message") || !(*content)["message"].contains("content") ||
        !(*content)["message"]["content"].is_string()) {
        throw RuntimeFailure("part-count reply has no choices[0].message.content");
    }
    const std::string text = (*content)["message"]["content"].get<std::string>();
    const auto n = parse_part_count(text);
    if (!n) {
        throw RuntimeFailure("part-count reply does not state the number of moved components");
    }
    return *n;
}

nlohmann::json build_segment_request(const SegmentRequest& request)
{
    validate_prompts(request.prompts, request.width, request.height);
    if (request.rgb.size() != 3 * static_cast<std::size_t>(request.width) * request.height) {
        throw ValidationError("segment request image does not match its size");
    }
    return {{"view", request.view},
            {"label", request.label},
            {"width", request.width},
            {"height", request.height},
            {"image", base64_encode(encode_png(request.width, request.height, request.rgb))},
            {"positives", pixel_list(request.prompts.positives)},
            {"negatives", pixel_list(request.prompts.negatives)}};
}

PartMask parse_segment_reply(const nlohmann::json& reply, const SegmentRequest& request)
{
    if (!reply.is_object() || !reply.contains("mask") || !reply["mask"].is_string()) {
        throw RuntimeFailure("segment reply has no 'mask' string");
    }
    BinaryImage mask;
    try {
        mask = decode_mask_pgm(base64_decode(reply["mask"].get<std::string>()));
    } catch (const ValidationError& e) {
        throw RuntimeFailure(std::string("segment reply mask is malformed: ") + e.what());
    }
    if (mask.width != request.width || mask.height != request.height) {
        throw RuntimeFailure("segment reply mask is " + std::to_string(mask.width) + "x" +
                             std::to_string(mask.height) + ", expected " + std::to_string(request.width) + "x" +
                             std::to_string(request.height));
    }
    return PartMask{request.view, request.label, std::move(mask)};
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body)
{
    const ParsedUrl url = parse_url(endpoint.url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(endpoint.timeout_seconds, 0);
    client.set_read_timeout(endpoint.timeout_seconds, 0);
    httplib::Headers headers;
    if (!endpoint.token.empty()) {
        headers.emplace("Authorization", "Bearer " + endpoint.token);
    }
    const auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        throw RuntimeFailure("request to " + url.origin + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw RuntimeFailure("request to " + url.origin + " returned HTTP " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw RuntimeFailure(std::string("reply from ") + url.origin + " is not JSON: " + e.what());
    }
}

std::vector<int> HttpProvider::query(const ImagePair& pair)
{
    return {parse_part_count_reply(post_json(endpoint_, build_part_count_request(pair, endpoint_.model)))};
}

PartMask HttpSegmenter::segment(const SegmentRequest& request)
{
    return parse_segment_reply(post_json(endpoint_, build_segment_request(request)), request);
}

} // namespace artikin

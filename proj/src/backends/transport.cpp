#include "grounder/backends/transport.hpp"

#include <cstdlib>

#include "grounder/backends/replay.hpp"

#include <httplib.h>
#include <json.hpp>

namespace grounder::backends {

using nlohmann::json;

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    for (std::size_t i = 0; i < size; i += 3) {
        std::uint32_t chunk = std::uint32_t(data[i]) << 16;
        if (i + 1 < size) chunk |= std::uint32_t(data[i + 1]) << 8;
        if (i + 2 < size) chunk |= std::uint32_t(data[i + 2]);
        out += alphabet[(chunk >> 18) & 0x3F];
        out += alphabet[(chunk >> 12) & 0x3F];
        out += i + 1 < size ? alphabet[(chunk >> 6) & 0x3F] : '=';
        out += i + 2 < size ? alphabet[chunk & 0x3F] : '=';
    }
    return out;
}

namespace {

struct Endpoint {
    std::string host_port;  // scheme://host:port
    std::string base_path;
};

Endpoint split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw CapabilityError(CapabilityErrorKind::Transport, "bad endpoint URL: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string box_text(const spatial::BoundingBox& b) {
    return "(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
           std::to_string(b.x2) + ", " + std::to_string(b.y2) + ")";
}

}  // namespace

TransportSuite::TransportSuite(std::map<std::string, BackendConfig> roles)
    : roles_(std::move(roles)) {}

const BackendConfig& TransportSuite::config_for(const std::string& role) const {
    auto it = roles_.find(role);
    if (it == roles_.end()) {
        throw CapabilityError(CapabilityErrorKind::CapabilityUnavailable,
                              "no backend configured for role " + role);
    }
    return it->second;
}

std::string TransportSuite::post_json(const BackendConfig& config, const std::string& path,
                                      const std::string& body) {
    const Endpoint ep = split_endpoint(config.endpoint);
    std::string last_error;
    for (int attempt = 0; attempt <= config.transport_retries; ++attempt) {
        httplib::Client client(ep.host_port);
        client.set_connection_timeout(config.timeout_seconds, 0);
        client.set_read_timeout(config.timeout_seconds, 0);
        httplib::Headers headers;
        if (!config.credential_env.empty()) {
            if (const char* token = std::getenv(config.credential_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + token);
            }
        }
        auto res = client.Post(ep.base_path + path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            if (res.error() == httplib::Error::ConnectionTimeout ||
                res.error() == httplib::Error::Read) {
                last_error = "timeout: " + last_error;
            }
            continue;
        }
        if (res->status >= 500) {
            last_error = "server status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw CapabilityError(CapabilityErrorKind::Transport,
                                  "status " + std::to_string(res->status) + ": " + res->body);
        }
        return res->body;
    }
    const bool timed_out = last_error.rfind("timeout", 0) == 0;
    throw CapabilityError(timed_out ? CapabilityErrorKind::Timeout
                                    : CapabilityErrorKind::Transport,
                          "request to " + config.endpoint + path + " failed after " +
                              std::to_string(config.transport_retries + 1) +
                              " attempts: " + last_error);
}

TransportSuite::ChatResult TransportSuite::chat(const std::string& role,
                                                const std::string& prompt,
                                                const ImageHandle* image,
                                                bool want_token_scores) {
    const BackendConfig& config = config_for(role);
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt}});
    if (image) {
        content.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url", "data:image/png;base64," +
                           base64_encode(image->png.data(), image->png.size())}}}});
    }
    json request;
    request["model"] = config.model;
    request["messages"] = json::array({{{"role", "user"}, {"content", content}}});
    request["max_tokens"] = config.max_tokens;
    request["temperature"] = 0;
    if (want_token_scores) {
        request["logprobs"] = true;
        request["top_logprobs"] = 10;
    }

    const std::string body = post_json(config, "/chat/completions", request.dump());
    json response;
    try {
        response = json::parse(body);
    } catch (const json::exception&) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              "chat response is not JSON");
    }

    ChatResult result;
    try {
        const json& choice = response.at("choices").at(0);
        result.text = choice.at("message").at("content").get<std::string>();
        if (want_token_scores && choice.contains("logprobs") &&
            !choice.at("logprobs").is_null()) {
            const json& tokens = choice.at("logprobs").at("content");
            if (!tokens.empty()) {
                std::vector<std::pair<std::string, double>> scores;
                for (const json& t : tokens.at(0).at("top_logprobs")) {
                    scores.emplace_back(t.at("token").get<std::string>(),
                                        t.at("logprob").get<double>());
                }
                result.first_token_scores = std::move(scores);
            }
        }
    } catch (const json::exception& e) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              std::string("unexpected chat response shape: ") + e.what());
    }
    if (looks_like_refusal(result.text)) {
        throw CapabilityError(CapabilityErrorKind::ContentPolicyRefusal, result.text);
    }
    return result;
}

std::string TransportSuite::caption(const ImageHandle& image) {
    const ChatResult r = chat("captioner", "Please describe the image in detail.", &image, false);
    if (r.text.empty()) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput, "empty caption");
    }
    return r.text;
}

std::vector<std::string> TransportSuite::extract_categories(
    const std::string& caption, const std::string& query,
    const std::optional<std::string>& feedback) {
    std::string prompt =
        "You're an AI assistant designed to find detailed information from image.\n\n"
        "You need to find important objects based on the given query which is the object "
        "you need to find. The query normally is a set of words which includes a object "
        "name and the attributes of the object.\n\n"
        "Here are some examples:\n"
        "Query: person on the left wearing a blue shirt in front of a car\n"
        "Answer: {\"output\": [\"person\", \"car\"]}\n\n"
        "Query: the red apple next to the laptop\n"
        "Answer: {\"output\": [\"apple\", \"laptop\"]}\n\n"
        "Your output must be a JSON object contains the flatten list of string. "
        "For example: {\"output\": [\"apple\", \"orange\", \"chair\", \"umbrella\"]}\n\n";
    if (feedback) prompt += "Feedback from the previous attempt: " + *feedback + "\n\n";
    prompt += "Caption: " + caption + "\nQuery: " + query + "\nAnswer: ";

    const ChatResult r = chat("category_extractor", prompt, nullptr, false);
    // Extract the first JSON object in the reply.
    const auto start = r.text.find('{');
    const auto end = r.text.rfind('}');
    if (start == std::string::npos || end == std::string::npos || end < start) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              "no JSON object in category reply: " + r.text);
    }
    json parsed;
    try {
        parsed = json::parse(r.text.substr(start, end - start + 1));
    } catch (const json::exception&) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              "unparsable JSON in category reply: " + r.text);
    }
    if (!parsed.contains("output") || !parsed.at("output").is_array()) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              "category reply lacks an \"output\" array");
    }
    std::vector<std::string> raw;
    for (const json& v : parsed.at("output")) {
        if (!v.is_string()) {
            throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                                  "category array contains a non-string");
        }
        raw.push_back(v.get<std::string>());
    }
    return normalize_categories(raw);
}

std::vector<Detection> TransportSuite::detect_entities(
    const ImageHandle& image, const std::vector<std::string>& categories) {
    const BackendConfig& config = config_for("detector");
    json request{{"image_b64", base64_encode(image.png.data(), image.png.size())},
                 {"categories", categories}};
    const std::string body = post_json(config, "/detect", request.dump());
    std::vector<Detection> out;
    try {
        for (const json& d : json::parse(body).at("detections")) {
            Detection det = detection_from_json(d);
            det.box.x1 = std::clamp(det.box.x1, 0, image.pixels.width);
            det.box.y1 = std::clamp(det.box.y1, 0, image.pixels.height);
            det.box.x2 = std::clamp(det.box.x2, 0, image.pixels.width);
            det.box.y2 = std::clamp(det.box.y2, 0, image.pixels.height);
            det.confidence = std::clamp(det.confidence, 0.0, 1.0);
            out.push_back(det);
        }
    } catch (const json::exception& e) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              std::string("bad detector response: ") + e.what());
    }
    return out;
}

std::optional<Detection> TransportSuite::detect_fallback(const ImageHandle& image,
                                                         const std::string& query) {
    const BackendConfig& config = config_for("detector");
    json request{{"image_b64", base64_encode(image.png.data(), image.png.size())},
                 {"query", query}};
    const std::string body = post_json(config, "/detect", request.dump());
    try {
        const json parsed = json::parse(body);
        const json& dets = parsed.at("detections");
        if (dets.empty()) return std::nullopt;
        return detection_from_json(dets.at(0));
    } catch (const json::exception& e) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              std::string("bad detector response: ") + e.what());
    }
}

double TransportSuite::score_attribute(const ImageHandle& image,
                                       const spatial::BoundingBox& box,
                                       const std::string& attribute_phrase) {
    if (attribute_phrase.empty()) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput, "empty attribute phrase");
    }
    const ImageHandle cropped = ImageHandle::from_image(imaging::crop(image.pixels, box));
    const std::string prompt =
        "Please answer \"Yes\" or \"No\": does the object shown in the image match the "
        "description \"" + attribute_phrase + "\"?\n\nYour answer is: ";
    const ChatResult r = chat("attribute_vlm", prompt, &cropped, true);
    return yes_probability(r.first_token_scores, r.text);
}

double TransportSuite::score_relation(const ImageHandle& image, const Detection& a,
                                      const Detection& b,
                                      const std::string& relation_phrase) {
    const std::string prompt =
        "You're an AI assistant designed to find the relations of objects in the given "
        "image.\n\n"
        "The interested objects are highlighted by bounding boxes (X1, Y1, X2, Y2). They "
        "are:\n\n"
        "A: the " + a.category + " labeled by red bounding box " + box_text(a.box) + ".\n"
        "B: the " + b.category + " labeled by red bounding box " + box_text(b.box) + ".\n\n"
        "Only consider the camera view. Note you are focusing to analyze the relation A "
        "to B, do not consider the relation B to A. Please answer \"Yes\" or \"No\" for "
        "the following question.\n\n"
        "Is A " + relation_phrase + " B?\n\nYour answer is: ";
    const ChatResult r = chat("relation_vlm", prompt, &image, true);
    return yes_probability(r.first_token_scores, r.text);
}

spatial::DepthField TransportSuite::estimate_depth(const ImageHandle& image) {
    const BackendConfig& config = config_for("depth");
    json request{{"image_b64", base64_encode(image.png.data(), image.png.size())}};
    const std::string body = post_json(config, "/depth", request.dump());
    spatial::DepthField field;
    try {
        field = depth_from_json(json::parse(body).at("depth"));
    } catch (const json::exception& e) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              std::string("bad depth response: ") + e.what());
    }
    if (field.width != image.pixels.width || field.height != image.pixels.height) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              "depth field dimensions do not match the image");
    }
    return field;
}

std::string TransportSuite::generate_logic(const std::string& query,
                                           const std::string& entity_facts,
                                           const std::vector<std::string>& categories,
                                           const std::optional<std::string>& feedback) {
    std::string cats;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (i) cats += ", ";
        cats += "\"" + categories[i] + "\"";
    }
    std::string prompt =
        "You're an AI assistant designed to generate the ProbLog code (a logic "
        "programming language similar to Prolog).\n\n"
        "You need to generate a new rule \"target\" that will be used to query the target "
        "objects in the image based on given text prompt.\n\n"
        "The names of entity categories are " + cats + ".\n\n"
        "The output is the code. For example:\n"
        "```problog\n"
        "target(ID) :- entity(ID, \"<some category>\", _, _, _, _), relation(ID, _, _), "
        "attribute(ID, _).\n"
        "```\n\n"
        "Complete the following ProbLog code:\n"
        "```problog\n" + entity_facts + "\n```\n\n"
        "Your output should be the ProbLog code.\n\n";
    if (feedback) prompt += "Feedback from the previous attempt: " + *feedback + "\n\n";
    prompt += "find the target \"" + query + "\"\nYour answer: ";

    const ChatResult r = chat("logic_generator", prompt, nullptr, false);
    return r.text;
}

double TransportSuite::validate_answer(const ImageHandle& annotated_image,
                                       const std::string& query) {
    const std::string prompt =
        "You're an image analyst designed to check if the highlighted object in the image "
        "meets the query description.\n\n"
        "The query is: \"" + query + "\"\n\n"
        "Please check the highlighted object \"A\" in the image and answer the question: "
        "Does the highlighted object meet the query description? Your answer should be "
        "\"Yes\" or \"No\".\n\nYour answer: ";
    const ChatResult r = chat("answerer_vlm", prompt, &annotated_image, true);
    return yes_probability(r.first_token_scores, r.text);
}

bool TransportSuite::has_segmenter() const { return roles_.contains("segmenter"); }

spatial::Bitmask TransportSuite::segment_region(const ImageHandle& image,
                                                const spatial::BoundingBox& box) {
    const BackendConfig& config = config_for("segmenter");
    json request{{"image_b64", base64_encode(image.png.data(), image.png.size())},
                 {"box", json::array({box.x1, box.y1, box.x2, box.y2})}};
    const std::string body = post_json(config, "/segment", request.dump());
    try {
        return mask_from_json(json::parse(body).at("mask"));
    } catch (const json::exception& e) {
        throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                              std::string("bad segmenter response: ") + e.what());
    }
}

}  // namespace grounder::backends

#include "grounder/backends/replay.hpp"

#include <filesystem>
#include <fstream>

namespace grounder::backends {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw CapabilityError(CapabilityErrorKind::Transport,
                              "cannot open fixture file: " + path.string());
    }
    return json::parse(in);
}

void save_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    out << j.dump(2) << "\n";
}

json box_to_json(const spatial::BoundingBox& b) {
    return json::array({b.x1, b.y1, b.x2, b.y2});
}

CallKey make_key(std::string role, json request_summary) {
    CallKey key;
    key.role = std::move(role);
    key.request_summary = std::move(request_summary);
    key.digest = digest_string(key.role + "\n" + key.request_summary.dump());
    return key;
}

}  // namespace

ReplayStore::ReplayStore(std::string directory, bool create_for_recording)
    : directory_(std::move(directory)) {
    if (create_for_recording) {
        fs::create_directories(directory_);
    }
    const fs::path index = fs::path(directory_) / "index.json";
    if (fs::exists(index)) {
        const json idx = load_json_file(index);
        has_segmenter_ = idx.value("has_segmenter", false);
        for (const auto& digest : idx.at("records")) {
            const std::string d = digest.get<std::string>();
            order_.push_back(d);
            records_[d] = load_json_file(fs::path(directory_) / (d + ".json"));
        }
    } else if (!create_for_recording) {
        throw CapabilityError(CapabilityErrorKind::Transport,
                              "replay fixture has no index.json: " + directory_);
    } else {
        flush_index();
    }
}

bool ReplayStore::has(const std::string& digest) const {
    std::lock_guard lock(mutex_);
    return records_.contains(digest);
}

json ReplayStore::response_for(const std::string& digest) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(digest);
    if (it == records_.end()) {
        throw CapabilityError(CapabilityErrorKind::Transport,
                              "no recorded response for digest " + digest);
    }
    return it->second.at("response");
}

void ReplayStore::put(const std::string& digest, const std::string& role,
                      const json& request_summary, const json& response) {
    std::lock_guard lock(mutex_);
    auto it = records_.find(digest);
    if (it != records_.end()) {
        if (it->second.at("request_summary") != request_summary) {
            throw CapabilityError(CapabilityErrorKind::Transport,
                                  "digest collision on distinct requests: " + digest);
        }
        return;  // identical repeated call, already recorded
    }
    json record;
    record["digest"] = digest;
    record["role"] = role;
    record["request_summary"] = request_summary;
    record["response"] = response;
    records_[digest] = record;
    order_.push_back(digest);
    save_json_file(fs::path(directory_) / (digest + ".json"), record);
    flush_index();
}

void ReplayStore::set_has_segmenter(bool value) {
    std::lock_guard lock(mutex_);
    has_segmenter_ = value;
    flush_index();
}

void ReplayStore::flush_index() {
    json idx;
    idx["version"] = 1;
    idx["has_segmenter"] = has_segmenter_;
    idx["records"] = order_;
    save_json_file(fs::path(directory_) / "index.json", idx);
}

CallKey key_caption(const ImageHandle& image) {
    return make_key("caption", json{{"image", image.digest}});
}

CallKey key_extract_categories(const std::string& caption, const std::string& query,
                               const std::optional<std::string>& feedback) {
    json j{{"caption", caption}, {"query", query}};
    j["feedback"] = feedback ? json(*feedback) : json(nullptr);
    return make_key("extract_categories", std::move(j));
}

CallKey key_detect_entities(const ImageHandle& image,
                            const std::vector<std::string>& categories) {
    return make_key("detect_entities", json{{"image", image.digest},
                                            {"categories", categories}});
}

CallKey key_detect_fallback(const ImageHandle& image, const std::string& query) {
    return make_key("detect_fallback", json{{"image", image.digest}, {"query", query}});
}

CallKey key_score_attribute(const ImageHandle& image, const spatial::BoundingBox& box,
                            const std::string& phrase) {
    return make_key("score_attribute", json{{"image", image.digest},
                                            {"box", box_to_json(box)},
                                            {"phrase", phrase}});
}

CallKey key_score_relation(const ImageHandle& image, const Detection& a, const Detection& b,
                           const std::string& phrase) {
    return make_key("score_relation", json{{"image", image.digest},
                                           {"a", detection_to_json(a)},
                                           {"b", detection_to_json(b)},
                                           {"phrase", phrase}});
}

CallKey key_estimate_depth(const ImageHandle& image) {
    return make_key("estimate_depth", json{{"image", image.digest}});
}

CallKey key_generate_logic(const std::string& query, const std::string& entity_facts,
                           const std::vector<std::string>& categories,
                           const std::optional<std::string>& feedback) {
    json j{{"query", query}, {"entity_facts", entity_facts}, {"categories", categories}};
    j["feedback"] = feedback ? json(*feedback) : json(nullptr);
    return make_key("generate_logic", std::move(j));
}

CallKey key_validate_answer(const ImageHandle& annotated, const std::string& query) {
    return make_key("validate_answer", json{{"image", annotated.digest}, {"query", query}});
}

CallKey key_segment_region(const ImageHandle& image, const spatial::BoundingBox& box) {
    return make_key("segment_region", json{{"image", image.digest},
                                           {"box", box_to_json(box)}});
}

json detection_to_json(const Detection& d) {
    return json{{"category", d.category},
                {"box", box_to_json(d.box)},
                {"confidence", d.confidence}};
}

Detection detection_from_json(const json& j) {
    Detection d;
    d.category = j.at("category").get<std::string>();
    const auto& b = j.at("box");
    d.box = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    d.confidence = j.at("confidence").get<double>();
    return d;
}

json depth_to_json(const spatial::DepthField& d) {
    return json{{"w", d.width}, {"h", d.height}, {"values", d.values}};
}

spatial::DepthField depth_from_json(const json& j) {
    spatial::DepthField d;
    d.width = j.at("w").get<int>();
    d.height = j.at("h").get<int>();
    d.values = j.at("values").get<std::vector<float>>();
    return d;
}

json mask_to_json(const spatial::Bitmask& m) {
    return json{{"w", m.width}, {"h", m.height}, {"counts", rle_encode(m)}};
}

spatial::Bitmask mask_from_json(const json& j) {
    return spatial::rle_decode(j.at("w").get<int>(), j.at("h").get<int>(),
                               j.at("counts").get<std::vector<int>>());
}

// ---- ReplaySuite ----

json ReplaySuite::lookup(const CallKey& key) {
    const json response = store_->response_for(key.digest);
    if (response.contains("error")) {
        const auto& err = response.at("error");
        const auto kind =
            capability_error_kind_from_text(err.at("kind").get<std::string>());
        throw CapabilityError(kind.value_or(CapabilityErrorKind::Transport),
                              err.at("detail").get<std::string>());
    }
    return response;
}

std::string ReplaySuite::caption(const ImageHandle& image) {
    return lookup(key_caption(image)).at("text").get<std::string>();
}

std::vector<std::string> ReplaySuite::extract_categories(
    const std::string& caption, const std::string& query,
    const std::optional<std::string>& feedback) {
    return lookup(key_extract_categories(caption, query, feedback))
        .at("categories")
        .get<std::vector<std::string>>();
}

std::vector<Detection> ReplaySuite::detect_entities(
    const ImageHandle& image, const std::vector<std::string>& categories) {
    const json r = lookup(key_detect_entities(image, categories));
    std::vector<Detection> out;
    for (const auto& d : r.at("detections")) out.push_back(detection_from_json(d));
    return out;
}

std::optional<Detection> ReplaySuite::detect_fallback(const ImageHandle& image,
                                                      const std::string& query) {
    const json r = lookup(key_detect_fallback(image, query));
    if (r.at("detection").is_null()) return std::nullopt;
    return detection_from_json(r.at("detection"));
}

double ReplaySuite::score_attribute(const ImageHandle& image, const spatial::BoundingBox& box,
                                    const std::string& attribute_phrase) {
    return lookup(key_score_attribute(image, box, attribute_phrase))
        .at("probability")
        .get<double>();
}

double ReplaySuite::score_relation(const ImageHandle& image, const Detection& a,
                                   const Detection& b, const std::string& relation_phrase) {
    return lookup(key_score_relation(image, a, b, relation_phrase))
        .at("probability")
        .get<double>();
}

spatial::DepthField ReplaySuite::estimate_depth(const ImageHandle& image) {
    return depth_from_json(lookup(key_estimate_depth(image)).at("depth"));
}

std::string ReplaySuite::generate_logic(const std::string& query,
                                        const std::string& entity_facts,
                                        const std::vector<std::string>& categories,
                                        const std::optional<std::string>& feedback) {
    return lookup(key_generate_logic(query, entity_facts, categories, feedback))
        .at("text")
        .get<std::string>();
}

double ReplaySuite::validate_answer(const ImageHandle& annotated_image,
                                    const std::string& query) {
    return lookup(key_validate_answer(annotated_image, query))
        .at("probability")
        .get<double>();
}

spatial::Bitmask ReplaySuite::segment_region(const ImageHandle& image,
                                             const spatial::BoundingBox& box) {
    return mask_from_json(lookup(key_segment_region(image, box)).at("mask"));
}

// ---- RecordingSuite ----

RecordingSuite::RecordingSuite(std::shared_ptr<BackendSuite> inner,
                               std::shared_ptr<ReplayStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {
    store_->set_has_segmenter(inner_->has_segmenter());
}

template <typename Fn>
json RecordingSuite::record(const CallKey& key, Fn&& call) {
    try {
        json response = call();
        store_->put(key.digest, key.role, key.request_summary, response);
        return response;
    } catch (const CapabilityError& e) {
        json response;
        response["error"] = {{"kind", capability_error_kind_text(e.kind)},
                             {"detail", e.detail}};
        store_->put(key.digest, key.role, key.request_summary, response);
        throw;
    }
}

std::string RecordingSuite::caption(const ImageHandle& image) {
    const CallKey key = key_caption(image);
    return record(key, [&] { return json{{"text", inner_->caption(image)}}; })
        .at("text")
        .get<std::string>();
}

std::vector<std::string> RecordingSuite::extract_categories(
    const std::string& caption, const std::string& query,
    const std::optional<std::string>& feedback) {
    const CallKey key = key_extract_categories(caption, query, feedback);
    return record(key,
                  [&] {
                      return json{{"categories",
                                   inner_->extract_categories(caption, query, feedback)}};
                  })
        .at("categories")
        .get<std::vector<std::string>>();
}

std::vector<Detection> RecordingSuite::detect_entities(
    const ImageHandle& image, const std::vector<std::string>& categories) {
    const CallKey key = key_detect_entities(image, categories);
    const json r = record(key, [&] {
        json arr = json::array();
        for (const Detection& d : inner_->detect_entities(image, categories)) {
            arr.push_back(detection_to_json(d));
        }
        return json{{"detections", arr}};
    });
    std::vector<Detection> out;
    for (const auto& d : r.at("detections")) out.push_back(detection_from_json(d));
    return out;
}

std::optional<Detection> RecordingSuite::detect_fallback(const ImageHandle& image,
                                                         const std::string& query) {
    const CallKey key = key_detect_fallback(image, query);
    const json r = record(key, [&] {
        const auto d = inner_->detect_fallback(image, query);
        return json{{"detection", d ? detection_to_json(*d) : json(nullptr)}};
    });
    if (r.at("detection").is_null()) return std::nullopt;
    return detection_from_json(r.at("detection"));
}

double RecordingSuite::score_attribute(const ImageHandle& image,
                                       const spatial::BoundingBox& box,
                                       const std::string& attribute_phrase) {
    const CallKey key = key_score_attribute(image, box, attribute_phrase);
    return record(key,
                  [&] {
                      return json{{"probability",
                                   inner_->score_attribute(image, box, attribute_phrase)}};
                  })
        .at("probability")
        .get<double>();
}

double RecordingSuite::score_relation(const ImageHandle& image, const Detection& a,
                                      const Detection& b, const std::string& relation_phrase) {
    const CallKey key = key_score_relation(image, a, b, relation_phrase);
    return record(key,
                  [&] {
                      return json{{"probability",
                                   inner_->score_relation(image, a, b, relation_phrase)}};
                  })
        .at("probability")
        .get<double>();
}

spatial::DepthField RecordingSuite::estimate_depth(const ImageHandle& image) {
    const CallKey key = key_estimate_depth(image);
    return depth_from_json(
        record(key, [&] { return json{{"depth", depth_to_json(inner_->estimate_depth(image))}}; })
            .at("depth"));
}

std::string RecordingSuite::generate_logic(const std::string& query,
                                           const std::string& entity_facts,
                                           const std::vector<std::string>& categories,
                                           const std::optional<std::string>& feedback) {
    const CallKey key = key_generate_logic(query, entity_facts, categories, feedback);
    return record(key,
                  [&] {
                      return json{{"text", inner_->generate_logic(query, entity_facts,
                                                                  categories, feedback)}};
                  })
        .at("text")
        .get<std::string>();
}

double RecordingSuite::validate_answer(const ImageHandle& annotated_image,
                                       const std::string& query) {
    const CallKey key = key_validate_answer(annotated_image, query);
    return record(key,
                  [&] {
                      return json{{"probability",
                                   inner_->validate_answer(annotated_image, query)}};
                  })
        .at("probability")
        .get<double>();
}

spatial::Bitmask RecordingSuite::segment_region(const ImageHandle& image,
                                                const spatial::BoundingBox& box) {
    const CallKey key = key_segment_region(image, box);
    return mask_from_json(
        record(key,
               [&] { return json{{"mask", mask_to_json(inner_->segment_region(image, box))}}; })
            .at("mask"));
}

}  // namespace grounder::backends

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "grounder/backends/suite.hpp"

namespace grounder::backends {

/// Directory of JSON records keyed by request digest, plus an index file
/// listing record order for audit.
class ReplayStore {
  public:
    ReplayStore(std::string directory, bool create_for_recording);

    bool has(const std::string& digest) const;
    nlohmann::json response_for(const std::string& digest) const;

    /// Records one call. Throws on a digest collision between distinct
    /// requests within the fixture.
    void put(const std::string& digest, const std::string& role,
             const nlohmann::json& request_summary, const nlohmann::json& response);

    void set_has_segmenter(bool value);
    bool has_segmenter() const { return has_segmenter_; }

  private:
    void flush_index();

    std::string directory_;
    bool has_segmenter_ = false;
    std::vector<std::string> order_;
    std::map<std::string, nlohmann::json> records_;  // digest -> full record
    mutable std::mutex mutex_;
};

/// Canonical per-role request encoding shared by recording and replay, so a
/// recorded run replays by digest equality.
struct CallKey {
    std::string role;
    nlohmann::json request_summary;
    std::string digest;
};

CallKey key_caption(const ImageHandle& image);
CallKey key_extract_categories(const std::string& caption, const std::string& query,
                               const std::optional<std::string>& feedback);
CallKey key_detect_entities(const ImageHandle& image,
                            const std::vector<std::string>& categories);
CallKey key_detect_fallback(const ImageHandle& image, const std::string& query);
CallKey key_score_attribute(const ImageHandle& image, const spatial::BoundingBox& box,
                            const std::string& phrase);
CallKey key_score_relation(const ImageHandle& image, const Detection& a, const Detection& b,
                           const std::string& phrase);
CallKey key_estimate_depth(const ImageHandle& image);
CallKey key_generate_logic(const std::string& query, const std::string& entity_facts,
                           const std::vector<std::string>& categories,
                           const std::optional<std::string>& feedback);
CallKey key_validate_answer(const ImageHandle& annotated, const std::string& query);
CallKey key_segment_region(const ImageHandle& image, const spatial::BoundingBox& box);

/// Replays recorded responses; a request with no recorded record is a
/// Transport error.
class ReplaySuite : public BackendSuite {
  public:
    explicit ReplaySuite(std::shared_ptr<ReplayStore> store) : store_(std::move(store)) {}

    std::string caption(const ImageHandle& image) override;
    std::vector<std::string> extract_categories(
        const std::string& caption, const std::string& query,
        const std::optional<std::string>& feedback) override;
    std::vector<Detection> detect_entities(const ImageHandle& image,
                                           const std::vector<std::string>& categories) override;
    std::optional<Detection> detect_fallback(const ImageHandle& image,
                                             const std::string& query) override;
    double score_attribute(const ImageHandle& image, const spatial::BoundingBox& box,
                           const std::string& attribute_phrase) override;
    double score_relation(const ImageHandle& image, const Detection& a, const Detection& b,
                          const std::string& relation_phrase) override;
    spatial::DepthField estimate_depth(const ImageHandle& image) override;
    std::string generate_logic(const std::string& query, const std::string& entity_facts,
                               const std::vector<std::string>& categories,
                               const std::optional<std::string>& feedback) override;
    double validate_answer(const ImageHandle& annotated_image,
                           const std::string& query) override;
    bool has_segmenter() const override { return store_->has_segmenter(); }
    spatial::Bitmask segment_region(const ImageHandle& image,
                                    const spatial::BoundingBox& box) override;

  private:
    nlohmann::json lookup(const CallKey& key);

    std::shared_ptr<ReplayStore> store_;
};

/// Pass-through wrapper that records every call (including capability
/// errors) into a fixture.
class RecordingSuite : public BackendSuite {
  public:
    RecordingSuite(std::shared_ptr<BackendSuite> inner, std::shared_ptr<ReplayStore> store);

    std::string caption(const ImageHandle& image) override;
    std::vector<std::string> extract_categories(
        const std::string& caption, const std::string& query,
        const std::optional<std::string>& feedback) override;
    std::vector<Detection> detect_entities(const ImageHandle& image,
                                           const std::vector<std::string>& categories) override;
    std::optional<Detection> detect_fallback(const ImageHandle& image,
                                             const std::string& query) override;
    double score_attribute(const ImageHandle& image, const spatial::BoundingBox& box,
                           const std::string& attribute_phrase) override;
    double score_relation(const ImageHandle& image, const Detection& a, const Detection& b,
                          const std::string& relation_phrase) override;
    spatial::DepthField estimate_depth(const ImageHandle& image) override;
    std::string generate_logic(const std::string& query, const std::string& entity_facts,
                               const std::vector<std::string>& categories,
                               const std::optional<std::string>& feedback) override;
    double validate_answer(const ImageHandle& annotated_image,
                           const std::string& query) override;
    bool has_segmenter() const override { return inner_->has_segmenter(); }
    spatial::Bitmask segment_region(const ImageHandle& image,
                                    const spatial::BoundingBox& box) override;

  private:
    template <typename Fn>
    nlohmann::json record(const CallKey& key, Fn&& call);

    std::shared_ptr<BackendSuite> inner_;
    std::shared_ptr<ReplayStore> store_;
};

// Response payload encode/decode shared by replay and recording.
nlohmann::json detection_to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);
nlohmann::json depth_to_json(const spatial::DepthField& d);
spatial::DepthField depth_from_json(const nlohmann::json& j);
nlohmann::json mask_to_json(const spatial::Bitmask& m);
spatial::Bitmask mask_from_json(const nlohmann::json& j);

}  // namespace grounder::backends

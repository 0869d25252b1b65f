#pragma once

#include <map>
#include <optional>
#include <string>

#include "grounder/backends/suite.hpp"

namespace grounder::backends {

/// Endpoint configuration for one capability role. Credentials are read from
/// the named environment variable, never stored.
struct BackendConfig {
    std::string endpoint;     // e.g. http://host:port/v1
    std::string model;
    std::string credential_env;
    int timeout_seconds = 60;
    int transport_retries = 2;
    int max_tokens = 512;
};

std::string base64_encode(const std::uint8_t* data, std::size_t size);

/// Backend suite speaking an OpenAI-compatible chat protocol for LLM/VLM
/// roles and a minimal JSON-over-HTTP contract for detector, depth and
/// segmenter services.
///
/// Roles: captioner, category_extractor, logic_generator, relation_vlm,
/// attribute_vlm, answerer_vlm, detector, depth, segmenter (optional).
class TransportSuite : public BackendSuite {
  public:
    explicit TransportSuite(std::map<std::string, BackendConfig> roles);

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
    bool has_segmenter() const override;
    spatial::Bitmask segment_region(const ImageHandle& image,
                                    const spatial::BoundingBox& box) override;

  private:
    struct ChatResult {
        std::string text;
        std::optional<std::vector<std::pair<std::string, double>>> first_token_scores;
    };

    const BackendConfig& config_for(const std::string& role) const;
    ChatResult chat(const std::string& role, const std::string& prompt,
                    const ImageHandle* image, bool want_token_scores);
    std::string post_json(const BackendConfig& config, const std::string& path,
                          const std::string& body);

    std::map<std::string, BackendConfig> roles_;
};

}  // namespace grounder::backends

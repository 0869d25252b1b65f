#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grounder/imaging/image.hpp"
#include "grounder/spatial/geometry.hpp"
#include "grounder/spatial/mask.hpp"

namespace grounder::backends {

enum class CapabilityErrorKind {
    Transport,
    Timeout,
    MalformedOutput,
    ContentPolicyRefusal,
    CapabilityUnavailable,
};

const char* capability_error_kind_text(CapabilityErrorKind kind);
std::optional<CapabilityErrorKind> capability_error_kind_from_text(const std::string& text);

struct CapabilityError : std::runtime_error {
    CapabilityError(CapabilityErrorKind k, const std::string& detail_)
        : std::runtime_error(std::string(capability_error_kind_text(k)) + ": " + detail_),
          kind(k),
          detail(detail_) {}
    CapabilityErrorKind kind;
    std::string detail;
};

/// An image plus its encoded PNG bytes and content digest; the digest keys
/// record/replay lookups.
struct ImageHandle {
    imaging::Image pixels;
    std::vector<std::uint8_t> png;
    std::string digest;

    static ImageHandle from_image(imaging::Image image);
    static ImageHandle from_png(std::vector<std::uint8_t> png_bytes);
    static ImageHandle from_file(const std::string& path);
};

struct Detection {
    std::string category;
    spatial::BoundingBox box;
    double confidence = 0.0;

    bool operator==(const Detection&) const = default;
};

/// FNV-1a 64-bit digest, hex-encoded.
std::string digest_bytes(const std::uint8_t* data, std::size_t size);
std::string digest_string(const std::string& s);

/// The set of perception/language capabilities the pipeline orchestrates.
/// Implementations: HTTP transport, replay fixtures, scripted test stubs.
class BackendSuite {
  public:
    virtual ~BackendSuite() = default;

    virtual std::string caption(const ImageHandle& image) = 0;
    virtual std::vector<std::string> extract_categories(
        const std::string& caption, const std::string& query,
        const std::optional<std::string>& feedback) = 0;
    virtual std::vector<Detection> detect_entities(
        const ImageHandle& image, const std::vector<std::string>& categories) = 0;
    virtual std::optional<Detection> detect_fallback(const ImageHandle& image,
                                                     const std::string& query) = 0;
    virtual double score_attribute(const ImageHandle& image, const spatial::BoundingBox& box,
                                   const std::string& attribute_phrase) = 0;
    virtual double score_relation(const ImageHandle& image, const Detection& a,
                                  const Detection& b, const std::string& relation_phrase) = 0;
    virtual spatial::DepthField estimate_depth(const ImageHandle& image) = 0;
    virtual std::string generate_logic(const std::string& query,
                                       const std::string& entity_facts,
                                       const std::vector<std::string>& categories,
                                       const std::optional<std::string>& feedback) = 0;
    virtual double validate_answer(const ImageHandle& annotated_image,
                                   const std::string& query) = 0;

    virtual bool has_segmenter() const { return false; }
    virtual spatial::Bitmask segment_region(const ImageHandle& image,
                                            const spatial::BoundingBox& box) {
        (void)image;
        (void)box;
        throw CapabilityError(CapabilityErrorKind::CapabilityUnavailable,
                              "no segmenter configured");
    }
};

/// Deduplicate, lowercase, and order-preserve a category list; shared by all
/// suite implementations so replay and transport agree byte for byte.
std::vector<std::string> normalize_categories(const std::vector<std::string>& raw);

/// First-token Yes/No scores renormalized to P(Yes); lexical fallback on the
/// text when no scores are available.
double yes_probability(const std::optional<std::vector<std::pair<std::string, double>>>& scores,
                       const std::string& text);

/// Matches known refusal phrasings; classified refusals are terminal for the
/// sample and never retried.
bool looks_like_refusal(const std::string& text);

}  // namespace grounder::backends

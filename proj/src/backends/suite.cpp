#include "grounder/backends/suite.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace grounder::backends {

const char* capability_error_kind_text(CapabilityErrorKind kind) {
    switch (kind) {
        case CapabilityErrorKind::Transport: return "Transport";
        case CapabilityErrorKind::Timeout: return "Timeout";
        case CapabilityErrorKind::MalformedOutput: return "MalformedOutput";
        case CapabilityErrorKind::ContentPolicyRefusal: return "ContentPolicyRefusal";
        case CapabilityErrorKind::CapabilityUnavailable: return "CapabilityUnavailable";
    }
    return "?";
}

std::optional<CapabilityErrorKind> capability_error_kind_from_text(const std::string& text) {
    if (text == "Transport") return CapabilityErrorKind::Transport;
    if (text == "Timeout") return CapabilityErrorKind::Timeout;
    if (text == "MalformedOutput") return CapabilityErrorKind::MalformedOutput;
    if (text == "ContentPolicyRefusal") return CapabilityErrorKind::ContentPolicyRefusal;
    if (text == "CapabilityUnavailable") return CapabilityErrorKind::CapabilityUnavailable;
    return std::nullopt;
}

std::string digest_bytes(const std::uint8_t* data, std::size_t size) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= data[i];
        hash *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string digest_string(const std::string& s) {
    return digest_bytes(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

ImageHandle ImageHandle::from_image(imaging::Image image) {
    ImageHandle h;
    h.pixels = std::move(image);
    h.png = imaging::encode_png(h.pixels);
    h.digest = digest_bytes(h.png.data(), h.png.size());
    return h;
}

ImageHandle ImageHandle::from_png(std::vector<std::uint8_t> png_bytes) {
    ImageHandle h;
    h.pixels = imaging::decode_png(png_bytes);
    h.png = std::move(png_bytes);
    h.digest = digest_bytes(h.png.data(), h.png.size());
    return h;
}

ImageHandle ImageHandle::from_file(const std::string& path) {
    return from_png(imaging::read_file(path));
}

std::vector<std::string> normalize_categories(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::string c : raw) {
        std::transform(c.begin(), c.end(), c.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        // trim
        const auto first = c.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) continue;
        const auto last = c.find_last_not_of(" \t\r\n");
        c = c.substr(first, last - first + 1);
        if (seen.insert(c).second) out.push_back(std::move(c));
    }
    return out;
}

namespace {

std::string trimmed_lower(const std::string& s) {
    std::string t;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!t.empty()) {
            break;
        }
    }
    return t;
}

bool token_is(const std::string& token, const char* word) {
    std::string t = trimmed_lower(token);
    // strip trailing punctuation
    while (!t.empty() && !std::isalpha(static_cast<unsigned char>(t.back()))) t.pop_back();
    return t == word;
}

}  // namespace

double yes_probability(
    const std::optional<std::vector<std::pair<std::string, double>>>& scores,
    const std::string& text) {
    if (scores && !scores->empty()) {
        double best_yes = -1.0;
        double best_no = -1.0;
        for (const auto& [token, logprob] : *scores) {
            const double p = std::exp(logprob);
            if (token_is(token, "yes")) best_yes = std::max(best_yes, p);
            if (token_is(token, "no")) best_no = std::max(best_no, p);
        }
        if (best_yes >= 0.0 || best_no >= 0.0) {
            const double py = std::max(best_yes, 0.0);
            const double pn = std::max(best_no, 0.0);
            if (py + pn > 0.0) return py / (py + pn);
        }
    }
    const std::string head = trimmed_lower(text);
    if (head.rfind("yes", 0) == 0) return 1.0;
    if (head.rfind("no", 0) == 0) return 0.0;
    throw CapabilityError(CapabilityErrorKind::MalformedOutput,
                          "no Yes/No scores and answer text is neither: " + text);
}

bool looks_like_refusal(const std::string& text) {
    std::string lower;
    lower.reserve(text.size());
    for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const char* kPatterns[] = {
        "content policy",
        "i cannot assist",
        "i can't assist",
        "i'm sorry, but i can",
        "unable to comply",
    };
    for (const char* p : kPatterns) {
        if (lower.find(p) != std::string::npos) return true;
    }
    return false;
}

}  // namespace grounder::backends

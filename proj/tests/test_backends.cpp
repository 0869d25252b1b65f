#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <unistd.h>

#include "grounder/backends/replay.hpp"
#include "grounder/backends/suite.hpp"
#include "support/scripted_suite.hpp"

using namespace grounder;
using namespace grounder::backends;

namespace {

std::string fresh_dir(const char* tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     (std::string("grounder_test_") + tag + "_" +
                      std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("normalize_categories lowercases, trims and dedupes") {
    CHECK(normalize_categories({" Person", "car", "PERSON", "", "Car "}) ==
          std::vector<std::string>{"person", "car"});
}

TEST_CASE("yes_probability renormalizes first-token scores") {
    using Scores = std::vector<std::pair<std::string, double>>;
    CHECK(yes_probability(Scores{{"Yes", std::log(0.6)}, {"No", std::log(0.2)}}, "Yes") ==
          doctest::Approx(0.75).epsilon(1e-9));
    CHECK(yes_probability(Scores{{"Yes", std::log(0.1)}, {"No", std::log(0.4)}}, "No") ==
          doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("yes_probability lexical fallback") {
    CHECK(yes_probability(std::nullopt, "Yes") == doctest::Approx(1.0));
    CHECK(yes_probability(std::nullopt, "No.") == doctest::Approx(0.0));
    CHECK(yes_probability(std::nullopt, "yes, it does") == doctest::Approx(1.0));
    CHECK_THROWS_AS(yes_probability(std::nullopt, "maybe"), CapabilityError);
}

TEST_CASE("refusal classification") {
    CHECK(looks_like_refusal("I cannot assist with that due to content policy."));
    CHECK(!looks_like_refusal("The person on the left is wearing a blue shirt."));
}

TEST_CASE("digest is stable FNV-1a") {
    CHECK(digest_string("abc") == "e71fa2190541574b");
    CHECK(digest_string("") == "cbf29ce484222325");
    CHECK(digest_string("abc") != digest_string("abd"));
}

TEST_CASE("image handle round-trips through PNG bytes") {
    imaging::Image img = imaging::Image::filled(6, 4, {9, 9, 9});
    img.set(2, 1, {255, 0, 0});
    const ImageHandle h = ImageHandle::from_image(img);
    CHECK(h.pixels == img);
    const ImageHandle h2 = ImageHandle::from_png(h.png);
    CHECK(h2.pixels == img);
    CHECK(h2.digest == h.digest);
}

TEST_CASE("record then replay reproduces responses") {
    const std::string dir = fresh_dir("replay");
    auto store = std::make_shared<ReplayStore>(dir, true);

    auto scripted = std::make_shared<testing::ScriptedSuite>();
    scripted->on_caption = [](const ImageHandle&) { return "two people and a car"; };
    scripted->on_categories = [](const std::string&, const std::string&,
                                 const std::optional<std::string>& feedback) {
        return feedback ? std::vector<std::string>{"cat"}
                        : std::vector<std::string>{"person", "car"};
    };
    scripted->on_detect = [](const ImageHandle&, const std::vector<std::string>&) {
        return std::vector<Detection>{{"person", {1, 2, 10, 20}, 0.9}};
    };
    scripted->on_depth = [](const ImageHandle&) {
        return spatial::DepthField{2, 2, {0.1f, 0.2f, 0.3f, 0.4f}};
    };
    scripted->segmenter = true;
    scripted->on_segment = [](const ImageHandle&, const spatial::BoundingBox& box) {
        return spatial::Bitmask::from_box(30, 30, box);
    };

    RecordingSuite rec(scripted, store);
    const ImageHandle img = ImageHandle::from_image(imaging::Image::filled(8, 8, {1, 2, 3}));
    const std::string caption = rec.caption(img);
    const auto cats = rec.extract_categories(caption, "q", std::nullopt);
    const auto cats_fb = rec.extract_categories(caption, "q", std::string("try again"));
    const auto dets = rec.detect_entities(img, cats);
    const auto depth = rec.estimate_depth(img);
    const auto mask = rec.segment_region(img, {1, 2, 10, 20});
    store->set_has_segmenter(true);

    auto store2 = std::make_shared<ReplayStore>(dir, false);
    ReplaySuite replay(store2);
    CHECK(replay.caption(img) == caption);
    CHECK(replay.extract_categories(caption, "q", std::nullopt) == cats);
    CHECK(replay.extract_categories(caption, "q", std::string("try again")) == cats_fb);
    CHECK(replay.detect_entities(img, cats) == dets);
    const auto depth2 = replay.estimate_depth(img);
    CHECK(depth2.values == depth.values);
    CHECK(replay.has_segmenter());
    CHECK(replay.segment_region(img, {1, 2, 10, 20}) == mask);
}

TEST_CASE("replay misses are transport errors") {
    const std::string dir = fresh_dir("replay_miss");
    { ReplayStore creator(dir, true); }
    auto store = std::make_shared<ReplayStore>(dir, false);
    ReplaySuite replay(store);
    const ImageHandle img = ImageHandle::from_image(imaging::Image::filled(2, 2, {0, 0, 0}));
    try {
        replay.caption(img);
        FAIL("expected CapabilityError");
    } catch (const CapabilityError& e) {
        CHECK(e.kind == CapabilityErrorKind::Transport);
    }
}

TEST_CASE("recorded capability errors replay as the same error") {
    const std::string dir = fresh_dir("replay_err");
    auto store = std::make_shared<ReplayStore>(dir, true);
    auto scripted = std::make_shared<testing::ScriptedSuite>();
    scripted->on_caption = [](const ImageHandle&) -> std::string {
        throw CapabilityError(CapabilityErrorKind::ContentPolicyRefusal, "nope");
    };
    RecordingSuite rec(scripted, store);
    const ImageHandle img = ImageHandle::from_image(imaging::Image::filled(3, 3, {7, 7, 7}));
    CHECK_THROWS_AS(rec.caption(img), CapabilityError);

    ReplaySuite replay(std::make_shared<ReplayStore>(dir, false));
    try {
        replay.caption(img);
        FAIL("expected CapabilityError");
    } catch (const CapabilityError& e) {
        CHECK(e.kind == CapabilityErrorKind::ContentPolicyRefusal);
        CHECK(e.detail == "nope");
    }
}

TEST_CASE("fixture collision detection") {
    const std::string dir = fresh_dir("collide");
    ReplayStore store(dir, true);
    const nlohmann::json req = {{"x", 1}};
    store.put("d1", "caption", req, {{"text", "a"}});
    CHECK_NOTHROW(store.put("d1", "caption", req, {{"text", "a"}}));
    CHECK_THROWS(store.put("d1", "caption", {{"x", 2}}, {{"text", "b"}}));
}

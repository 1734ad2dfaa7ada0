#include "mnemos/prompts.hpp"
#include "mnemos/text.hpp"
#include "mnemos/types.hpp"

#include <doctest.h>

using namespace mnemos;

TEST_CASE("canonical_key folds case and collapses whitespace") {
    CHECK(text::canonical_key("  Canadian   Rockies\t") == "canadian rockies");
    CHECK(text::canonical_key("dolomites ") == text::canonical_key("Dolomites"));
    CHECK(text::canonical_key("   ").empty());
}

TEST_CASE("words splits on non-alphanumeric runs and keeps UTF-8 letters") {
    CHECK(text::words("Hiking, in the DOLOMITES!") ==
          std::vector<std::string>{"hiking", "in", "the", "dolomites"});
    CHECK(text::words("crème brûlée") == std::vector<std::string>{"crème", "brûlée"});
    CHECK(text::words("...").empty());
}

TEST_CASE("code_points never splits a multi-byte sequence") {
    auto cps = text::code_points("a€b😀");
    REQUIRE(cps.size() == 4);
    CHECK(cps[1] == "€");
    CHECK(cps[3] == "😀");
}

TEST_CASE("contains_ci") {
    CHECK(text::contains_ci("I suggested the Dolomites", "dolomites"));
    CHECK_FALSE(text::contains_ci("Alps", "dolomites"));
    CHECK(text::contains_ci("anything", ""));
}

TEST_CASE("cosine handles zero vectors and dimension mismatch") {
    EmbeddingVector a{{1, 0}}, b{{0, 1}}, z{{0, 0}};
    CHECK(cosine(a, a) == doctest::Approx(1.0));
    CHECK(cosine(a, b) == doctest::Approx(0.0));
    CHECK(cosine(a, z) == 0.0);
    CHECK_THROWS_AS(cosine(a, EmbeddingVector{{1, 0, 0}}), DimensionMismatch);
}

TEST_CASE("normalize") {
    EmbeddingVector v{{3, 4, 0}};
    normalize(v);
    CHECK(v.values[0] == doctest::Approx(0.6));
    CHECK(v.values[1] == doctest::Approx(0.8));
    EmbeddingVector z{{0, 0}};
    normalize(z);
    CHECK(z.is_zero());
}

TEST_CASE("render_template substitutes known keys only") {
    CHECK(render_template("{{a}} and {{b}} and {{c}}", {{"a", "1"}, {"b", "{{a}}"}}) ==
          "1 and {{a}} and {{c}}");
}

TEST_CASE("format_timestamp") {
    CHECK(format_timestamp(0) == "1970-01-01 00:00 UTC");
    CHECK(format_timestamp(1710493200000LL) == "2024-03-15 09:00 UTC");
}

TEST_CASE("builtin prompts carry every placeholder the orchestrator fills") {
    auto p = PromptSet::builtin();
    CHECK(p.extractor_user.find("{{text}}") != std::string::npos);
    for (auto key : {"{{now}}", "{{graph}}", "{{chunks}}", "{{history}}", "{{feedback}}", "{{query}}"}) {
        CHECK(p.answerer_user.find(key) != std::string::npos);
    }
    for (auto key : {"{{query}}", "{{answer}}", "{{context}}"}) {
        CHECK(p.critic_user.find(key) != std::string::npos);
    }
    CHECK_FALSE(p.answerer_system.empty());
    CHECK(PromptSet::load("/nonexistent/dir") == p);
}

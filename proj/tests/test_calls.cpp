#include <doctest.h>

#include "taps/calls.hpp"
#include "taps/util.hpp"

using namespace taps;

TEST_CASE("parse_calls basic extraction") {
  ParseReport report = parse_calls(R"(GetHomes(area="Hayward", number_of_beds="1"))");
  REQUIRE(report.calls.size() == 1);
  CHECK(report.calls[0].function == "GetHomes");
  REQUIRE(report.calls[0].arguments.size() == 2);
  CHECK(report.calls[0].arguments[0] == std::pair<std::string, std::string>{"area", "Hayward"});
  CHECK(report.calls[0].arguments[1] ==
        std::pair<std::string, std::string>{"number_of_beds", "1"});
  CHECK(report.discarded_spans.empty());
}

TEST_CASE("parse_calls on empty input") {
  ParseReport report = parse_calls("");
  CHECK(report.calls.empty());
  CHECK(report.discarded_spans.empty());
}

TEST_CASE("surrounding prose is discarded with a reason") {
  ParseReport report = parse_calls("Sure! GetMedia(genre=\"funny\")");
  REQUIRE(report.calls.size() == 1);
  CHECK(report.calls[0].function == "GetMedia");
  REQUIRE(report.discarded_spans.size() == 1);
  CHECK(report.discarded_spans[0].reason == "prose");
  CHECK(trim(report.discarded_spans[0].text) == "Sure!");
}

TEST_CASE("markdown fences and list markers get their own reasons") {
  ParseReport report = parse_calls("```\nGetWeather(city=\"Paris\")\n```\n- GetMusic(genre=\"jazz\")");
  CHECK(report.calls.size() == 2);
  REQUIRE(report.discarded_spans.size() >= 2);
  CHECK(report.discarded_spans[0].reason == "markdown-fence");
}

TEST_CASE("quote styles are normalized") {
  ParseReport report = parse_calls("GetMusic(artist='Miles Davis', year=1959)");
  REQUIRE(report.calls.size() == 1);
  CHECK(report.calls[0].arguments[0].second == "Miles Davis");
  CHECK(report.calls[0].arguments[1].second == "1959");
  CHECK(render_call(report.calls[0]) == R"(GetMusic(artist="Miles Davis", year="1959"))");
}

TEST_CASE("list-shaped values stay verbatim") {
  ParseReport report = parse_calls(R"(GetEvents(genre=["Blues", "Basketball"]))");
  REQUIRE(report.calls.size() == 1);
  CHECK(report.calls[0].arguments[0].second == R"(["Blues", "Basketball"])");
}

TEST_CASE("near-miss spans are recorded, not parsed") {
  ParseReport report = parse_calls("GetHomes(area=\"Hayward\nGetMedia(genre=\"funny\")");
  REQUIRE(report.calls.size() == 1);
  CHECK(report.calls[0].function == "GetMedia");
  bool found = false;
  for (const auto& span : report.discarded_spans) {
    if (span.reason.rfind("malformed-call", 0) == 0) found = true;
  }
  CHECK(found);
}

TEST_CASE("every input character is attributed to a call or a discarded span") {
  for (const std::string& input :
       {std::string("noise GetHomes(area=\"x\") trailing\nGetBad(=) end"),
        std::string("  GetA(x=\"1\")  GetB()\n\nplain tail"),
        std::string("GetHomes(area=\"Hayward\nGetMedia(genre=\"funny\") done")}) {
    ParseReport report = parse_calls(input);
    std::size_t covered = 0;
    REQUIRE(report.call_spans.size() == report.calls.size());
    for (const auto& [begin, end] : report.call_spans) covered += end - begin;
    for (const auto& span : report.discarded_spans) covered += span.text.size();
    CHECK(covered == input.size());
  }
}

TEST_CASE("zero-argument call renders with bare parens") {
  CHECK(render_call(ApiCall{"GetWeather", {}}) == "GetWeather()");
  ParseReport report = parse_calls("GetWeather()");
  REQUIRE(report.calls.size() == 1);
  CHECK(report.calls[0].arguments.empty());
}

TEST_CASE("round trip on the apartment fixture") {
  std::string text = R"(GetHomes(area="Hayward", number_of_beds="1"))";
  ParseReport report = parse_calls(text);
  REQUIRE(report.calls.size() == 1);
  CHECK(render_call(report.calls[0]) == text);
}

TEST_CASE("round trip property over generated calls") {
  Rng rng(20250810);
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  for (int iter = 0; iter < 300; ++iter) {
    ApiCall call;
    call.function = "Get";
    for (int i = 0; i < 1 + static_cast<int>(rng.uniform_int(8)); ++i) {
      call.function += letters[rng.uniform_int(letters.size())];
    }
    int argc = static_cast<int>(rng.uniform_int(5));
    for (int a = 0; a < argc; ++a) {
      std::string name(1, letters[rng.uniform_int(letters.size())]);
      name += std::to_string(a);  // unique within the call
      std::string value;
      int len = 1 + static_cast<int>(rng.uniform_int(10));
      const std::string value_chars = "abc XYZ019:,'\"()?-\\";
      for (int v = 0; v < len; ++v) value += value_chars[rng.uniform_int(value_chars.size())];
      if (trim(value).empty()) value = "x";
      call.arguments.emplace_back(name, value);
    }
    ParseReport report = parse_calls(render_call(call));
    REQUIRE(report.calls.size() == 1);
    CHECK(report.calls[0] == call);
    CHECK(report.discarded_spans.empty());
  }
}

TEST_CASE("calls keep input order") {
  ParseReport report = parse_calls("GetB(x=\"1\")\nGetA(y=\"2\")");
  REQUIRE(report.calls.size() == 2);
  CHECK(report.calls[0].function == "GetB");
  CHECK(report.calls[1].function == "GetA");
}

TEST_CASE("to_triplets") {
  std::vector<ApiCall> calls = {
      ApiCall{"GetHomes", {{"area", "Hayward"}, {"number_of_beds", "1"}}}};
  auto triplets = to_triplets(calls);
  REQUIRE(triplets.size() == 2);
  CHECK(triplets[0] == SlotTriplet{"GetHomes", "area", "Hayward"});
  CHECK(triplets[1] == SlotTriplet{"GetHomes", "number_of_beds", "1"});

  CHECK(to_triplets({}).empty());

  SUBCASE("argumentless calls contribute a sentinel") {
    auto sentinel = to_triplets({ApiCall{"GetWeather", {}}});
    REQUIRE(sentinel.size() == 1);
    CHECK(sentinel[0] == SlotTriplet{"GetWeather", "", ""});
  }

  SUBCASE("duplicate calls contribute duplicate triplets") {
    std::vector<ApiCall> twice = {calls[0], calls[0]};
    CHECK(to_triplets(twice).size() == 4);
  }

  SUBCASE("size equals the sum of max(1, argc)") {
    std::vector<ApiCall> mixed = {ApiCall{"GetA", {}},
                                  ApiCall{"GetB", {{"x", "1"}}},
                                  ApiCall{"GetC", {{"x", "1"}, {"y", "2"}}}};
    CHECK(to_triplets(mixed).size() == 1 + 1 + 2);
  }
}

TEST_CASE("triplet normalization folds case and whitespace, not content") {
  SlotTriplet a{"GetHomes", "Area", "  San  Jose "};
  SlotTriplet b{"gethomes", "area", "san jose"};
  CHECK(normalized_key(a) == normalized_key(b));
  SlotTriplet c{"GetHomes", "area", "12:00"};
  SlotTriplet d{"GetHomes", "area", "12 o'clock"};
  CHECK(normalized_key(c) != normalized_key(d));
}

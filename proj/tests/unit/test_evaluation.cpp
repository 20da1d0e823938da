#include "doctest.h"
#include "support.hpp"

#include "arcweaver/evaluation/evaluate.hpp"

using namespace arcweaver;
using namespace arcweaver::evaluation;
namespace t = arcweaver::testing;

namespace {

Json load(const std::string& name) { return Json::parse(t::slurp(t::fixtures() / "eval" / name)); }

struct Harness {
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>(64);
  LlmGateway gateway{mock};
};

// Gold built from an export: every arc and character restated verbatim.
Json gold_from(const Json& exported) {
  Json gold = {{"arcs", Json::array()}, {"characters", Json::array()}};
  for (const auto& a : exported["arcs"]) {
    gold["arcs"].push_back({{"title", a["title"]}, {"description", a["description"]}, {"arc_type", a["arc_type"]}});
  }
  for (const auto& c : exported["characters"]) {
    gold["characters"].push_back({{"name", c["preferred_name"]}, {"alternative_names", c["alternative_names"]}});
  }
  return gold;
}

}  // namespace

TEST_CASE("ratios print three decimals and n/a for an empty denominator") {
  CHECK(Ratio{25, 28}.format() == "25/28 = 0.893");
  CHECK(Ratio{61, 62}.format() == "61/62 = 0.984");
  CHECK(Ratio{0, 0}.format() == "0/0 = n/a");
  CHECK_FALSE(Ratio{0, 0}.value());
  CHECK(*Ratio{1, 4}.value() == 0.25);
}

TEST_CASE("scores on the evaluation fixture") {
  Harness h;
  const auto extracted = load("extracted.json");
  const auto gold_doc = load("gold.json");
  auto report = evaluate(extracted, GoldAnnotations::from_json(gold_doc), h.gateway);

  // Independent count: an extracted arc pairs with a gold arc of the same
  // type and identical text, and every fixture text is distinct within a type.
  std::array<std::size_t, 3> shared{}, ext{}, gold{};
  for (const auto& a : extracted["arcs"]) {
    auto type = static_cast<std::size_t>(a["arc_type"].get<ArcType>());
    ++ext[type];
    for (const auto& g : gold_doc["arcs"]) {
      if (g["arc_type"] == a["arc_type"] && g["title"] == a["title"] && g["description"] == a["description"]) {
        ++shared[type];
      }
    }
  }
  for (const auto& g : gold_doc["arcs"]) ++gold[static_cast<std::size_t>(g["arc_type"].get<ArcType>())];
  for (std::size_t i = 0; i < 3; ++i) {
    CAPTURE(i);
    CHECK(report.by_type[i].precision.numerator == shared[i]);
    CHECK(report.by_type[i].precision.denominator == ext[i]);
    CHECK(report.by_type[i].recall.denominator == gold[i]);
  }

  const auto& anthology = report.score(ArcType::Anthology);
  CHECK(anthology.precision.format() == "25/28 = 0.893");
  CHECK(std::abs(*anthology.precision.value() - 0.893) <= 0.0005);
  CHECK(anthology.recall.format() == "25/27 = 0.926");
  CHECK(report.score(ArcType::Soap).recall.format() == "3/4 = 0.750");
  CHECK(report.score(ArcType::GenreSpecific).precision.format() == "0/0 = n/a");
  CHECK(report.overall_precision.format() == "28/31 = 0.903");

  CHECK(report.character_precision.format() == "61/62 = 0.984");
  CHECK(std::abs(*report.character_precision.value() - 0.984) <= 0.0005);
  CHECK(report.character_recall.format() == "61/63 = 0.968");
  CHECK(report.duplicate_characters == 1);

  for (const auto& m : report.matches) {
    CHECK(m.extracted_title == m.gold_title);
    CHECK(m.score > 0.999999);
  }

  auto text = report.to_text();
  CHECK(text.find("Anthology precision: 25/28 = 0.893\n") != std::string::npos);
  CHECK(text.find("Character precision: 61/62 = 0.984\n") != std::string::npos);
  CHECK(text.find("GenreSpecific recall: 0/0 = n/a\n") != std::string::npos);
  auto json = report.to_json();
  CHECK(json["arc_types"]["Anthology"]["precision"]["numerator"] == 25);
  CHECK(json["arc_types"]["GenreSpecific"]["recall"]["value"].is_null());
  CHECK(json["characters"]["duplicates"] == 1);
}

TEST_CASE("the fixture export is a loadable export") {
  Store store(":memory:");
  store.import_json(load("extracted.json"));
  CHECK(store.integrity_violations().empty());
  CHECK(store.export_json() == load("extracted.json"));
}

TEST_CASE("an export scored against itself is perfect") {
  Harness h;
  t::TempDir dir;
  Engine e(t::golden_config(dir.path()));
  t::run_golden(e);
  auto exported = e.store.export_json(t::kSeries);
  auto report = evaluate(exported, GoldAnnotations::from_json(gold_from(exported)), h.gateway);
  CHECK(report.overall_precision.numerator == exported["arcs"].size());
  CHECK(report.overall_recall.numerator == exported["arcs"].size());
  CHECK(*report.overall_precision.value() == 1.0);
  CHECK(*report.character_precision.value() == 1.0);
  CHECK(*report.character_recall.value() == 1.0);
  CHECK(report.duplicate_characters == 0);
}

TEST_CASE("arcs of another series are ignored when gold names one") {
  Harness h;
  auto extracted = load("extracted.json");
  auto gold_doc = load("gold.json");
  for (auto& a : extracted["arcs"]) a["series"] = "Elsewhere";
  auto report = evaluate(extracted, GoldAnnotations::from_json(gold_doc), h.gateway);
  CHECK(report.overall_precision.format() == "0/0 = n/a");
  CHECK(report.overall_recall.format() == "0/31 = 0.000");
}

TEST_CASE("malformed gold annotations name the field") {
  auto bad = [](Json doc) -> std::string {
    try {
      GoldAnnotations::from_json(doc);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedInput);
      return e.what();
    }
    FAIL("accepted");
    return {};
  };
  CHECK(bad(Json::array()).find("document") != std::string::npos);
  CHECK(bad({{"arcs", 3}}).find("arcs") != std::string::npos);
  CHECK(bad({{"arcs", {{{"title", "x"}, {"arc_type", "Soap"}}}}}).find("arcs[0]") != std::string::npos);
  CHECK(bad({{"arcs", {{{"title", "x"}, {"description", "y"}, {"arc_type", "Sitcom"}}}}}).find("arc_type") !=
        std::string::npos);
  CHECK(bad({{"arcs", {{{"title", "x"}, {"description", "y"}, {"arc_type", "Soap"}, {"episodes", {{{"season", 0}, {"episode", 1}}}}}}}})
            .find("episodes") != std::string::npos);
  CHECK(bad({{"arcs", Json::array()}, {"characters", {{{"name", ""}}}}}).find("characters[0].name") !=
        std::string::npos);
}

TEST_CASE("evaluation input guards") {
  Harness h;
  GoldAnnotations gold;
  CHECK_THROWS_AS(evaluate(Json::object(), gold, h.gateway), Error);
  CHECK_THROWS_AS(evaluate(load("extracted.json"), gold, h.gateway, 0.0), Error);
  auto empty = evaluate({{"arcs", Json::array()}}, gold, h.gateway);
  CHECK(empty.overall_precision.format() == "0/0 = n/a");
  CHECK(h.mock->consumed() == 0);
}

#include <random>

#include "arcweaver/registry/registry.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace arcweaver;
using namespace arcweaver::oracles;

TEST_CASE("jaccard_similarity equals a brute-force set oracle") {
  std::mt19937 rng(2024);
  for (int i = 0; i < 2000; ++i) {
    auto a = random_character(rng, 2 * i);
    auto b = random_character(rng, 2 * i + 1);
    CAPTURE(a.preferred_name);
    CAPTURE(b.preferred_name);
    CHECK(registry::jaccard_similarity(a, b) == oracle_jaccard(a, b));
  }
}

TEST_CASE("Frost and Jerry Frost score one half and are suggested") {
  Character frost{"c1", "Frost", {}, "S"};
  Character jerry{"c2", "Jerry Frost", {}, "S"};
  CHECK(registry::jaccard_similarity(frost, jerry) == 0.5);
  std::vector<Character> reg = {frost, jerry, {"c3", "Nora Hale", {}, "S"}};
  auto s = registry::suggest_duplicates(reg);
  REQUIRE(s.size() == 1);
  CHECK(s[0].first_id == "c1");
  CHECK(s[0].second_id == "c2");
  CHECK(s[0].score == 0.5);
  CHECK(registry::suggest_duplicates(reg, 0.51).empty());
}

TEST_CASE("preferred-name replacement is idempotent") {
  std::vector<Character> reg = {{"c1", "Nora Hale", {"Nora", "Dr. Nora Hale"}, "S"},
                                {"c2", "Sam Okafor", {"Sam", "Dr. Sam Okafor"}, "S"},
                                {"c3", "Claire Hale", {"Claire"}, "S"},
                                {"c4", "Jerry Frost", {"Jerry"}, "S"}};
  CHECK(registry::replace_with_preferred("Dr. Nora Hale meets Sam. Claire calls Nora.", reg) ==
        "Nora Hale meets Sam Okafor. Claire Hale calls Nora Hale.");
  CHECK(registry::replace_with_preferred("Samantha and Noras stay.", reg) == "Samantha and Noras stay.");

  std::mt19937 rng(3);
  const std::vector<std::string> words = {"Nora", "Sam", "Dr.", "Hale", "Claire", "Okafor", "Jerry", "Frost",
                                          "meets", "the", ",", ".", "Nora Hale", "Samuel"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += words[rng() % words.size()] + " ";
    auto once = registry::replace_with_preferred(text, reg);
    CHECK(registry::replace_with_preferred(once, reg) == once);
  }
}

TEST_CASE("ambiguous alternative names are never substituted") {
  std::vector<Character> reg = {{"c1", "Nora Hale", {"Hale"}, "S"}, {"c2", "Claire Hale", {"Hale"}, "S"}};
  CHECK(registry::replace_with_preferred("Hale arrives.", reg) == "Hale arrives.");
  CHECK(registry::resolve_name("hale", reg).empty());
  CHECK(registry::resolve_name("nora hale", reg) == "c1");
}

TEST_CASE("normalize_mentions creates and extends characters") {
  auto mock = std::make_shared<MockProvider>(8);
  mock->append({{"task", "normalize_mentions"},
                {"response",
                 {{"characters",
                   {{{"existing_id", "c1"}, {"preferred_name", ""}, {"mentions", {"Dr. Hale"}}},
                    {{"existing_id", ""}, {"preferred_name", "Tom Reyes"}, {"mentions", {"Tom Reyes", "Tom"}}}}}}}});
  LlmGateway gw(mock);
  PromptLibrary prompts(testing::prompts_dir());
  IdGenerator ids(IdGenerator::Mode::Derived);
  std::vector<Character> existing = {{"c1", "Nora Hale", {}, "S"}};
  auto changed = registry::normalize_mentions({"Dr. Hale", "Tom Reyes", "Tom"}, existing, "S", gw, prompts, ids);
  REQUIRE(changed.size() == 2);
  std::map<std::string, Character> by_name;
  for (const auto& c : changed) by_name[c.preferred_name] = c;
  CHECK(by_name["Nora Hale"].alternative_names == std::set<std::string>{"Dr. Hale"});
  CHECK(by_name["Tom Reyes"].alternative_names == std::set<std::string>{"Tom"});
  CHECK(by_name["Tom Reyes"].character_id == ids.next("character|S|tom reyes"));

  std::vector<Character> merged = existing;
  merged[0] = by_name["Nora Hale"];
  merged.push_back(by_name["Tom Reyes"]);
  CHECK(validate_registry(merged).ok());
}

TEST_CASE("normalize_mentions re-asks when a mention is left out") {
  auto mock = std::make_shared<MockProvider>(8);
  mock->append({{"task", "normalize_mentions"},
                {"response", {{"characters", {{{"existing_id", ""}, {"preferred_name", "A"}, {"mentions", {"A"}}}}}}}});
  mock->append({{"task", "normalize_mentions"},
                {"response",
                 {{"characters",
                   {{{"existing_id", ""}, {"preferred_name", "A"}, {"mentions", {"A"}}},
                    {{"existing_id", ""}, {"preferred_name", "B"}, {"mentions", {"B"}}}}}}}});
  LlmGateway gw(mock);
  PromptLibrary prompts(testing::prompts_dir());
  IdGenerator ids(IdGenerator::Mode::Derived);
  auto changed = registry::normalize_mentions({"A", "B"}, {}, "S", gw, prompts, ids);
  CHECK(changed.size() == 2);
  CHECK(mock->consumed() == 2);
}

TEST_CASE("merge_characters folds names and references") {
  Store s(":memory:");
  s.upsert_series({"S", "drama"});
  s.insert_character({"c1", "Jerry Frost", {}, "S"});
  s.insert_character({"c2", "Frost", {"Nurse Frost"}, "S"});
  s.insert_arc({"a1", "Burnout", "A nurse burns out.", ArcType::Soap, {"c2"}, "S",
                {{"p1", "a1", "Collapses.", "S", 1, 1, {"c2"}}}});
  auto kept = registry::merge_characters("c1", "c2", s);
  CHECK(kept.alternative_names == std::set<std::string>{"Frost", "Nurse Frost"});
  CHECK_FALSE(s.character_exists("c2"));
  CHECK(s.arc("a1")->main_characters == std::set<std::string>{"c1"});
  CHECK(s.arc("a1")->progressions[0].interfering_characters == std::set<std::string>{"c1"});
  CHECK_THROWS_AS(registry::merge_characters("c1", "c1", s), Error);
  CHECK(s.integrity_violations().empty());
}

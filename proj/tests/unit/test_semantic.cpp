#include <cmath>
#include <numeric>
#include <random>

#include "arcweaver/semantic/semantic.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace arcweaver;
using namespace arcweaver::semantic;
using namespace arcweaver::oracles;

namespace {

EmbeddingVector vec(std::vector<float> v) { return {std::move(v)}; }

}  // namespace

TEST_CASE("PCA explained variances match a Jacobi covariance oracle") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 47;  // 4..50
    const std::size_t d = 1 + rng() % 64;  // 1..64
    Matrix rows(n, std::vector<double>(d));
    for (auto& r : rows)
      for (auto& x : r) x = u(rng);
    CAPTURE(n);
    CAPTURE(d);
    auto pca = pca_3d(rows);
    auto oracle = jacobi_eigenvalues(covariance(rows));
    double total = 0;
    for (double l : oracle) total += l;
    for (std::size_t a = 0; a < 3; ++a) {
      const double expected = a < oracle.size() ? std::max(0.0, oracle[a]) : 0.0;
      CHECK(std::abs(pca.eigenvalues[a] - expected) <= 1e-6);
      CHECK(std::abs(pca.explained_variance_ratio[a] - expected / total) <= 1e-6);
      CHECK(std::abs(sample_variance(pca.points, a) - expected) <= 1e-6);
    }
  }
}

TEST_CASE("PCA of rank-3 data preserves pairwise distances") {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 4 + rng() % 47;
    const std::size_t d = 3 + rng() % 62;
    auto rows = rank3_rows(rng, n, d);
    CHECK(worst_distance_error(rows, pca_3d(rows).points) <= 1e-9);
  }
}

TEST_CASE("PCA edge cases") {
  CHECK_THROWS_AS(pca_3d({{1, 2}, {3, 4}, {5, 6}}), Error);
  auto flat = pca_3d({{1, 0}, {2, 0}, {3, 0}, {4, 0}});
  CHECK(flat.explained_variance_ratio[0] == doctest::Approx(1.0));
  CHECK(flat.eigenvalues[2] == 0.0);
  CHECK(flat.components[0][0] > 0);
}

TEST_CASE("cosine similarity and clustering") {
  CHECK(cosine_similarity(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 2})) == doctest::Approx(0.0));
  CHECK(cosine_similarity(vec({1, 1}), vec({-1, -1})) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity(vec({1}), vec({1, 0})), Error);
  CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), Error);

  // a-b and b-c are close; a-c is not, single linkage chains them.
  auto clusters = single_linkage({"c", "a", "b", "d"},
                                 {vec({0.0f, 1.0f}), vec({1.0f, 0.0f}), vec({0.7071068f, 0.7071068f}), vec({-1.0f, 0.0f})}, 0.7);
  CHECK(clusters == std::vector<std::vector<std::string>>{{"a", "b", "c"}, {"d"}});
  CHECK(single_linkage({}, {}, 0.5).empty());
}

TEST_CASE("embedding text is title and description") {
  NarrativeArc a;
  a.title = "T";
  a.description = "D";
  CHECK(embedding_text(a) == "T\nD");
}

namespace {

struct LinkFixture {
  Store store{":memory:"};
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>(16);
  LlmGateway gateway{mock};
  PromptLibrary prompts{testing::prompts_dir()};
  SemanticStore semantic{store, gateway, prompts};

  LinkFixture() {
    store.upsert_series({"S", "drama"});
    store.insert_character({"c1", "Frost", {}, "S"});
    store.insert_arc(arc("old", 2, ArcType::Soap));
    semantic.upsert_arc_embedding(*store.arc("old"));
    store.insert_arc(other("unrelated", 1));
    semantic.upsert_arc_embedding(*store.arc("unrelated"));
  }

  static NarrativeArc arc(const std::string& id, int episode, ArcType type) {
    return {id, "Frost's Burnout", "A nurse is worn down.", type, {"c1"}, "S",
            {{"p-" + id, id, "Episode " + std::to_string(episode) + " events.", "S", 1, episode, {}}}};
  }
  static NarrativeArc other(const std::string& id, int episode) {
    auto a = arc(id, episode, ArcType::Soap);
    a.title = "Budget";
    a.description = "Money runs out.";
    return a;
  }
  void verdict(const std::string& v) {
    mock->append({{"task", "adjudicate_link"}, {"response", {{"verdict", v}, {"rationale", v + " because"}}}});
  }
};

}  // namespace

TEST_CASE("find_similar ranks and filters neighbours") {
  LinkFixture f;
  f.store.insert_arc(LinkFixture::arc("twin", 5, ArcType::Soap));
  f.semantic.upsert_arc_embedding(*f.store.arc("twin"));
  auto n = f.semantic.find_similar("old");
  REQUIRE(n.size() == 1);
  CHECK(n[0].arc_id == "twin");
  CHECK(n[0].score == doctest::Approx(1.0));
  CHECK(f.semantic.find_similar("old", 5, -1.0).size() == 2);
  CHECK_THROWS_AS(f.semantic.find_similar("missing"), Error);
}

TEST_CASE("a SameStoryline verdict folds the new arc into the existing one") {
  LinkFixture f;
  f.verdict("SameStoryline");
  const auto before = f.store.arcs("S").size();
  auto out = f.semantic.link_or_create(LinkFixture::arc("new", 3, ArcType::Soap));
  CHECK(out.linked);
  CHECK(out.final_arc_id == "old");
  CHECK(f.store.arcs("S").size() == before);
  auto old = *f.store.arc("old");
  REQUIRE(old.progressions.size() == 2);
  CHECK(old.progressions[1].progression_id == "p-new");
  CHECK(old.progressions[1].episode == 3);
  auto audit = f.store.link_audit("S");
  REQUIRE(audit.size() == 1);
  CHECK(audit[0].verdict == "SameStoryline");
  CHECK(audit[0].final_arc_id == "old");
  CHECK(audit[0].new_arc_id == "new");
  CHECK_FALSE(f.store.embedding("new"));
  CHECK(f.store.integrity_violations().empty());
}

TEST_CASE("a Distinct verdict keeps the new arc") {
  LinkFixture f;
  f.verdict("Distinct");
  const auto before = f.store.arcs("S").size();
  auto out = f.semantic.link_or_create(LinkFixture::arc("new", 3, ArcType::Soap));
  CHECK_FALSE(out.linked);
  CHECK(out.final_arc_id == "new");
  CHECK(f.store.arcs("S").size() == before + 1);
  auto audit = f.store.link_audit("S");
  REQUIRE(audit.size() == 1);
  CHECK(audit[0].final_arc_id == "new");
  CHECK(f.store.integrity_violations().empty());
}

TEST_CASE("candidates a merge cannot absorb are not adjudicated") {
  LinkFixture f;
  // Same episode as the stored arc: merging would duplicate the episode.
  auto out = f.semantic.link_or_create(LinkFixture::arc("clash", 2, ArcType::Soap));
  CHECK_FALSE(out.linked);
  CHECK(out.audit.empty());
  CHECK(f.mock->consumed() == 0);
  CHECK(f.store.integrity_violations().empty());
}

TEST_CASE("link_or_create leaves nothing behind when adjudication fails") {
  LinkFixture f;
  f.mock->append({{"task", "adjudicate_link"}, {"error", "unavailable"}});
  const auto before = f.store.export_json().dump();
  CHECK_THROWS_AS(f.semantic.link_or_create(LinkFixture::arc("new", 3, ArcType::Soap)), Error);
  CHECK(f.store.export_json().dump() == before);
  // The cached index must not keep the rolled-back vector.
  CHECK(f.semantic.find_similar("old").empty());
}

TEST_CASE("store-level clustering and projection") {
  LinkFixture f;
  f.store.insert_arc(LinkFixture::arc("twin", 5, ArcType::Soap));
  f.semantic.upsert_arc_embedding(*f.store.arc("twin"));
  auto clusters = f.semantic.cluster_arcs("S");
  CHECK(clusters == std::vector<std::vector<std::string>>{{"old", "twin"}, {"unrelated"}});
  CHECK_THROWS_AS(f.semantic.pca_project_3d("S"), Error);
  f.store.insert_arc(LinkFixture::other("third", 7));
  f.store.update_arc([&] {
    auto a = *f.store.arc("third");
    a.title = "Third";
    return a;
  }());
  f.semantic.upsert_arc_embedding(*f.store.arc("third"));
  auto p = f.semantic.pca_project_3d("S");
  CHECK(p.points.size() == 4);
  auto j = to_json(p);
  CHECK(j["points"][0].contains("arc_id"));
  CHECK(j["explained_variance_ratio"].size() == 3);
}

TEST_CASE("cosine of (1,1) and (1,0) is one over root two") {
  CHECK(std::abs(cosine_similarity(vec({1, 1}), vec({1, 0})) - 1 / std::sqrt(2.0)) < 1e-7);
  CHECK(cosine_similarity(vec({3, 4}), vec({1, 2})) == doctest::Approx(cosine_similarity(vec({1, 2}), vec({3, 4}))));
}

TEST_CASE("find_similar edge cases") {
  LinkFixture f;
  CHECK(f.semantic.find_similar("unrelated", 5, 1.01).empty());
  CHECK(f.semantic.find_similar("old", 5, 1.01).empty());
  Store lone(":memory:");
  SemanticStore single(lone, f.gateway, f.prompts);
  lone.upsert_series({"S", "drama"});
  lone.insert_character({"c1", "Frost", {}, "S"});
  lone.insert_arc(LinkFixture::arc("only", 1, ArcType::Soap));
  single.upsert_arc_embedding(*lone.arc("only"));
  CHECK(single.find_similar("only", 5, -1.0).empty());
}

TEST_CASE("ties rank by arc id") {
  LinkFixture f;
  for (const char* id : {"twin-b", "twin-a"}) {
    f.store.insert_arc(LinkFixture::arc(id, 5, ArcType::Soap));
    f.semantic.upsert_arc_embedding(*f.store.arc(id));
  }
  auto n = f.semantic.find_similar("old");
  REQUIRE(n.size() == 2);
  CHECK(n[0].arc_id == "twin-a");
  CHECK(n[1].arc_id == "twin-b");
}

TEST_CASE("an arc is not adjudicated against itself") {
  LinkFixture f;
  auto old = *f.store.arc("old");
  CHECK_THROWS_AS(f.semantic.adjudicate_link(old, old), Error);
  CHECK(f.mock->consumed() == 0);
}

TEST_CASE("all-Distinct verdicts keep the new arc and audit every candidate") {
  LinkFixture f;
  for (const char* id : {"twin-a", "twin-b"}) {
    f.store.insert_arc(LinkFixture::arc(id, 5 + (id[5] - 'a'), ArcType::Soap));
    f.semantic.upsert_arc_embedding(*f.store.arc(id));
  }
  f.verdict("Distinct");
  f.verdict("Distinct");
  f.verdict("Distinct");
  auto out = f.semantic.link_or_create(LinkFixture::arc("new", 3, ArcType::Soap));
  CHECK_FALSE(out.linked);
  CHECK(out.final_arc_id == "new");
  CHECK(out.audit.size() == 3);
  CHECK(f.store.link_audit("S").size() == 3);
  CHECK(f.store.integrity_violations().empty());
}

TEST_CASE("clusters do not depend on input order") {
  std::mt19937 rng(5);
  std::normal_distribution<float> g;
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vs;
  for (int i = 0; i < 30; ++i) {
    ids.push_back("arc" + std::to_string(i));
    std::vector<float> v(4);
    for (auto& x : v) x = g(rng);
    vs.push_back(vec(v));
  }
  auto expected = single_linkage(ids, vs, 0.6);
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::string> ids2;
    std::vector<EmbeddingVector> vs2;
    for (auto i : order) {
      ids2.push_back(ids[i]);
      vs2.push_back(vs[i]);
    }
    CHECK(single_linkage(ids2, vs2, 0.6) == expected);
  }
  auto singletons = single_linkage({"x", "y", "z"}, {vec({1, 0, 0}), vec({0, 1, 0}), vec({0, 0, 1})}, 0.85);
  CHECK(singletons.size() == 3);
}

TEST_CASE("PCA ratios are ordered and a duplicated point set projects twice") {
  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix rows(10, std::vector<double>(16));
    for (auto& r : rows)
      for (auto& x : r) x = u(rng);
    auto pca = pca_3d(rows);
    const auto& r = pca.explained_variance_ratio;
    CHECK(r[0] >= r[1]);
    CHECK(r[1] >= r[2]);
    CHECK(r[0] + r[1] + r[2] <= 1 + 1e-9);
    for (const auto& c : pca.components) {
      std::size_t at = 0;
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (std::abs(c[j]) > std::abs(c[at])) at = j;
      }
      CHECK(c[at] > 0);
    }
    Matrix doubled = rows;
    doubled.insert(doubled.end(), rows.begin(), rows.end());
    auto twice = pca_3d(doubled);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t a = 0; a < 3; ++a) CHECK(std::abs(twice.points[i][a] - twice.points[i + rows.size()][a]) < 1e-12);
    }
  }
}

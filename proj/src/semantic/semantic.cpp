#include "arcweaver/semantic/semantic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <Eigen/Dense>

#include "arcweaver/core/error.hpp"
#include "arcweaver/kernels/dot.hpp"

namespace arcweaver::semantic {
namespace {

double cosine_from(double dot, double na, double nb) {
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

Json arc_view(const NarrativeArc& arc) {
  const std::string latest = arc.progressions.empty() ? "" : arc.progressions.back().content;
  return {{"title", arc.title},
          {"description", arc.description},
          {"arc_type", to_string(arc.arc_type)},
          {"latest_progression", latest}};
}

Json verdict_schema() {
  return Json::parse(R"({
    "type": "object",
    "required": ["verdict", "rationale"],
    "additionalProperties": false,
    "properties": {
      "verdict": {"enum": ["SameStoryline", "Distinct"]},
      "rationale": {"type": "string", "minLength": 1}
    }
  })");
}

}  // namespace

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    fail(ErrorCode::DimensionMismatch, "cannot compare vectors of dimension " +
                                           std::to_string(a.dimension()) + " and " +
                                           std::to_string(b.dimension()));
  }
  const double na = kernels::squared_norm(a.values);
  const double nb = kernels::squared_norm(b.values);
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return cosine_from(kernels::dot(a.values, b.values), na, nb);
}

std::string embedding_text(const NarrativeArc& arc) { return arc.title + "\n" + arc.description; }

std::vector<std::vector<std::string>> single_linkage(const std::vector<std::string>& ids,
                                                     const std::vector<EmbeddingVector>& vectors,
                                                     double threshold) {
  require(ids.size() == vectors.size(), "one vector per id required");
  const auto n = ids.size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cosine_similarity(vectors[i], vectors[j]) >= threshold) uf.unite(i, j);
    }
  }
  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[uf.find(i)].push_back(ids[i]);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

PcaResult pca_3d(const std::vector<std::vector<double>>& rows) {
  const auto n = rows.size();
  if (n < 4) {
    fail(ErrorCode::InsufficientPoints, "PCA needs at least 4 points, got " + std::to_string(n));
  }
  const auto d = rows.front().size();
  require(d > 0, "PCA needs non-empty rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != d) fail(ErrorCode::DimensionMismatch, "PCA rows differ in dimension");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  x.rowwise() -= x.colwise().mean();

  const double scale = 1.0 / static_cast<double>(n - 1);
  const double total = x.squaredNorm() * scale;
  const auto axes = static_cast<Eigen::Index>(std::min<std::size_t>(3, std::min(n, d)));

  // Below full rank the n x n Gram matrix shares the covariance's nonzero
  // spectrum and is far smaller for high-dimensional embeddings.
  Eigen::MatrixXd loadings(static_cast<Eigen::Index>(d), axes);
  Eigen::VectorXd values(axes);
  if (n < d) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((x * x.transpose()) * scale);
    const auto m = eig.eigenvalues().size();
    for (Eigen::Index a = 0; a < axes; ++a) {
      const double lambda = std::max(0.0, eig.eigenvalues()(m - 1 - a));
      values(a) = lambda;
      Eigen::VectorXd v = x.transpose() * eig.eigenvectors().col(m - 1 - a);
      const double norm = v.norm();
      loadings.col(a) = norm > 0.0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((x.transpose() * x) * scale);
    const auto m = eig.eigenvalues().size();
    for (Eigen::Index a = 0; a < axes; ++a) {
      values(a) = std::max(0.0, eig.eigenvalues()(m - 1 - a));
      loadings.col(a) = eig.eigenvectors().col(m - 1 - a);
    }
  }

  PcaResult out;
  out.points.assign(n, {0.0, 0.0, 0.0});
  for (Eigen::Index a = 0; a < axes; ++a) {
    Eigen::Index pivot = 0;
    loadings.col(a).cwiseAbs().maxCoeff(&pivot);
    if (loadings(pivot, a) < 0.0) loadings.col(a) *= -1.0;

    out.eigenvalues[static_cast<std::size_t>(a)] = values(a);
    out.explained_variance_ratio[static_cast<std::size_t>(a)] = total > 0.0 ? values(a) / total : 0.0;
    out.components.emplace_back(loadings.col(a).data(), loadings.col(a).data() + d);
    Eigen::VectorXd coords = x * loadings.col(a);
    for (std::size_t i = 0; i < n; ++i) out.points[i][static_cast<std::size_t>(a)] = coords(static_cast<Eigen::Index>(i));
  }
  return out;
}

SemanticStore::SemanticStore(Store& store, LlmGateway& gateway, PromptLibrary& prompts,
                             SemanticOptions options)
    : store_(store), gateway_(gateway), prompts_(prompts), options_(options) {}

ArcEmbedding SemanticStore::upsert_arc_embedding(const NarrativeArc& arc) {
  if (!store_.arc_exists(arc.arc_id)) fail(ErrorCode::NotFound, "arc " + arc.arc_id);
  ArcEmbedding e{arc.arc_id, {}, embedding_text(arc)};
  e.vector = gateway_.embed({e.source_text}).front();
  store_.upsert_embedding(e);
  return e;
}

const SemanticStore::Index& SemanticStore::index_for(const std::string& series) {
  auto& idx = indexes_[series];
  const auto gen = store_.generation();
  if (idx.generation == gen) return idx;
  idx = Index{};
  idx.generation = gen;
  for (auto& e : store_.embeddings(series)) {
    if (idx.ids.empty()) idx.dim = e.vector.dimension();
    idx.ids.push_back(e.arc_id);
    idx.rows.insert(idx.rows.end(), e.vector.values.begin(), e.vector.values.end());
  }
  return idx;
}

std::vector<Neighbor> SemanticStore::find_similar(const std::string& arc_id, std::size_t k, double min_sim) {
  std::lock_guard lock(mutex_);
  auto arc = store_.arc(arc_id);
  auto own = store_.embedding(arc_id);
  if (!arc || !own) fail(ErrorCode::NotFound, "no embedding for arc " + arc_id);
  const auto& idx = index_for(arc->series);
  const auto& query = own->vector.values;
  if (query.size() != idx.dim) fail(ErrorCode::DimensionMismatch, "embedding dimension differs from the index");
  const double qn = kernels::squared_norm(query);
  if (qn == 0.0) fail(ErrorCode::ZeroVector, "arc " + arc_id + " has a zero embedding");

  std::vector<double> dots(idx.ids.size());
  kernels::dot_rows(query, idx.rows, idx.dim, dots);
  std::vector<Neighbor> out;
  for (std::size_t r = 0; r < idx.ids.size(); ++r) {
    if (idx.ids[r] == arc_id) continue;
    std::span<const float> row(idx.rows.data() + r * idx.dim, idx.dim);
    const double rn = kernels::squared_norm(row);
    if (rn == 0.0) continue;
    const double score = cosine_from(dots[r], qn, rn);
    if (score >= min_sim) out.push_back({idx.ids[r], score});
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.arc_id < b.arc_id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

LinkVerdict SemanticStore::adjudicate_link(const NarrativeArc& new_arc, const NarrativeArc& candidate,
                                           bool record) {
  require(new_arc.arc_id != candidate.arc_id, "an arc cannot be compared with itself");
  if (!store_.arc_exists(new_arc.arc_id)) fail(ErrorCode::NotFound, "arc " + new_arc.arc_id);
  if (!store_.arc_exists(candidate.arc_id)) fail(ErrorCode::NotFound, "arc " + candidate.arc_id);

  Json context = {{"series", new_arc.series},
                  {"new_arc", arc_view(new_arc)},
                  {"candidate_arc", arc_view(candidate)}};
  auto result = gateway_.chat_structured(prompts_.request("adjudicate_link", context, verdict_schema()));
  LinkVerdict v{result.document["verdict"] == "SameStoryline", result.document["rationale"].get<std::string>()};
  if (record) {
    store_.append_link_audit({new_arc.series, new_arc.arc_id, new_arc.title, candidate.arc_id,
                              v.same_storyline ? "SameStoryline" : "Distinct", v.rationale, 0.0, ""});
  }
  return v;
}

bool SemanticStore::mergeable(const NarrativeArc& keep, const NarrativeArc& remove) const {
  if (keep.series != remove.series) return false;
  NarrativeArc merged = keep;
  merged.progressions.insert(merged.progressions.end(), remove.progressions.begin(), remove.progressions.end());
  for (auto& p : merged.progressions) p.arc_id = keep.arc_id;
  auto report = validate_arc(order_progressions(std::move(merged)), std::unordered_set<std::string>{});
  return !report.has("duplicate-episode-progression") && !report.has("anthology-multi-episode");
}

LinkOutcome SemanticStore::link_or_create(const NarrativeArc& new_arc) {
  std::lock_guard lock(mutex_);
  return store_.atomically([&] {
    store_.insert_arc(new_arc);
    const auto fresh = *store_.arc(new_arc.arc_id);
    upsert_arc_embedding(fresh);

    LinkOutcome out;
    out.final_arc_id = fresh.arc_id;
    for (const auto& candidate : find_similar(fresh.arc_id)) {
      auto existing = store_.arc(candidate.arc_id);
      if (!existing || !mergeable(*existing, fresh)) continue;
      auto verdict = adjudicate_link(fresh, *existing, false);
      out.audit.push_back({fresh.series, fresh.arc_id, fresh.title, existing->arc_id,
                           verdict.same_storyline ? "SameStoryline" : "Distinct", verdict.rationale,
                           candidate.score, ""});
      if (verdict.same_storyline) {
        store_.merge_arcs(existing->arc_id, fresh.arc_id);
        out.final_arc_id = existing->arc_id;
        out.linked = true;
        break;
      }
    }
    for (auto& entry : out.audit) {
      entry.final_arc_id = out.final_arc_id;
      store_.append_link_audit(entry);
    }
    return out;
  });
}

std::vector<std::vector<std::string>> SemanticStore::cluster_arcs(const std::string& series, double threshold) {
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vectors;
  for (auto& e : store_.embeddings(series)) {
    ids.push_back(e.arc_id);
    vectors.push_back(std::move(e.vector));
  }
  return single_linkage(ids, vectors, threshold);
}

Projection SemanticStore::pca_project_3d(const std::string& series) {
  auto stored = store_.embeddings(series);
  std::vector<std::vector<double>> rows;
  for (const auto& e : stored) rows.emplace_back(e.vector.values.begin(), e.vector.values.end());
  auto pca = pca_3d(rows);
  Projection out;
  out.explained_variance_ratio = pca.explained_variance_ratio;
  for (std::size_t i = 0; i < stored.size(); ++i) {
    out.points.push_back({stored[i].arc_id, pca.points[i][0], pca.points[i][1], pca.points[i][2]});
  }
  return out;
}

Json to_json(const Projection& p) {
  Json points = Json::array();
  for (const auto& pt : p.points) points.push_back({{"arc_id", pt.arc_id}, {"x", pt.x}, {"y", pt.y}, {"z", pt.z}});
  return {{"points", points}, {"explained_variance_ratio", p.explained_variance_ratio}};
}

}  // namespace arcweaver::semantic

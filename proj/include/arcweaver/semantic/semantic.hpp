#pragma once
// Arc embeddings, similarity search, continuation linking, clustering and the
// 3D PCA projection used by the vector-store explorer.

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "arcweaver/core/model.hpp"
#include "arcweaver/gateway/gateway.hpp"
#include "arcweaver/gateway/prompts.hpp"
#include "arcweaver/persistence/store.hpp"

namespace arcweaver::semantic {

// dot(a, b) / (|a| |b|). Throws DimensionMismatch or ZeroVector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// The text an arc is embedded from: title, newline, description.
std::string embedding_text(const NarrativeArc& arc);

struct Neighbor {
  std::string arc_id;
  double score = 0.0;
  bool operator==(const Neighbor&) const = default;
};

// Single-linkage components of the graph with an edge wherever cosine >=
// threshold. Members sorted, clusters ordered by their smallest id.
std::vector<std::vector<std::string>> single_linkage(const std::vector<std::string>& ids,
                                                     const std::vector<EmbeddingVector>& vectors,
                                                     double threshold);

struct PcaResult {
  // Row i holds the coordinates of input row i on the top three components;
  // components beyond the data dimension are reported as zero.
  std::vector<std::array<double, 3>> points;
  std::array<double, 3> eigenvalues{};
  std::array<double, 3> explained_variance_ratio{};  // eigenvalue / total variance
  std::vector<std::vector<double>> components;        // unit loadings, one per axis
};

// Mean-centred projection onto the leading eigenvectors of the sample
// covariance (divisor n - 1). Each component's largest-magnitude loading is
// made positive. Throws InsufficientPoints below 4 rows.
PcaResult pca_3d(const std::vector<std::vector<double>>& rows);

struct SemanticOptions {
  std::size_t top_k = 5;
  double min_similarity = 0.80;
  double cluster_threshold = 0.85;
};

struct LinkVerdict {
  bool same_storyline = false;
  std::string rationale;
};

struct LinkOutcome {
  std::string final_arc_id;
  bool linked = false;  // merged into an existing arc
  std::vector<LinkAuditEntry> audit;
};

struct ProjectedArc {
  std::string arc_id;
  double x = 0, y = 0, z = 0;
};

struct Projection {
  std::vector<ProjectedArc> points;
  std::array<double, 3> explained_variance_ratio{};
};

class SemanticStore {
 public:
  SemanticStore(Store& store, LlmGateway& gateway, PromptLibrary& prompts, SemanticOptions options = {});

  const SemanticOptions& options() const { return options_; }

  // Embeds the stored arc's current title and description, replacing any
  // earlier vector.
  ArcEmbedding upsert_arc_embedding(const NarrativeArc& arc);

  // Other arcs of the same series with cosine >= min_sim, best first, ties
  // by arc id. Throws NotFound when the arc has no embedding.
  std::vector<Neighbor> find_similar(const std::string& arc_id, std::size_t k, double min_sim);
  std::vector<Neighbor> find_similar(const std::string& arc_id) {
    return find_similar(arc_id, options_.top_k, options_.min_similarity);
  }

  // One gateway call comparing both arcs and their latest progressions.
  // With `record` the verdict is appended to the link audit immediately.
  LinkVerdict adjudicate_link(const NarrativeArc& new_arc, const NarrativeArc& candidate,
                              bool record = true);

  // Persists new_arc with its embedding, then adjudicates candidates in rank
  // order. The first SameStoryline verdict folds new_arc into that candidate,
  // which keeps its own title and description. Candidates a merge could not
  // absorb (shared episode, multi-episode anthology) are passed over. Every
  // verdict lands in the audit log with the final arc id. Atomic.
  LinkOutcome link_or_create(const NarrativeArc& new_arc);

  std::vector<std::vector<std::string>> cluster_arcs(const std::string& series, double threshold);
  std::vector<std::vector<std::string>> cluster_arcs(const std::string& series) {
    return cluster_arcs(series, options_.cluster_threshold);
  }

  Projection pca_project_3d(const std::string& series);

 private:
  struct Index {
    std::uint64_t generation = ~0ULL;
    std::vector<std::string> ids;
    std::vector<float> rows;
    std::size_t dim = 0;
  };
  const Index& index_for(const std::string& series);
  bool mergeable(const NarrativeArc& keep, const NarrativeArc& remove) const;

  Store& store_;
  LlmGateway& gateway_;
  PromptLibrary& prompts_;
  SemanticOptions options_;
  std::recursive_mutex mutex_;
  std::map<std::string, Index> indexes_;
};

Json to_json(const Projection& p);

}  // namespace arcweaver::semantic

#pragma once

#include "llmhg/llm_profile.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace llmhg {

struct Hyperedge {
    int edge_id = 0;
    std::string angle;
    std::string label;
    std::vector<int> members;  // vertex indices, ascending, nonempty
    std::optional<TextEmbedding> text_embedding;
};

struct MultiViewHypergraph {
    std::string user_id;
    std::vector<std::string> vertices;  // item ids, ordered
    std::vector<std::string> angle_order;
    std::vector<Hyperedge> edges;  // grouped by angle in angle_order, labels ascending
    std::vector<bool> isolated;    // per vertex: belongs to no hyperedge

    std::size_t n_e() const { return edges.size(); }
    std::size_t n_v() const { return vertices.size(); }
    int vertex_index(const std::string& item_id) const;
};

struct HypergraphTensors {
    Eigen::MatrixXd H;      // |V| x |E| 0/1 incidence
    Eigen::VectorXd w;      // diagonal of W
    Eigen::VectorXd delta;  // edge degrees, column sums of H
    Eigen::VectorXd d;      // vertex degrees, H * w
    Eigen::VectorXd iso;    // 1 for isolated vertices else 0
    Eigen::MatrixXd L;      // normalized Laplacian, filled by laplacian()
};

// One hyperedge per (angle, category) with nonempty membership; "unknown"
// categories never become edges.
MultiViewHypergraph assemble(const std::string& user_id,
                             const std::vector<std::string>& vertices,
                             const InterestAngleSet& angles,
                             const std::vector<CategoryAssignment>& assignments,
                             const std::map<std::string, TextEmbedding>& embeddings = {});

// H, unit weights, degrees. Weighted d and L come from laplacian().
HypergraphTensors incidence(const MultiViewHypergraph& hg);

// L = I - Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}. Recomputes d from the current w.
// Rows/columns of isolated vertices are identity rows.
const Eigen::MatrixXd& laplacian(HypergraphTensors& tensors);

// One arity-2 edge per consecutive item pair, single view "transition".
MultiViewHypergraph transition_hyperedges(const std::string& user_id,
                                          const std::vector<std::string>& sequence);

// Every contiguous k-window for each k in window_sizes, merged under "context".
// Windows longer than the sequence contribute nothing.
MultiViewHypergraph contextual_hyperedges(const std::string& user_id,
                                          const std::vector<std::string>& sequence,
                                          const std::vector<std::size_t>& window_sizes);

// Per prototype, the top_n items by cosine similarity; ties broken by item
// index. item_embeddings rows align with `items`.
MultiViewHypergraph intent_hyperedges(const std::string& user_id,
                                      const std::vector<std::string>& items,
                                      const Eigen::MatrixXd& item_embeddings,
                                      const std::vector<Eigen::VectorXd>& intent_prototypes,
                                      std::size_t top_n);

// Lloyd iterations with splitmix-seeded init; default prototype source for the
// intent builder.
std::vector<Eigen::VectorXd> kmeans_centroids(const Eigen::MatrixXd& points, std::size_t k,
                                              std::uint64_t seed, int iterations = 20);

// Text dump, one line per edge: view<TAB>label<TAB>item,item,...
void write_hypergraph_dump(const MultiViewHypergraph& hg, const std::string& path);
MultiViewHypergraph read_hypergraph_dump(const std::string& path, const std::string& user_id,
                                         const std::vector<std::string>& vertices);

}  // namespace llmhg

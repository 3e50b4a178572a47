#pragma once

#include "llmhg/autodiff.hpp"
#include "llmhg/hypergraph.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace llmhg {

struct PrototypeEntry {
    Eigen::VectorXd p_ori;
    Eigen::VectorXd p;
    double lambda = 0.0;  // 0 when no text embedding exists
};

using PrototypeSet = std::vector<PrototypeEntry>;  // indexed by edge_id

struct KernelParams {
    Eigen::MatrixXd phi;  // d_f x d_f, identity-initialized learnable map
    double mu = 1.0;      // heat-kernel bandwidth, fixed after initialization
};

struct GateParams {
    Eigen::VectorXd weight;  // d_f
    double bias = 0.0;
};

struct CutPredictor {
    Eigen::MatrixXd head;     // d_f x n_e
    Eigen::RowVectorXd bias;  // n_e
};

struct SLHyperparams {
    double beta = 0.7;
    double alpha = 1.0;
    double learning_rate = 1e-2;
    int epochs = 100;
    int weight_refresh_every = 1;
};

// p_ori = mean of member features; item_features rows align with hg vertices.
Eigen::VectorXd prototype_initial(const Hyperedge& edge, const Eigen::MatrixXd& item_features);

struct CorrectedPrototype {
    Eigen::VectorXd p;
    double lambda = 0.0;
};

// lambda = exp(-h(T)) / (1 + exp(-h(T))); p = (1-lambda) p_ori + lambda T.
// Without a text embedding, p = p_ori and lambda = 0.
CorrectedPrototype prototype_corrected(const Eigen::VectorXd& p_ori,
                                       const std::optional<TextEmbedding>& text,
                                       const GateParams& gate);

PrototypeSet compute_prototypes(const MultiViewHypergraph& hg,
                                const Eigen::MatrixXd& item_features, const GateParams& gate);

// Two-term weight: beta * intra heat-kernel mean (ordered pairs; 1 for
// singleton edges) + (1-beta) * mean squared prototype distance over all edges
// including the edge itself.
double hyperedge_weight(const Hyperedge& edge, const KernelParams& kernel,
                        const Eigen::MatrixXd& item_features, const PrototypeSet& prototypes,
                        double beta, std::size_t n_e);

// All edge weights, floored at 1e-12 so degrees stay positive.
Eigen::VectorXd compute_weights(const MultiViewHypergraph& hg,
                                const Eigen::MatrixXd& item_features,
                                const KernelParams& kernel, const GateParams& gate, double beta);

// Tr(F^T L F); tensors.L must be current.
double structure_loss(const Eigen::MatrixXd& F, const HypergraphTensors& tensors);

// F = sigmoid(X * head + bias), entries in (0,1).
Eigen::MatrixXd cut_predictions(const Eigen::MatrixXd& item_features, const CutPredictor& cut);

// Median of squared intra-edge pairwise feature distances at initialization.
// Falls back to 1.0 when no pair exists.
double median_bandwidth(const std::vector<const MultiViewHypergraph*>& hypergraphs,
                        const Eigen::MatrixXd& catalog_features,
                        const std::vector<std::vector<int>>& vertex_rows);
double median_bandwidth(const MultiViewHypergraph& hg, const Eigen::MatrixXd& item_features);

// --- tape graph --------------------------------------------------------

// Nodes of the structure-learning objective on a Tape; shared with the joint
// training loop so every gradient is an exact derivative of this graph.
struct StructureGraph {
    ad::VarId weights;    // n_e x 1
    ad::VarId degrees;    // |V| x 1, H * w
    ad::VarId deg_safe;   // degrees with isolated vertices padded to 1
    ad::VarId smoothing;  // |V| x |V| propagation matrix Dv^-1/2 H W De^-1 H^T Dv^-1/2
    ad::VarId cut;        // F, |V| x n_e
    ad::VarId loss;       // 1x1 Tr(F^T L F)
    std::vector<ad::VarId> prototypes;  // 1 x d_f each
    std::vector<ad::VarId> lambdas;     // 1x1 each (constants when no text)
};

struct StructureParams {
    ad::VarId features;   // |V| x d_f (rows align with hg vertices)
    ad::VarId phi;        // d_f x d_f
    ad::VarId gate_weight;  // d_f x 1
    ad::VarId gate_bias;    // 1x1
    ad::VarId cut_head;     // d_f x n_e
    ad::VarId cut_bias;     // 1 x n_e
};

StructureGraph build_structure_graph(ad::Tape& tape, const MultiViewHypergraph& hg,
                                     const StructureParams& params, double mu, double beta);

// Gradients of L_str alone with respect to the learnable state.
struct SLGradients {
    double loss = 0.0;
    Eigen::MatrixXd features;
    Eigen::MatrixXd phi;
    Eigen::VectorXd gate_weight;
    double gate_bias = 0.0;
    Eigen::MatrixXd cut_head;
    Eigen::RowVectorXd cut_bias;
};

SLGradients sl_gradients(const MultiViewHypergraph& hg, const Eigen::MatrixXd& item_features,
                         const KernelParams& kernel, const GateParams& gate,
                         const CutPredictor& cut, double beta);

}  // namespace llmhg

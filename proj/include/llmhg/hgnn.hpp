#pragma once

#include "llmhg/dataset.hpp"
#include "llmhg/hypergraph.hpp"
#include "llmhg/structure_learning.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace llmhg {

struct ItemEmbeddingTable {
    std::vector<std::string> items;  // catalog order (sorted item ids)
    std::unordered_map<std::string, int> index;
    Eigen::MatrixXd embeddings;  // n_items x d_f

    int d_f() const { return static_cast<int>(embeddings.cols()); }
    int row_of(const std::string& item_id) const;

    static ItemEmbeddingTable random_init(const std::vector<std::string>& items, int d_f,
                                          std::uint64_t seed);
};

struct FusionParams {
    Eigen::MatrixXd w_hg;    // d_f x d_f
    Eigen::MatrixXd w_base;  // d_f x d_f
    Eigen::VectorXd bias;    // d_f
};

// Shared embedding table feeds the base encoder, the hypergraph features, and
// the scoring dot products.
struct Model {
    ItemEmbeddingTable table;
    KernelParams kernel;
    GateParams gate;
    Eigen::MatrixXd theta;  // d_f x d_f hyperedge-convolution weight
    FusionParams fusion;
    double gamma = 0.8;  // exponential position decay of the base encoder

    // per-user cut predictors; training state, not part of the checkpoint
    std::map<std::string, CutPredictor> cut_heads;
};

// X' = relu(Dv^-1/2 H W De^-1 H^T Dv^-1/2 * X * theta); tensors.w must be the
// current weights (laplacian() refreshes d).
Eigen::MatrixXd hyperedge_convolution(const Eigen::MatrixXd& X, HypergraphTensors& tensors,
                                      const Eigen::MatrixXd& theta, bool apply_relu = true);

// Degree-weighted vertex mean; isolated vertices contribute with degree 1.
Eigen::RowVectorXd readout_user(const Eigen::MatrixXd& X_conv, const HypergraphTensors& tensors);

Eigen::RowVectorXd fuse(const Eigen::RowVectorXd& u_hg, const Eigen::RowVectorXd& u_base,
                        const FusionParams& params);

Eigen::RowVectorXd encode_sequence(const std::vector<int>& sequence_rows,
                                   const Eigen::MatrixXd& embeddings, double gamma);

// score(v) = <u, f(v)> over the whole catalog
Eigen::VectorXd predict_scores(const Eigen::RowVectorXd& u, const ItemEmbeddingTable& table);

// L_pre = -[ln y_pos + sum ln(1 - y_neg)] / (1 + K), probabilities clamped to
// [1e-7, 1-1e-7]
double prediction_loss(double y_pos, const Eigen::VectorXd& y_negs);

// Full serving-path user vector: base encoding, optionally fused with the
// re-weighted hypergraph readout. hg may be null (base-only).
Eigen::RowVectorXd user_vector(const Model& model, const MultiViewHypergraph* hg,
                               const std::vector<int>& input_rows, double beta);

struct TrainConfig {
    double alpha = 1.0;
    double beta = 0.7;
    double learning_rate = 1e-2;
    int negatives_per_positive = 100;  // K
    int epochs = 100;
    int d_f = 64;
    int patience = 10;  // early stopping on validation HR@10
    int weight_refresh_every = 1;
    double grad_clip = 10.0;
    double mu_override = 0.0;  // 0 => median heuristic at initialization
    bool base_only = false;
    std::uint64_t seed = 1;
};

struct LossCurvePoint {
    int epoch = 0;
    double l_str = 0.0;
    double l_pre = 0.0;
    double l_total = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<LossCurvePoint> curve;
    int epochs_run = 0;
    double best_valid_hr10 = 0.0;
};

// Fresh model state: seeded embeddings, identity maps, zero gates, zeroed
// per-user cut heads, and the bandwidth mu (override or median heuristic).
Model initialize_model(const InteractionDataset& dataset,
                       const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                       const TrainConfig& config);

// Deterministic full-batch-per-user joint training of L = L_str + alpha*L_pre.
// hypergraphs maps user -> structure (ignored when config.base_only).
TrainResult train(const SplitDataset& split, const InteractionDataset& dataset,
                  const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                  const TrainConfig& config);

void write_loss_curve_csv(const std::vector<LossCurvePoint>& curve, const std::string& path);

// One training step's objective L = L_str + alpha * L_pre for a single user,
// evaluated on the plain (non-tape) path. `cut` is required when hg has edges.
// Candidates are the target row followed by `neg_rows`.
double joint_loss(const Model& model, const MultiViewHypergraph* hg, const CutPredictor* cut,
                  const std::vector<int>& input_rows, int target_row,
                  const std::vector<int>& neg_rows, double alpha, double beta);

struct JointGradients {
    double loss = 0.0;
    double l_str = 0.0;
    double l_pre = 0.0;
    Eigen::MatrixXd embeddings;  // full table shape; zero outside touched rows
    Eigen::MatrixXd phi;
    Eigen::VectorXd gate_weight;
    double gate_bias = 0.0;
    Eigen::MatrixXd theta;
    Eigen::MatrixXd w_hg;
    Eigen::MatrixXd w_base;
    Eigen::VectorXd fuse_bias;
    double gamma = 0.0;
    Eigen::MatrixXd cut_head;
    Eigen::RowVectorXd cut_bias;
};

// Analytic gradients of the same objective, via the training tape.
JointGradients joint_gradients(const Model& model, const MultiViewHypergraph* hg,
                               const CutPredictor* cut, const std::vector<int>& input_rows,
                               int target_row, const std::vector<int>& neg_rows, double alpha,
                               double beta);

// Binary checkpoint: magic "LHG1" | d_f:u32 | n_items:u32 | row-major f64
// tensors in declared parameter order. Bit-exact round trip.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path, const std::vector<std::string>& items);

}  // namespace llmhg

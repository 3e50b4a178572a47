#include "llmhg/hgnn.hpp"

#include "llmhg/errors.hpp"
#include "llmhg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

namespace llmhg {

int ItemEmbeddingTable::row_of(const std::string& item_id) const {
    auto it = index.find(item_id);
    if (it == index.end()) throw UnknownItem("item not in catalog: " + item_id);
    return it->second;
}

ItemEmbeddingTable ItemEmbeddingTable::random_init(const std::vector<std::string>& items, int d_f,
                                                   std::uint64_t seed) {
    ItemEmbeddingTable table;
    table.items = items;
    for (int i = 0; i < static_cast<int>(items.size()); ++i)
        table.index.emplace(items[static_cast<std::size_t>(i)], i);
    table.embeddings.resize(static_cast<Eigen::Index>(items.size()), d_f);
    Rng rng(seed);
    for (Eigen::Index r = 0; r < table.embeddings.rows(); ++r)
        for (Eigen::Index c = 0; c < table.embeddings.cols(); ++c)
            table.embeddings(r, c) = rng.normal(0.0, 0.1);
    return table;
}

Eigen::MatrixXd hyperedge_convolution(const Eigen::MatrixXd& X, HypergraphTensors& tensors,
                                      const Eigen::MatrixXd& theta, bool apply_relu) {
    if (X.rows() != tensors.H.rows()) throw ShapeError("feature rows must match vertex count");
    if (theta.rows() != X.cols()) throw ShapeError("theta rows must match feature dimension");
    laplacian(tensors);
    Eigen::MatrixXd smoothing =
        Eigen::MatrixXd::Identity(tensors.L.rows(), tensors.L.cols()) - tensors.L;
    Eigen::MatrixXd out = smoothing * X * theta;
    if (apply_relu) out = out.cwiseMax(0.0);
    return out;
}

Eigen::RowVectorXd readout_user(const Eigen::MatrixXd& X_conv, const HypergraphTensors& tensors) {
    if (X_conv.rows() != tensors.d.rows()) throw ShapeError("readout shape mismatch");
    Eigen::VectorXd weights = tensors.d + tensors.iso;
    return (weights.transpose() * X_conv) / weights.sum();
}

Eigen::RowVectorXd fuse(const Eigen::RowVectorXd& u_hg, const Eigen::RowVectorXd& u_base,
                        const FusionParams& params) {
    Eigen::RowVectorXd z = u_hg * params.w_hg.transpose() + u_base * params.w_base.transpose() +
                           params.bias.transpose();
    Eigen::RowVectorXd g = z.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return g.cwiseProduct(u_hg) + (Eigen::RowVectorXd::Ones(g.cols()) - g).cwiseProduct(u_base);
}

Eigen::RowVectorXd encode_sequence(const std::vector<int>& sequence_rows,
                                   const Eigen::MatrixXd& embeddings, double gamma) {
    if (sequence_rows.empty()) throw EmptyHistory("cannot encode an empty sequence");
    const std::size_t n = sequence_rows.size();
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(embeddings.cols());
    double norm = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double w = std::pow(gamma, static_cast<double>(n - 1 - t));
        acc += w * embeddings.row(sequence_rows[t]);
        norm += w;
    }
    return acc / norm;
}

Eigen::VectorXd predict_scores(const Eigen::RowVectorXd& u, const ItemEmbeddingTable& table) {
    if (u.cols() != table.embeddings.cols()) throw ShapeError("user vector dimension mismatch");
    return table.embeddings * u.transpose();
}

double prediction_loss(double y_pos, const Eigen::VectorXd& y_negs) {
    auto clamp_p = [](double p) { return std::clamp(p, 1e-7, 1.0 - 1e-7); };
    double acc = std::log(clamp_p(y_pos));
    for (Eigen::Index i = 0; i < y_negs.size(); ++i) acc += std::log(1.0 - clamp_p(y_negs[i]));
    double loss = -acc / (1.0 + static_cast<double>(y_negs.size()));
    if (!std::isfinite(loss)) throw NumericalError("non-finite prediction loss");
    return loss;
}

namespace {

std::vector<int> global_rows(const ItemEmbeddingTable& table,
                             const std::vector<std::string>& items) {
    std::vector<int> rows;
    rows.reserve(items.size());
    for (const auto& item : items) rows.push_back(table.row_of(item));
    return rows;
}

// Plain-path hypergraph branch: re-weight, convolve, read out.
Eigen::RowVectorXd hypergraph_readout(const Model& model, const MultiViewHypergraph& hg,
                                      double beta) {
    auto vert_rows = global_rows(model.table, hg.vertices);
    Eigen::MatrixXd X_vert(static_cast<Eigen::Index>(vert_rows.size()),
                           model.table.embeddings.cols());
    for (std::size_t i = 0; i < vert_rows.size(); ++i)
        X_vert.row(static_cast<Eigen::Index>(i)) = model.table.embeddings.row(vert_rows[i]);

    HypergraphTensors tensors = incidence(hg);
    tensors.w = compute_weights(hg, X_vert, model.kernel, model.gate, beta);
    Eigen::MatrixXd X_conv = hyperedge_convolution(X_vert, tensors, model.theta, true);
    return readout_user(X_conv, tensors);
}

}  // namespace

Eigen::RowVectorXd user_vector(const Model& model, const MultiViewHypergraph* hg,
                               const std::vector<int>& input_rows, double beta) {
    Eigen::RowVectorXd u_base =
        encode_sequence(input_rows, model.table.embeddings, model.gamma);
    if (!hg || hg->n_e() == 0) return u_base;
    Eigen::RowVectorXd u_hg = hypergraph_readout(model, *hg, beta);
    return fuse(u_hg, u_base, model.fusion);
}

// --- training ----------------------------------------------------------

namespace {

struct SharedVars {
    ad::VarId X_sub;  // gathered embedding rows
    ad::VarId phi, gate_w, gate_b, theta;
    ad::VarId fuse_whg, fuse_wbase, fuse_b;  // fuse_b is 1 x d_f
    ad::VarId gamma;
    ad::VarId cut_head{-1}, cut_bias{-1};  // unused when no hypergraph
};

struct StepGraph {
    ad::VarId loss;
    double l_str = 0.0;
    double l_pre = 0.0;
    bool has_structure = false;
};

// Forward of one user step on the tape. `seq_local`, `cand_local` index into
// X_sub; `cand_local` is positive first, then negatives.
StepGraph build_step_graph(ad::Tape& tape, const SharedVars& vars,
                           const MultiViewHypergraph* hg, const std::vector<int>& vert_local,
                           const std::vector<int>& seq_local, const std::vector<int>& cand_local,
                           double mu, double beta, double alpha, bool base_only) {
    const Eigen::Index d_f = tape.value(vars.phi).rows();
    StepGraph step;

    ad::VarId u;
    ad::VarId l_str_var{};
    bool use_hg = !base_only && hg && hg->n_e() > 0;

    // base encoder: exponential position decay
    ad::VarId X_seq = tape.gather_rows(vars.X_sub, seq_local);
    Eigen::VectorXd exps(static_cast<Eigen::Index>(seq_local.size()));
    for (Eigen::Index t = 0; t < exps.size(); ++t)
        exps[t] = static_cast<double>(exps.size() - 1 - t);
    ad::VarId wts = tape.scalar_pow_vec(vars.gamma, exps);
    ad::VarId u_base =
        tape.div_by_scalar(tape.matmul(tape.transpose(wts), X_seq), tape.sum(wts));

    if (use_hg) {
        ad::VarId X_vert = tape.gather_rows(vars.X_sub, vert_local);
        StructureParams sparams;
        sparams.features = X_vert;
        sparams.phi = vars.phi;
        sparams.gate_weight = vars.gate_w;
        sparams.gate_bias = vars.gate_b;
        sparams.cut_head = vars.cut_head;
        sparams.cut_bias = vars.cut_bias;
        StructureGraph sg = build_structure_graph(tape, *hg, sparams, mu, beta);
        l_str_var = sg.loss;
        step.has_structure = true;
        step.l_str = tape.value(sg.loss)(0, 0);

        ad::VarId X_conv = tape.relu(tape.matmul(tape.matmul(sg.smoothing, X_vert), vars.theta));
        ad::VarId u_hg = tape.div_by_scalar(tape.matmul(tape.transpose(sg.deg_safe), X_conv),
                                            tape.sum(sg.deg_safe));
        ad::VarId z = tape.add(tape.add(tape.matmul(u_hg, tape.transpose(vars.fuse_whg)),
                                        tape.matmul(u_base, tape.transpose(vars.fuse_wbase))),
                               vars.fuse_b);
        ad::VarId g = tape.sigmoid(z);
        ad::VarId ones = tape.constant(Eigen::MatrixXd::Ones(1, d_f));
        u = tape.add(tape.mul(g, u_hg), tape.mul(tape.sub(ones, g), u_base));
    } else {
        u = u_base;
    }

    if (alpha > 0.0 || base_only || !step.has_structure) {
        ad::VarId X_cand = tape.gather_rows(vars.X_sub, cand_local);
        ad::VarId scores = tape.matmul(X_cand, tape.transpose(u));
        ad::VarId probs = tape.clamp(tape.sigmoid(scores), 1e-7, 1.0 - 1e-7);
        ad::VarId y_pos = tape.gather_rows(probs, {0});
        std::vector<int> neg_idx(cand_local.size() - 1);
        for (std::size_t i = 0; i < neg_idx.size(); ++i) neg_idx[i] = static_cast<int>(i + 1);
        ad::VarId y_neg = tape.gather_rows(probs, neg_idx);
        ad::VarId ones_neg = tape.constant(
            Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(neg_idx.size()), 1));
        ad::VarId log_terms =
            tape.add(tape.loge(y_pos), tape.sum(tape.loge(tape.sub(ones_neg, y_neg))));
        ad::VarId l_pre =
            tape.cmul(log_terms, -1.0 / (1.0 + static_cast<double>(neg_idx.size())));
        step.l_pre = tape.value(l_pre)(0, 0);

        if (step.has_structure)
            step.loss = tape.add(l_str_var, tape.cmul(l_pre, alpha));
        else
            step.loss = l_pre;
    } else {
        // alpha == 0: pure structure learning, prediction path never evaluated
        step.loss = l_str_var;
    }
    return step;
}

Eigen::MatrixXd clip(Eigen::MatrixXd g, double limit) {
    return g.cwiseMax(-limit).cwiseMin(limit);
}

struct SharedSnapshot {
    Eigen::MatrixXd embeddings, phi, theta, w_hg, w_base;
    Eigen::VectorXd gate_w, fuse_b;
    double gate_b = 0.0, gamma = 0.8;
    std::map<std::string, CutPredictor> cut_heads;
};

SharedSnapshot snapshot(const Model& m) {
    return {m.table.embeddings, m.kernel.phi, m.theta,      m.fusion.w_hg,
            m.fusion.w_base,    m.gate.weight, m.fusion.bias, m.gate.bias,
            m.gamma,            m.cut_heads};
}

void restore(Model& m, const SharedSnapshot& s) {
    m.table.embeddings = s.embeddings;
    m.kernel.phi = s.phi;
    m.theta = s.theta;
    m.fusion.w_hg = s.w_hg;
    m.fusion.w_base = s.w_base;
    m.gate.weight = s.gate_w;
    m.fusion.bias = s.fuse_b;
    m.gate.bias = s.gate_b;
    m.gamma = s.gamma;
    m.cut_heads = s.cut_heads;
}

}  // namespace

Model initialize_model(const InteractionDataset& dataset,
                       const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                       const TrainConfig& config) {
    if (config.d_f < 2) throw InvalidConfig("d_f must be >= 2");

    std::vector<std::string> items;
    items.reserve(dataset.catalog.size());
    for (const auto& [item, attrs] : dataset.catalog) items.push_back(item);

    Model model;
    const int d_f = config.d_f;
    model.table = ItemEmbeddingTable::random_init(items, d_f, config.seed);
    model.kernel.phi = Eigen::MatrixXd::Identity(d_f, d_f);
    model.gate.weight = Eigen::VectorXd::Zero(d_f);
    model.gate.bias = 0.0;
    model.theta = Eigen::MatrixXd::Identity(d_f, d_f);
    model.fusion.w_hg = Eigen::MatrixXd::Zero(d_f, d_f);
    model.fusion.w_base = Eigen::MatrixXd::Zero(d_f, d_f);
    model.fusion.bias = Eigen::VectorXd::Zero(d_f);
    model.gamma = 0.8;

    std::vector<const MultiViewHypergraph*> hgs;
    std::vector<std::vector<int>> rows;
    if (!config.base_only) {
        for (const auto& [user, hg] : hypergraphs) {
            if (hg.n_e() == 0) continue;
            hgs.push_back(&hg);
            rows.push_back(global_rows(model.table, hg.vertices));
            CutPredictor cut;
            cut.head = Eigen::MatrixXd::Zero(d_f, static_cast<Eigen::Index>(hg.n_e()));
            cut.bias = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(hg.n_e()));
            model.cut_heads.emplace(user, std::move(cut));
        }
    }
    if (config.mu_override > 0.0)
        model.kernel.mu = config.mu_override;
    else
        model.kernel.mu = median_bandwidth(hgs, model.table.embeddings, rows);
    return model;
}

TrainResult train(const SplitDataset& split, const InteractionDataset& dataset,
                  const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                  const TrainConfig& config) {
    if (config.negatives_per_positive < 1) throw InvalidConfig("K must be >= 1");
    if (config.epochs < 1) throw InvalidConfig("epochs must be >= 1");
    if (config.learning_rate <= 0.0) throw InvalidConfig("learning rate must be positive");
    if (config.weight_refresh_every < 1)
        throw InvalidConfig("weight_refresh_every must be >= 1");

    TrainResult result;
    Model& model = result.model;
    model = initialize_model(dataset, hypergraphs, config);
    const int d_f = config.d_f;

    // per-user structural context
    struct UserCtx {
        const MultiViewHypergraph* hg = nullptr;
        std::vector<int> vert_rows;    // global
        std::vector<int> train_input;  // global, train prefix minus last
        int train_target = -1;         // global row of last train item
        std::vector<int> valid_input;  // full train prefix
        int valid_target = -1;
    };
    std::map<std::string, UserCtx> contexts;
    for (const auto& [user, s] : split.users) {
        UserCtx ctx;
        if (!config.base_only) {
            auto it = hypergraphs.find(user);
            if (it != hypergraphs.end() && it->second.n_e() > 0) {
                ctx.hg = &it->second;
                ctx.vert_rows = global_rows(model.table, it->second.vertices);
            }
        }
        auto train_rows = global_rows(model.table, s.train);
        if (train_rows.size() < 2) {
            // one-item train prefix: predict it from itself
            ctx.train_input = train_rows;
            ctx.train_target = train_rows.back();
        } else {
            ctx.train_input.assign(train_rows.begin(), train_rows.end() - 1);
            ctx.train_target = train_rows.back();
        }
        ctx.valid_input = train_rows;
        ctx.valid_target = model.table.row_of(s.valid);
        contexts.emplace(user, std::move(ctx));
    }

    Rng rng(config.seed * 0x9e3779b97f4a7c15ULL + 17);
    const auto n_items = static_cast<std::uint64_t>(model.table.items.size());
    const int K = config.negatives_per_positive;

    SharedSnapshot best = snapshot(model);
    double best_hr = -1.0;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_str = 0.0, epoch_pre = 0.0, epoch_total = 0.0;
        std::size_t n_steps = 0;

        for (auto& [user, ctx] : contexts) {
            // uniform negatives, target excluded
            std::vector<int> cand{ctx.train_target};
            for (int k = 0; k < K; ++k) {
                int neg;
                do {
                    neg = static_cast<int>(rng.next_below(n_items));
                } while (neg == ctx.train_target);
                cand.push_back(neg);
            }

            // sub-table of every embedding row this step touches
            std::vector<int> sub;
            sub.reserve(ctx.vert_rows.size() + ctx.train_input.size() + cand.size());
            auto push_unique = [&](int row) {
                if (std::find(sub.begin(), sub.end(), row) == sub.end()) sub.push_back(row);
            };
            for (int r : ctx.vert_rows) push_unique(r);
            for (int r : ctx.train_input) push_unique(r);
            for (int r : cand) push_unique(r);
            auto local_of = [&](int row) {
                return static_cast<int>(std::find(sub.begin(), sub.end(), row) - sub.begin());
            };
            std::vector<int> vert_local, seq_local, cand_local;
            for (int r : ctx.vert_rows) vert_local.push_back(local_of(r));
            for (int r : ctx.train_input) seq_local.push_back(local_of(r));
            for (int r : cand) cand_local.push_back(local_of(r));

            Eigen::MatrixXd X_sub(static_cast<Eigen::Index>(sub.size()), d_f);
            for (std::size_t i = 0; i < sub.size(); ++i)
                X_sub.row(static_cast<Eigen::Index>(i)) = model.table.embeddings.row(sub[i]);

            ad::Tape tape;
            SharedVars vars;
            vars.X_sub = tape.parameter(X_sub);
            vars.phi = tape.parameter(model.kernel.phi);
            vars.gate_w = tape.parameter(model.gate.weight);
            vars.gate_b = tape.parameter(Eigen::MatrixXd::Constant(1, 1, model.gate.bias));
            vars.theta = tape.parameter(model.theta);
            vars.fuse_whg = tape.parameter(model.fusion.w_hg);
            vars.fuse_wbase = tape.parameter(model.fusion.w_base);
            vars.fuse_b = tape.parameter(model.fusion.bias.transpose());
            vars.gamma = tape.parameter(Eigen::MatrixXd::Constant(1, 1, model.gamma));
            CutPredictor* cut = nullptr;
            if (ctx.hg) {
                cut = &model.cut_heads.at(user);
                vars.cut_head = tape.parameter(cut->head);
                vars.cut_bias = tape.parameter(cut->bias);
            }

            StepGraph step = build_step_graph(tape, vars, ctx.hg, vert_local, seq_local,
                                              cand_local, model.kernel.mu, config.beta,
                                              config.alpha, config.base_only);
            double loss = tape.value(step.loss)(0, 0);
            if (!std::isfinite(loss)) throw TrainingDiverged("loss is not finite", epoch);
            epoch_str += step.l_str;
            epoch_pre += step.l_pre;
            epoch_total += loss;
            ++n_steps;

            tape.backward(step.loss);
            const double lr = config.learning_rate;
            const double limit = config.grad_clip;

            Eigen::MatrixXd g_sub = clip(tape.grad(vars.X_sub), limit);
            for (std::size_t i = 0; i < sub.size(); ++i)
                model.table.embeddings.row(sub[i]) -=
                    lr * g_sub.row(static_cast<Eigen::Index>(i));
            model.kernel.phi -= lr * clip(tape.grad(vars.phi), limit);
            model.gate.weight -= lr * clip(tape.grad(vars.gate_w), limit);
            model.gate.bias -= lr * clip(tape.grad(vars.gate_b), limit)(0, 0);
            model.theta -= lr * clip(tape.grad(vars.theta), limit);
            model.fusion.w_hg -= lr * clip(tape.grad(vars.fuse_whg), limit);
            model.fusion.w_base -= lr * clip(tape.grad(vars.fuse_wbase), limit);
            model.fusion.bias -= lr * clip(tape.grad(vars.fuse_b), limit).transpose();
            model.gamma -= lr * clip(tape.grad(vars.gamma), limit)(0, 0);
            model.gamma = std::clamp(model.gamma, 0.01, 0.99);
            if (cut) {
                cut->head -= lr * clip(tape.grad(vars.cut_head), limit);
                cut->bias -= lr * clip(tape.grad(vars.cut_bias), limit);
            }
        }

        double denom = n_steps > 0 ? static_cast<double>(n_steps) : 1.0;
        result.curve.push_back(
            {epoch, epoch_str / denom, epoch_pre / denom, epoch_total / denom});
        result.epochs_run = epoch + 1;

        // validation HR@10 for early stopping
        std::size_t hits = 0;
        for (const auto& [user, ctx] : contexts) {
            Eigen::RowVectorXd u = user_vector(model, ctx.hg, ctx.valid_input, config.beta);
            Eigen::VectorXd scores = predict_scores(u, model.table);
            double target_score = scores[ctx.valid_target];
            int rank = 1;
            for (Eigen::Index i = 0; i < scores.size(); ++i)
                if (i != ctx.valid_target && scores[i] >= target_score) ++rank;
            if (rank <= 10) ++hits;
        }
        double hr10 = static_cast<double>(hits) / static_cast<double>(contexts.size());
        if (hr10 > best_hr + 1e-12) {
            best_hr = hr10;
            best = snapshot(model);
            stale_epochs = 0;
        } else if (++stale_epochs >= config.patience) {
            break;
        }
    }

    restore(model, best);
    result.best_valid_hr10 = best_hr;
    return result;
}

double joint_loss(const Model& model, const MultiViewHypergraph* hg, const CutPredictor* cut,
                  const std::vector<int>& input_rows, int target_row,
                  const std::vector<int>& neg_rows, double alpha, double beta) {
    bool has_structure = hg && hg->n_e() > 0;
    double l_str = 0.0;
    if (has_structure) {
        if (!cut) throw InvalidConfig("cut predictor required with a hypergraph");
        auto vert_rows = global_rows(model.table, hg->vertices);
        Eigen::MatrixXd X_vert(static_cast<Eigen::Index>(vert_rows.size()),
                               model.table.embeddings.cols());
        for (std::size_t i = 0; i < vert_rows.size(); ++i)
            X_vert.row(static_cast<Eigen::Index>(i)) = model.table.embeddings.row(vert_rows[i]);
        HypergraphTensors tensors = incidence(*hg);
        tensors.w = compute_weights(*hg, X_vert, model.kernel, model.gate, beta);
        laplacian(tensors);
        Eigen::MatrixXd F = cut_predictions(X_vert, *cut);
        l_str = structure_loss(F, tensors);
    }
    if (has_structure && alpha == 0.0) return l_str;

    Eigen::RowVectorXd u = user_vector(model, hg, input_rows, beta);
    auto prob_of = [&](int row) {
        double s = u.dot(model.table.embeddings.row(row));
        return 1.0 / (1.0 + std::exp(-s));
    };
    Eigen::VectorXd y_negs(static_cast<Eigen::Index>(neg_rows.size()));
    for (std::size_t i = 0; i < neg_rows.size(); ++i)
        y_negs[static_cast<Eigen::Index>(i)] = prob_of(neg_rows[i]);
    double l_pre = prediction_loss(prob_of(target_row), y_negs);
    return has_structure ? l_str + alpha * l_pre : l_pre;
}

JointGradients joint_gradients(const Model& model, const MultiViewHypergraph* hg,
                               const CutPredictor* cut, const std::vector<int>& input_rows,
                               int target_row, const std::vector<int>& neg_rows, double alpha,
                               double beta) {
    bool has_structure = hg && hg->n_e() > 0;
    if (has_structure && !cut) throw InvalidConfig("cut predictor required with a hypergraph");

    std::vector<int> vert_rows;
    if (has_structure) vert_rows = global_rows(model.table, hg->vertices);
    std::vector<int> cand{target_row};
    cand.insert(cand.end(), neg_rows.begin(), neg_rows.end());

    std::vector<int> sub;
    auto push_unique = [&](int row) {
        if (std::find(sub.begin(), sub.end(), row) == sub.end()) sub.push_back(row);
    };
    for (int r : vert_rows) push_unique(r);
    for (int r : input_rows) push_unique(r);
    for (int r : cand) push_unique(r);
    auto local_of = [&](int row) {
        return static_cast<int>(std::find(sub.begin(), sub.end(), row) - sub.begin());
    };
    std::vector<int> vert_local, seq_local, cand_local;
    for (int r : vert_rows) vert_local.push_back(local_of(r));
    for (int r : input_rows) seq_local.push_back(local_of(r));
    for (int r : cand) cand_local.push_back(local_of(r));

    const Eigen::Index d_f = model.table.embeddings.cols();
    Eigen::MatrixXd X_sub(static_cast<Eigen::Index>(sub.size()), d_f);
    for (std::size_t i = 0; i < sub.size(); ++i)
        X_sub.row(static_cast<Eigen::Index>(i)) = model.table.embeddings.row(sub[i]);

    ad::Tape tape;
    SharedVars vars;
    vars.X_sub = tape.parameter(X_sub);
    vars.phi = tape.parameter(model.kernel.phi);
    vars.gate_w = tape.parameter(model.gate.weight);
    vars.gate_b = tape.parameter(Eigen::MatrixXd::Constant(1, 1, model.gate.bias));
    vars.theta = tape.parameter(model.theta);
    vars.fuse_whg = tape.parameter(model.fusion.w_hg);
    vars.fuse_wbase = tape.parameter(model.fusion.w_base);
    vars.fuse_b = tape.parameter(model.fusion.bias.transpose());
    vars.gamma = tape.parameter(Eigen::MatrixXd::Constant(1, 1, model.gamma));
    if (has_structure) {
        vars.cut_head = tape.parameter(cut->head);
        vars.cut_bias = tape.parameter(cut->bias);
    }

    StepGraph step = build_step_graph(tape, vars, hg, vert_local, seq_local, cand_local,
                                      model.kernel.mu, beta, alpha, false);
    tape.backward(step.loss);

    JointGradients out;
    out.loss = tape.value(step.loss)(0, 0);
    out.l_str = step.l_str;
    out.l_pre = step.l_pre;
    out.embeddings =
        Eigen::MatrixXd::Zero(model.table.embeddings.rows(), model.table.embeddings.cols());
    Eigen::MatrixXd g_sub = tape.grad(vars.X_sub);
    for (std::size_t i = 0; i < sub.size(); ++i)
        out.embeddings.row(sub[i]) = g_sub.row(static_cast<Eigen::Index>(i));
    out.phi = tape.grad(vars.phi);
    out.gate_weight = tape.grad(vars.gate_w);
    out.gate_bias = tape.grad(vars.gate_b)(0, 0);
    out.theta = tape.grad(vars.theta);
    out.w_hg = tape.grad(vars.fuse_whg);
    out.w_base = tape.grad(vars.fuse_wbase);
    out.fuse_bias = tape.grad(vars.fuse_b).transpose();
    out.gamma = tape.grad(vars.gamma)(0, 0);
    if (has_structure) {
        out.cut_head = tape.grad(vars.cut_head);
        out.cut_bias = tape.grad(vars.cut_bias);
    }
    return out;
}

void write_loss_curve_csv(const std::vector<LossCurvePoint>& curve, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << "epoch,L_str,L_pre,L\n";
    char line[128];
    for (const auto& p : curve) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", p.epoch, p.l_str, p.l_pre,
                      p.l_total);
        out << line;
    }
}

// --- checkpoint --------------------------------------------------------

namespace {

void write_matrix_row_major(std::ofstream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
}

Eigen::MatrixXd read_matrix_row_major(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            m(r, c) = v;
        }
    if (!in) throw IoError("truncated checkpoint");
    return m;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write("LHG1", 4);
    std::uint32_t d_f = static_cast<std::uint32_t>(model.table.d_f());
    std::uint32_t n_items = static_cast<std::uint32_t>(model.table.items.size());
    out.write(reinterpret_cast<const char*>(&d_f), sizeof(d_f));
    out.write(reinterpret_cast<const char*>(&n_items), sizeof(n_items));
    write_matrix_row_major(out, model.table.embeddings);
    write_matrix_row_major(out, model.kernel.phi);
    write_matrix_row_major(out, model.gate.weight);
    write_matrix_row_major(out, Eigen::MatrixXd::Constant(1, 1, model.gate.bias));
    write_matrix_row_major(out, model.theta);
    write_matrix_row_major(out, model.fusion.w_hg);
    write_matrix_row_major(out, model.fusion.w_base);
    write_matrix_row_major(out, model.fusion.bias);
    write_matrix_row_major(out, Eigen::MatrixXd::Constant(1, 1, model.gamma));
    write_matrix_row_major(out, Eigen::MatrixXd::Constant(1, 1, model.kernel.mu));
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path, const std::vector<std::string>& items) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LHG1", 4) != 0)
        throw ParseError("bad checkpoint magic in " + path, 0);
    std::uint32_t d_f = 0, n_items = 0;
    in.read(reinterpret_cast<char*>(&d_f), sizeof(d_f));
    in.read(reinterpret_cast<char*>(&n_items), sizeof(n_items));
    if (!in || n_items != items.size())
        throw ParseError("checkpoint item count does not match catalog", 0);

    Model model;
    model.table.items = items;
    for (int i = 0; i < static_cast<int>(items.size()); ++i)
        model.table.index.emplace(items[static_cast<std::size_t>(i)], i);
    auto d = static_cast<Eigen::Index>(d_f);
    model.table.embeddings = read_matrix_row_major(in, static_cast<Eigen::Index>(n_items), d);
    model.kernel.phi = read_matrix_row_major(in, d, d);
    model.gate.weight = read_matrix_row_major(in, d, 1);
    model.gate.bias = read_matrix_row_major(in, 1, 1)(0, 0);
    model.theta = read_matrix_row_major(in, d, d);
    model.fusion.w_hg = read_matrix_row_major(in, d, d);
    model.fusion.w_base = read_matrix_row_major(in, d, d);
    model.fusion.bias = read_matrix_row_major(in, d, 1);
    model.gamma = read_matrix_row_major(in, 1, 1)(0, 0);
    model.kernel.mu = read_matrix_row_major(in, 1, 1)(0, 0);
    return model;
}

}  // namespace llmhg

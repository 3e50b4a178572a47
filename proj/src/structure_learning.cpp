#include "llmhg/structure_learning.hpp"

#include "llmhg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace llmhg {

namespace {
constexpr double kWeightFloor = 1e-12;
constexpr double kWeightCeil = 1e12;
}  // namespace

Eigen::VectorXd prototype_initial(const Hyperedge& edge, const Eigen::MatrixXd& item_features) {
    if (edge.members.empty()) throw InternalInvariantViolation("empty hyperedge");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(item_features.cols());
    for (int v : edge.members) sum += item_features.row(v).transpose();
    return sum / static_cast<double>(edge.members.size());
}

CorrectedPrototype prototype_corrected(const Eigen::VectorXd& p_ori,
                                       const std::optional<TextEmbedding>& text,
                                       const GateParams& gate) {
    if (!text) return CorrectedPrototype{p_ori, 0.0};
    double z = gate.weight.dot(text->vector) + gate.bias;
    if (!std::isfinite(z)) throw NumericalError("non-finite gate response");
    double lambda = std::exp(-z) / (1.0 + std::exp(-z));
    CorrectedPrototype out;
    out.lambda = lambda;
    out.p = (1.0 - lambda) * p_ori + lambda * text->vector;
    return out;
}

PrototypeSet compute_prototypes(const MultiViewHypergraph& hg,
                                const Eigen::MatrixXd& item_features, const GateParams& gate) {
    PrototypeSet protos;
    protos.reserve(hg.edges.size());
    for (const auto& edge : hg.edges) {
        PrototypeEntry entry;
        entry.p_ori = prototype_initial(edge, item_features);
        auto corrected = prototype_corrected(entry.p_ori, edge.text_embedding, gate);
        entry.p = corrected.p;
        entry.lambda = corrected.lambda;
        protos.push_back(std::move(entry));
    }
    return protos;
}

double hyperedge_weight(const Hyperedge& edge, const KernelParams& kernel,
                        const Eigen::MatrixXd& item_features, const PrototypeSet& prototypes,
                        double beta, std::size_t n_e) {
    if (kernel.mu <= 0.0) throw InvalidConfig("heat-kernel bandwidth must be positive");
    if (beta < 0.0 || beta > 1.0) throw InvalidConfig("beta must lie in [0,1]");

    double intra = 1.0;  // singleton edges
    const std::size_t delta = edge.members.size();
    if (delta >= 2) {
        double acc = 0.0;
        for (std::size_t i = 0; i < delta; ++i) {
            for (std::size_t j = 0; j < delta; ++j) {
                if (i == j) continue;
                Eigen::VectorXd xi = kernel.phi * item_features.row(edge.members[i]).transpose();
                Eigen::VectorXd xj = kernel.phi * item_features.row(edge.members[j]).transpose();
                acc += std::exp(-(xi - xj).squaredNorm() / kernel.mu);
            }
        }
        intra = acc / (static_cast<double>(delta) * static_cast<double>(delta - 1));
    }

    double inter = 0.0;
    const auto& p_e = prototypes[static_cast<std::size_t>(edge.edge_id)].p;
    for (const auto& entry : prototypes) inter += (p_e - entry.p).squaredNorm();
    inter /= static_cast<double>(n_e);

    return beta * intra + (1.0 - beta) * inter;
}

Eigen::VectorXd compute_weights(const MultiViewHypergraph& hg,
                                const Eigen::MatrixXd& item_features,
                                const KernelParams& kernel, const GateParams& gate, double beta) {
    auto protos = compute_prototypes(hg, item_features, gate);
    Eigen::VectorXd w(static_cast<Eigen::Index>(hg.n_e()));
    for (std::size_t e = 0; e < hg.n_e(); ++e) {
        double v = hyperedge_weight(hg.edges[e], kernel, item_features, protos, beta, hg.n_e());
        w[static_cast<Eigen::Index>(e)] = std::clamp(v, kWeightFloor, kWeightCeil);
    }
    return w;
}

double structure_loss(const Eigen::MatrixXd& F, const HypergraphTensors& tensors) {
    if (F.rows() != tensors.L.rows())
        throw ShapeError("cut matrix rows must match vertex count");
    if (F.cols() != tensors.H.cols())
        throw ShapeError("cut matrix columns must match hyperedge count");
    return (F.transpose() * tensors.L * F).trace();
}

Eigen::MatrixXd cut_predictions(const Eigen::MatrixXd& item_features, const CutPredictor& cut) {
    if (item_features.cols() != cut.head.rows())
        throw ShapeError("cut head rows must match feature dimension");
    Eigen::MatrixXd logits = item_features * cut.head;
    logits.rowwise() += cut.bias;
    return logits.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

double median_bandwidth(const std::vector<const MultiViewHypergraph*>& hypergraphs,
                        const Eigen::MatrixXd& catalog_features,
                        const std::vector<std::vector<int>>& vertex_rows) {
    std::vector<double> distances;
    for (std::size_t h = 0; h < hypergraphs.size(); ++h) {
        const auto& hg = *hypergraphs[h];
        const auto& rows = vertex_rows[h];
        for (const auto& edge : hg.edges) {
            for (std::size_t i = 0; i < edge.members.size(); ++i) {
                for (std::size_t j = i + 1; j < edge.members.size(); ++j) {
                    int gi = rows[static_cast<std::size_t>(edge.members[i])];
                    int gj = rows[static_cast<std::size_t>(edge.members[j])];
                    distances.push_back(
                        (catalog_features.row(gi) - catalog_features.row(gj)).squaredNorm());
                }
            }
        }
    }
    if (distances.empty()) return 1.0;
    std::size_t mid = distances.size() / 2;
    std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid),
                     distances.end());
    double med = distances[mid];
    return med > 1e-12 ? med : 1.0;
}

double median_bandwidth(const MultiViewHypergraph& hg, const Eigen::MatrixXd& item_features) {
    std::vector<int> identity(hg.n_v());
    for (std::size_t i = 0; i < hg.n_v(); ++i) identity[i] = static_cast<int>(i);
    return median_bandwidth({&hg}, item_features, {identity});
}

StructureGraph build_structure_graph(ad::Tape& tape, const MultiViewHypergraph& hg,
                                     const StructureParams& params, double mu, double beta) {
    if (mu <= 0.0) throw InvalidConfig("heat-kernel bandwidth must be positive");
    const auto n_v = static_cast<Eigen::Index>(hg.n_v());
    const auto n_e = static_cast<Eigen::Index>(hg.n_e());
    const Eigen::Index d_f = tape.value(params.features).cols();

    StructureGraph g;

    // phi(x_i) rows: x_i^T phi^T
    ad::VarId mapped = tape.matmul(params.features, tape.transpose(params.phi));

    std::vector<ad::VarId> edge_weights;
    std::vector<ad::VarId> inter_terms;

    // prototypes with text gating
    for (const auto& edge : hg.edges) {
        ad::VarId members = tape.gather_rows(params.features, edge.members);
        ad::VarId p_ori = tape.mean_rows(members);
        if (edge.text_embedding) {
            ad::VarId text = tape.constant(edge.text_embedding->vector.transpose());  // 1 x d_f
            ad::VarId z = tape.add(tape.matmul(text, params.gate_weight), params.gate_bias);
            ad::VarId lambda = tape.sigmoid(tape.cmul(z, -1.0));
            ad::VarId p = tape.add(p_ori, tape.scale_by_scalar(tape.sub(text, p_ori), lambda));
            g.prototypes.push_back(p);
            g.lambdas.push_back(lambda);
        } else {
            g.prototypes.push_back(p_ori);
            g.lambdas.push_back(tape.constant(Eigen::MatrixXd::Zero(1, 1)));
        }
    }

    for (std::size_t e = 0; e < hg.edges.size(); ++e) {
        const auto& edge = hg.edges[e];
        const std::size_t delta = edge.members.size();

        ad::VarId intra;
        if (delta >= 2) {
            ad::VarId rows = tape.gather_rows(mapped, edge.members);
            ad::VarId gram = tape.matmul(rows, tape.transpose(rows));
            ad::VarId sq = tape.diag_part(gram);  // delta x 1
            ad::VarId ones_row =
                tape.constant(Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(delta)));
            ad::VarId sq_broadcast = tape.matmul(sq, ones_row);
            ad::VarId dists = tape.sub(tape.add(sq_broadcast, tape.transpose(sq_broadcast)),
                                       tape.cmul(gram, 2.0));
            ad::VarId kernel_sum = tape.sum(tape.expe(tape.cmul(dists, -1.0 / mu)));
            // the diagonal contributes exp(0)=1 per member with identically zero gradient
            ad::VarId off_diag = tape.sub(
                kernel_sum, tape.constant(Eigen::MatrixXd::Constant(
                                1, 1, static_cast<double>(delta))));
            intra = tape.cmul(off_diag,
                              1.0 / (static_cast<double>(delta) * static_cast<double>(delta - 1)));
        } else {
            intra = tape.constant(Eigen::MatrixXd::Ones(1, 1));
        }

        ad::VarId inter = tape.constant(Eigen::MatrixXd::Zero(1, 1));
        for (std::size_t k = 0; k < hg.edges.size(); ++k) {
            ad::VarId diff = tape.sub(g.prototypes[e], g.prototypes[k]);
            inter = tape.add(inter, tape.sum(tape.mul(diff, diff)));
        }
        inter = tape.cmul(inter, 1.0 / static_cast<double>(n_e));
        inter_terms.push_back(inter);

        ad::VarId w_e = tape.add(tape.cmul(intra, beta), tape.cmul(inter, 1.0 - beta));
        edge_weights.push_back(w_e);
    }

    g.weights = tape.clamp(tape.concat_rows(edge_weights), kWeightFloor, kWeightCeil);

    // incidence pattern is structural: constants
    HypergraphTensors base = incidence(hg);
    ad::VarId H = tape.constant(base.H);
    ad::VarId iso = tape.constant(base.iso);
    ad::VarId inv_delta = tape.constant(base.delta.array().inverse().matrix());

    g.degrees = tape.matmul(H, g.weights);
    g.deg_safe = tape.add(g.degrees, iso);
    ad::VarId inv_sqrt_d = tape.cpow(g.deg_safe, -0.5);

    ad::VarId ones_v = tape.constant(Eigen::MatrixXd::Ones(n_v, 1));
    ad::VarId w_over_delta = tape.mul(g.weights, inv_delta);
    ad::VarId col_scale = tape.matmul(ones_v, tape.transpose(w_over_delta));
    ad::VarId H_scaled = tape.mul(H, col_scale);
    ad::VarId mixing = tape.matmul(H_scaled, tape.transpose(H));
    ad::VarId outer = tape.matmul(inv_sqrt_d, tape.transpose(inv_sqrt_d));
    g.smoothing = tape.mul(mixing, outer);

    ad::VarId logits = tape.add(tape.matmul(params.features, params.cut_head),
                                tape.matmul(ones_v, params.cut_bias));
    g.cut = tape.sigmoid(logits);

    // Tr(F^T L F) = sum(F .* F) - sum(F .* (S F))
    ad::VarId self_term = tape.sum(tape.mul(g.cut, g.cut));
    ad::VarId smooth_term = tape.sum(tape.mul(g.cut, tape.matmul(g.smoothing, g.cut)));
    g.loss = tape.sub(self_term, smooth_term);

    (void)d_f;
    return g;
}

SLGradients sl_gradients(const MultiViewHypergraph& hg, const Eigen::MatrixXd& item_features,
                         const KernelParams& kernel, const GateParams& gate,
                         const CutPredictor& cut, double beta) {
    ad::Tape tape;
    StructureParams params;
    params.features = tape.parameter(item_features);
    params.phi = tape.parameter(kernel.phi);
    params.gate_weight = tape.parameter(gate.weight);
    params.gate_bias = tape.parameter(Eigen::MatrixXd::Constant(1, 1, gate.bias));
    params.cut_head = tape.parameter(cut.head);
    params.cut_bias = tape.parameter(cut.bias);

    auto graph = build_structure_graph(tape, hg, params, kernel.mu, beta);
    tape.backward(graph.loss);

    SLGradients out;
    out.loss = tape.value(graph.loss)(0, 0);
    if (!std::isfinite(out.loss)) throw NumericalError("non-finite structure loss");
    out.features = tape.grad(params.features);
    out.phi = tape.grad(params.phi);
    out.gate_weight = tape.grad(params.gate_weight);
    out.gate_bias = tape.grad(params.gate_bias)(0, 0);
    out.cut_head = tape.grad(params.cut_head);
    out.cut_bias = tape.grad(params.cut_bias);
    for (const auto* g : {&out.features, &out.phi, &out.cut_head}) {
        if (!g->allFinite()) throw NumericalError("non-finite structure gradient");
    }
    return out;
}

}  // namespace llmhg

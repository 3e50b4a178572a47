#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace llmhg::ad {

// Minimal dense reverse-mode tape. Values are computed eagerly at node
// creation; backward() accumulates gradients in reverse topological order.
// Shapes are fixed per node, Eigen::MatrixXd throughout (scalars are 1x1).

using VarId = int;

class Tape {
public:
    VarId constant(Eigen::MatrixXd value);
    VarId parameter(Eigen::MatrixXd value);  // receives a gradient

    const Eigen::MatrixXd& value(VarId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Eigen::MatrixXd& grad(VarId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);  // elementwise
    VarId matmul(VarId a, VarId b);
    VarId transpose(VarId a);
    VarId cmul(VarId a, double c);
    VarId cpow(VarId a, double exponent);  // elementwise
    VarId expe(VarId a);
    VarId loge(VarId a);
    VarId sigmoid(VarId a);
    VarId relu(VarId a);
    VarId clamp(VarId a, double lo, double hi);  // zero gradient outside [lo, hi]
    VarId sum(VarId a);                          // 1x1
    VarId gather_rows(VarId a, std::vector<int> rows);
    VarId mean_rows(VarId a);                     // 1 x cols
    VarId scale_by_scalar(VarId a, VarId scalar);  // scalar is 1x1
    VarId div_by_scalar(VarId a, VarId scalar);
    VarId scalar_pow_vec(VarId scalar, Eigen::VectorXd exponents);  // n x 1, base > 0
    VarId concat_rows(const std::vector<VarId>& parts);
    VarId diag_part(VarId a);  // n x 1

    // seed = dL/d(root); root must be 1x1 when seeding with 1
    void backward(VarId root);

private:
    enum class Op {
        Leaf,
        Add,
        Sub,
        Mul,
        MatMul,
        Transpose,
        CMul,
        CPow,
        Exp,
        Log,
        Sigmoid,
        Relu,
        Clamp,
        Sum,
        GatherRows,
        MeanRows,
        ScaleByScalar,
        DivByScalar,
        ScalarPowVec,
        ConcatRows,
        DiagPart,
    };

    struct Node {
        Op op = Op::Leaf;
        std::vector<VarId> inputs;
        Eigen::MatrixXd value;
        Eigen::MatrixXd grad;
        bool requires_grad = false;
        double c0 = 0.0, c1 = 0.0;       // op constants
        std::vector<int> index_aux;      // gather rows / concat row offsets
        Eigen::VectorXd vector_aux;      // scalar_pow_vec exponents
    };

    VarId push(Node node);
    Node& at(VarId id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace llmhg::ad

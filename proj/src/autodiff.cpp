#include "llmhg/autodiff.hpp"

#include "llmhg/errors.hpp"

#include <cmath>

namespace llmhg::ad {

VarId Tape::push(Node node) {
    node.requires_grad = node.op == Op::Leaf
                             ? node.requires_grad
                             : [&] {
                                   for (VarId in : node.inputs)
                                       if (at(in).requires_grad) return true;
                                   return false;
                               }();
    node.grad = Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
    nodes_.push_back(std::move(node));
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::constant(Eigen::MatrixXd value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = false;
    return push(std::move(n));
}

VarId Tape::parameter(Eigen::MatrixXd value) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

namespace {
void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("elementwise op on mismatched shapes");
}
}  // namespace

VarId Tape::add(VarId a, VarId b) {
    check_same_shape(value(a), value(b));
    Node n;
    n.op = Op::Add;
    n.inputs = {a, b};
    n.value = value(a) + value(b);
    return push(std::move(n));
}

VarId Tape::sub(VarId a, VarId b) {
    check_same_shape(value(a), value(b));
    Node n;
    n.op = Op::Sub;
    n.inputs = {a, b};
    n.value = value(a) - value(b);
    return push(std::move(n));
}

VarId Tape::mul(VarId a, VarId b) {
    check_same_shape(value(a), value(b));
    Node n;
    n.op = Op::Mul;
    n.inputs = {a, b};
    n.value = value(a).cwiseProduct(value(b));
    return push(std::move(n));
}

VarId Tape::matmul(VarId a, VarId b) {
    if (value(a).cols() != value(b).rows()) throw ShapeError("matmul shape mismatch");
    Node n;
    n.op = Op::MatMul;
    n.inputs = {a, b};
    n.value = value(a) * value(b);
    return push(std::move(n));
}

VarId Tape::transpose(VarId a) {
    Node n;
    n.op = Op::Transpose;
    n.inputs = {a};
    n.value = value(a).transpose();
    return push(std::move(n));
}

VarId Tape::cmul(VarId a, double c) {
    Node n;
    n.op = Op::CMul;
    n.inputs = {a};
    n.c0 = c;
    n.value = value(a) * c;
    return push(std::move(n));
}

VarId Tape::cpow(VarId a, double exponent) {
    Node n;
    n.op = Op::CPow;
    n.inputs = {a};
    n.c0 = exponent;
    n.value = value(a).array().pow(exponent);
    return push(std::move(n));
}

VarId Tape::expe(VarId a) {
    Node n;
    n.op = Op::Exp;
    n.inputs = {a};
    n.value = value(a).array().exp();
    return push(std::move(n));
}

VarId Tape::loge(VarId a) {
    Node n;
    n.op = Op::Log;
    n.inputs = {a};
    n.value = value(a).array().log();
    return push(std::move(n));
}

VarId Tape::sigmoid(VarId a) {
    Node n;
    n.op = Op::Sigmoid;
    n.inputs = {a};
    n.value = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return push(std::move(n));
}

VarId Tape::relu(VarId a) {
    Node n;
    n.op = Op::Relu;
    n.inputs = {a};
    n.value = value(a).cwiseMax(0.0);
    return push(std::move(n));
}

VarId Tape::clamp(VarId a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.inputs = {a};
    n.c0 = lo;
    n.c1 = hi;
    n.value = value(a).cwiseMax(lo).cwiseMin(hi);
    return push(std::move(n));
}

VarId Tape::sum(VarId a) {
    Node n;
    n.op = Op::Sum;
    n.inputs = {a};
    n.value = Eigen::MatrixXd::Constant(1, 1, value(a).sum());
    return push(std::move(n));
}

VarId Tape::gather_rows(VarId a, std::vector<int> rows) {
    const auto& src = value(a);
    Node n;
    n.op = Op::GatherRows;
    n.inputs = {a};
    n.value.resize(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= src.rows()) throw ShapeError("gather row out of range");
        n.value.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
    }
    n.index_aux = std::move(rows);
    return push(std::move(n));
}

VarId Tape::mean_rows(VarId a) {
    Node n;
    n.op = Op::MeanRows;
    n.inputs = {a};
    n.value = value(a).colwise().mean();
    return push(std::move(n));
}

VarId Tape::scale_by_scalar(VarId a, VarId scalar) {
    if (value(scalar).size() != 1) throw ShapeError("scale_by_scalar expects 1x1 scalar");
    Node n;
    n.op = Op::ScaleByScalar;
    n.inputs = {a, scalar};
    n.value = value(a) * value(scalar)(0, 0);
    return push(std::move(n));
}

VarId Tape::div_by_scalar(VarId a, VarId scalar) {
    if (value(scalar).size() != 1) throw ShapeError("div_by_scalar expects 1x1 scalar");
    Node n;
    n.op = Op::DivByScalar;
    n.inputs = {a, scalar};
    n.value = value(a) / value(scalar)(0, 0);
    return push(std::move(n));
}

VarId Tape::scalar_pow_vec(VarId scalar, Eigen::VectorXd exponents) {
    if (value(scalar).size() != 1) throw ShapeError("scalar_pow_vec expects 1x1 scalar");
    double s = value(scalar)(0, 0);
    Node n;
    n.op = Op::ScalarPowVec;
    n.inputs = {scalar};
    n.value.resize(exponents.size(), 1);
    for (Eigen::Index i = 0; i < exponents.size(); ++i) n.value(i, 0) = std::pow(s, exponents[i]);
    n.vector_aux = std::move(exponents);
    return push(std::move(n));
}

VarId Tape::concat_rows(const std::vector<VarId>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows with no parts");
    Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    for (VarId p : parts) {
        if (value(p).cols() != cols) throw ShapeError("concat_rows column mismatch");
        rows += value(p).rows();
    }
    Node n;
    n.op = Op::ConcatRows;
    n.inputs = parts;
    n.value.resize(rows, cols);
    Eigen::Index offset = 0;
    for (VarId p : parts) {
        n.value.middleRows(offset, value(p).rows()) = value(p);
        n.index_aux.push_back(static_cast<int>(offset));
        offset += value(p).rows();
    }
    return push(std::move(n));
}

VarId Tape::diag_part(VarId a) {
    if (value(a).rows() != value(a).cols()) throw ShapeError("diag_part expects a square matrix");
    Node n;
    n.op = Op::DiagPart;
    n.inputs = {a};
    n.value = value(a).diagonal();
    return push(std::move(n));
}

void Tape::backward(VarId root) {
    if (value(root).size() != 1) throw ShapeError("backward root must be a scalar");
    for (auto& n : nodes_) n.grad.setZero();
    at(root).grad(0, 0) = 1.0;

    for (VarId id = root; id >= 0; --id) {
        Node& n = at(id);
        if (!n.requires_grad || n.op == Op::Leaf) continue;
        const Eigen::MatrixXd& g = n.grad;
        switch (n.op) {
            case Op::Add:
                at(n.inputs[0]).grad += g;
                at(n.inputs[1]).grad += g;
                break;
            case Op::Sub:
                at(n.inputs[0]).grad += g;
                at(n.inputs[1]).grad -= g;
                break;
            case Op::Mul:
                at(n.inputs[0]).grad += g.cwiseProduct(value(n.inputs[1]));
                at(n.inputs[1]).grad += g.cwiseProduct(value(n.inputs[0]));
                break;
            case Op::MatMul:
                at(n.inputs[0]).grad += g * value(n.inputs[1]).transpose();
                at(n.inputs[1]).grad += value(n.inputs[0]).transpose() * g;
                break;
            case Op::Transpose:
                at(n.inputs[0]).grad += g.transpose();
                break;
            case Op::CMul:
                at(n.inputs[0]).grad += g * n.c0;
                break;
            case Op::CPow: {
                const auto& x = value(n.inputs[0]);
                at(n.inputs[0]).grad.array() +=
                    g.array() * n.c0 * x.array().pow(n.c0 - 1.0);
                break;
            }
            case Op::Exp:
                at(n.inputs[0]).grad.array() += g.array() * n.value.array();
                break;
            case Op::Log:
                at(n.inputs[0]).grad.array() += g.array() / value(n.inputs[0]).array();
                break;
            case Op::Sigmoid:
                at(n.inputs[0]).grad.array() +=
                    g.array() * n.value.array() * (1.0 - n.value.array());
                break;
            case Op::Relu:
                at(n.inputs[0]).grad.array() +=
                    g.array() * (value(n.inputs[0]).array() > 0.0).cast<double>();
                break;
            case Op::Clamp: {
                const auto& x = value(n.inputs[0]);
                at(n.inputs[0]).grad.array() +=
                    g.array() *
                    ((x.array() >= n.c0) && (x.array() <= n.c1)).cast<double>();
                break;
            }
            case Op::Sum:
                at(n.inputs[0]).grad.array() += g(0, 0);
                break;
            case Op::GatherRows:
                for (std::size_t i = 0; i < n.index_aux.size(); ++i)
                    at(n.inputs[0]).grad.row(n.index_aux[i]) +=
                        g.row(static_cast<Eigen::Index>(i));
                break;
            case Op::MeanRows: {
                double inv_n = 1.0 / static_cast<double>(value(n.inputs[0]).rows());
                at(n.inputs[0]).grad.rowwise() +=
                    Eigen::RowVectorXd(g.row(0) * inv_n);
                break;
            }
            case Op::ScaleByScalar: {
                double s = value(n.inputs[1])(0, 0);
                at(n.inputs[0]).grad += g * s;
                at(n.inputs[1]).grad(0, 0) += g.cwiseProduct(value(n.inputs[0])).sum();
                break;
            }
            case Op::DivByScalar: {
                double s = value(n.inputs[1])(0, 0);
                at(n.inputs[0]).grad += g / s;
                at(n.inputs[1]).grad(0, 0) +=
                    -g.cwiseProduct(value(n.inputs[0])).sum() / (s * s);
                break;
            }
            case Op::ScalarPowVec: {
                double s = value(n.inputs[0])(0, 0);
                double acc = 0.0;
                for (Eigen::Index i = 0; i < n.vector_aux.size(); ++i)
                    acc += g(i, 0) * n.vector_aux[i] * std::pow(s, n.vector_aux[i] - 1.0);
                at(n.inputs[0]).grad(0, 0) += acc;
                break;
            }
            case Op::ConcatRows:
                for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                    Eigen::Index rows = value(n.inputs[i]).rows();
                    at(n.inputs[i]).grad += g.middleRows(n.index_aux[i], rows);
                }
                break;
            case Op::DiagPart:
                for (Eigen::Index i = 0; i < n.value.rows(); ++i)
                    at(n.inputs[0]).grad(i, i) += g(i, 0);
                break;
            case Op::Leaf:
                break;
        }
    }
}

}  // namespace llmhg::ad

#include "rvlm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace rvlm {

namespace {

std::atomic<std::uint64_t> g_seq{0};
thread_local int t_no_grad_depth = 0;

std::string shape_str(const Mat& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                                " vs " + shape_str(b));
}

void require_same_shape(const char* op, const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

std::shared_ptr<detail::Node> make_node(Mat v) {
    auto n = std::make_shared<detail::Node>();
    n->val = std::move(v);
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

constexpr double kLayerNormEps = 1e-6;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

bool grad_enabled() { return t_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++t_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --t_no_grad_depth; }

Tensor Tensor::constant(Mat v) {
    auto n = make_node(std::move(v));
    n->is_leaf = true;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

Tensor Tensor::param(Mat v) {
    auto n = make_node(std::move(v));
    n->is_leaf = true;
    n->requires_grad = true;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols) {
    return constant(Mat::Zero(rows, cols));
}

Tensor Tensor::ones(Eigen::Index rows, Eigen::Index cols) {
    return constant(Mat::Ones(rows, cols));
}

Mat& Tensor::value_mut() {
    if (!node_ || !node_->is_leaf) throw std::logic_error("value_mut: only leaf tensors are mutable");
    return node_->val;
}

double Tensor::item() const {
    if (node_->val.size() != 1) throw std::logic_error("item: tensor is not 1x1");
    return node_->val(0, 0);
}

Mat Tensor::grad() const {
    if (!node_) throw std::logic_error("grad: undefined tensor");
    if (node_->grad.size() == 0) return Mat::Zero(node_->val.rows(), node_->val.cols());
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.resize(0, 0);
}

Tensor Tensor::op_node(const char* op, Mat val, const std::vector<Tensor>& inputs,
                       std::function<void(const Mat&)> backward) {
    auto n = make_node(std::move(val));
    n->op = op;
    n->requires_grad = true;
    n->backward = std::move(backward);
    n->parents.reserve(inputs.size());
    for (const auto& t : inputs) n->parents.push_back(t.node());
    return Tensor(std::move(n));
}

bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!grad_enabled()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
    Mat v = a.value() * b.value();
    if (!recording({&a, &b})) return Tensor::constant(std::move(v));
    auto na = a.node(), nb = b.node();
    return Tensor::op_node("matmul", std::move(v), {a, b}, [na, nb](const Mat& g) {
        if (na->requires_grad) na->accum(g * nb->val.transpose());
        if (nb->requires_grad) nb->accum(na->val.transpose() * g);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a.value(), b.value());
    Mat v = a.value() + b.value();
    if (!recording({&a, &b})) return Tensor::constant(std::move(v));
    auto na = a.node(), nb = b.node();
    return Tensor::op_node("add", std::move(v), {a, b}, [na, nb](const Mat& g) {
        if (na->requires_grad) na->accum(g);
        if (nb->requires_grad) nb->accum(g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a.value(), b.value());
    Mat v = a.value() - b.value();
    if (!recording({&a, &b})) return Tensor::constant(std::move(v));
    auto na = a.node(), nb = b.node();
    return Tensor::op_node("sub", std::move(v), {a, b}, [na, nb](const Mat& g) {
        if (na->requires_grad) na->accum(g);
        if (nb->requires_grad) nb->accum(-g);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a.value(), b.value());
    Mat v = a.value().cwiseProduct(b.value());
    if (!recording({&a, &b})) return Tensor::constant(std::move(v));
    auto na = a.node(), nb = b.node();
    return Tensor::op_node("mul", std::move(v), {a, b}, [na, nb](const Mat& g) {
        if (na->requires_grad) na->accum(g.cwiseProduct(nb->val));
        if (nb->requires_grad) nb->accum(g.cwiseProduct(na->val));
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape("div", a.value(), b.value());
    Mat v = a.value().cwiseQuotient(b.value());
    if (!recording({&a, &b})) return Tensor::constant(std::move(v));
    auto na = a.node(), nb = b.node();
    return Tensor::op_node("div", std::move(v), {a, b}, [na, nb](const Mat& g) {
        if (na->requires_grad) na->accum(g.cwiseQuotient(nb->val));
        if (nb->requires_grad)
            nb->accum(-(g.cwiseProduct(na->val)).cwiseQuotient(nb->val.cwiseProduct(nb->val)));
    });
}

Tensor scale(const Tensor& a, double k) {
    Mat v = a.value() * k;
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("scale", std::move(v), {a}, [na, k](const Mat& g) {
        if (na->requires_grad) na->accum(g * k);
    });
}

Tensor transpose(const Tensor& a) {
    Mat v = a.value().transpose();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("transpose", std::move(v), {a}, [na](const Mat& g) {
        if (na->requires_grad) na->accum(g.transpose());
    });
}

Tensor softmax_rows(const Tensor& a) {
    Mat v = a.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        double mx = v.row(i).maxCoeff();
        v.row(i) = (v.row(i).array() - mx).exp();
        v.row(i) /= v.row(i).sum();
    }
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    Mat out = v;
    return Tensor::op_node("softmax", std::move(v), {a}, [na, out](const Mat& g) {
        if (!na->requires_grad) return;
        Mat dx(out.rows(), out.cols());
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            double dot = g.row(i).dot(out.row(i));
            dx.row(i) = out.row(i).cwiseProduct(g.row(i).array() - dot).matrix();
        }
        na->accum(dx);
    });
}

Tensor layer_norm_rows(const Tensor& a) {
    const Mat& x = a.value();
    Mat y(x.rows(), x.cols());
    Eigen::VectorXd inv_std(x.rows());
    const double n = static_cast<double>(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mu = x.row(i).mean();
        Eigen::RowVectorXd cent = x.row(i).array() - mu;
        double var = cent.squaredNorm() / n;
        double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std(i) = is;
        y.row(i) = cent * is;
    }
    if (!recording({&a})) return Tensor::constant(std::move(y));
    auto na = a.node();
    Mat out = y;
    return Tensor::op_node("layer_norm", std::move(y), {a}, [na, out, inv_std, n](const Mat& g) {
        if (!na->requires_grad) return;
        Mat dx(out.rows(), out.cols());
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            double gm = g.row(i).mean();
            double gy = g.row(i).cwiseProduct(out.row(i)).sum() / n;
            dx.row(i) = inv_std(i) * (g.row(i).array() - gm - out.row(i).array() * gy).matrix();
        }
        na->accum(dx);
    });
}

Tensor gelu(const Tensor& a) {
    const Mat& x = a.value();
    Mat v = x.unaryExpr([](double t) {
        return 0.5 * t * (1.0 + std::tanh(kGeluC * (t + kGeluA * t * t * t)));
    });
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("gelu", std::move(v), {a}, [na](const Mat& g) {
        if (!na->requires_grad) return;
        Mat d = na->val.unaryExpr([](double t) {
            double u = kGeluC * (t + kGeluA * t * t * t);
            double th = std::tanh(u);
            double du = kGeluC * (1.0 + 3.0 * kGeluA * t * t);
            return 0.5 * (1.0 + th) + 0.5 * t * (1.0 - th * th) * du;
        });
        na->accum(g.cwiseProduct(d));
    });
}

Tensor exp(const Tensor& a) {
    Mat v = a.value().array().exp();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    Mat out = v;
    return Tensor::op_node("exp", std::move(v), {a}, [na, out](const Mat& g) {
        if (na->requires_grad) na->accum(g.cwiseProduct(out));
    });
}

Tensor log(const Tensor& a) {
    Mat v = a.value().array().log();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("log", std::move(v), {a}, [na](const Mat& g) {
        if (na->requires_grad) na->accum(g.cwiseQuotient(na->val));
    });
}

Tensor abs(const Tensor& a) {
    Mat v = a.value().array().abs();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("abs", std::move(v), {a}, [na](const Mat& g) {
        if (!na->requires_grad) return;
        Mat s = na->val.unaryExpr([](double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); });
        na->accum(g.cwiseProduct(s));
    });
}

Tensor sum(const Tensor& a) {
    Mat v(1, 1);
    v(0, 0) = a.value().sum();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("sum", std::move(v), {a}, [na](const Mat& g) {
        if (na->requires_grad)
            na->accum(Mat::Constant(na->val.rows(), na->val.cols(), g(0, 0)));
    });
}

Tensor mean(const Tensor& a) {
    Mat v(1, 1);
    v(0, 0) = a.value().mean();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    const double inv_n = 1.0 / static_cast<double>(a.value().size());
    return Tensor::op_node("mean", std::move(v), {a}, [na, inv_n](const Mat& g) {
        if (na->requires_grad)
            na->accum(Mat::Constant(na->val.rows(), na->val.cols(), g(0, 0) * inv_n));
    });
}

Tensor frobenius_sq(const Tensor& a) {
    Mat v(1, 1);
    v(0, 0) = a.value().squaredNorm();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("frobenius_sq", std::move(v), {a}, [na](const Mat& g) {
        if (na->requires_grad) na->accum(2.0 * g(0, 0) * na->val);
    });
}

Tensor l2_norm(const Tensor& a) {
    Mat v(1, 1);
    v(0, 0) = a.value().norm();
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    const double nrm = v(0, 0);
    return Tensor::op_node("l2_norm", std::move(v), {a}, [na, nrm](const Mat& g) {
        if (!na->requires_grad) return;
        if (nrm == 0.0) throw std::domain_error("l2_norm: gradient undefined at zero input");
        na->accum((g(0, 0) / nrm) * na->val);
    });
}

Tensor l2_normalize(const Tensor& a) {
    double nrm = a.value().norm();
    if (nrm == 0.0) throw std::domain_error("l2_normalize: zero vector");
    Mat v = a.value() / nrm;
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    Mat out = v;
    return Tensor::op_node("l2_normalize", std::move(v), {a}, [na, out, nrm](const Mat& g) {
        if (!na->requires_grad) return;
        double dot = (g.array() * out.array()).sum();
        na->accum((g - dot * out) / nrm);
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    Eigen::Index cols = parts[0].cols(), rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
        rows += p.rows();
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    bool rec = false;
    for (const auto& p : parts) rec = rec || p.requires_grad();
    if (!grad_enabled() || !rec) return Tensor::constant(std::move(v));
    std::vector<std::shared_ptr<detail::Node>> ns;
    for (const auto& p : parts) ns.push_back(p.node());
    return Tensor::op_node("concat_rows", std::move(v), parts, [ns](const Mat& g) {
        Eigen::Index at = 0;
        for (auto& n : ns) {
            if (n->requires_grad) n->accum(g.middleRows(at, n->val.rows()));
            at += n->val.rows();
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    Eigen::Index rows = parts[0].rows(), cols = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
        cols += p.cols();
    }
    Mat v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    bool rec = false;
    for (const auto& p : parts) rec = rec || p.requires_grad();
    if (!grad_enabled() || !rec) return Tensor::constant(std::move(v));
    std::vector<std::shared_ptr<detail::Node>> ns;
    for (const auto& p : parts) ns.push_back(p.node());
    return Tensor::op_node("concat_cols", std::move(v), parts, [ns](const Mat& g) {
        Eigen::Index at = 0;
        for (auto& n : ns) {
            if (n->requires_grad) n->accum(g.middleCols(at, n->val.cols()));
            at += n->val.cols();
        }
    });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 1 || start + count > a.rows())
        throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + count) + ") out of bounds for " +
                                    std::to_string(a.rows()) + " rows");
    Mat v = a.value().middleRows(start, count);
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("slice_rows", std::move(v), {a}, [na, start, count](const Mat& g) {
        if (!na->requires_grad) return;
        Mat d = Mat::Zero(na->val.rows(), na->val.cols());
        d.middleRows(start, count) = g;
        na->accum(d);
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("gather_rows: empty index list");
    for (int id : ids)
        if (id < 0 || id >= a.rows())
            throw std::invalid_argument("gather_rows: index " + std::to_string(id) +
                                        " out of bounds for " + std::to_string(a.rows()) + " rows");
    Mat v(static_cast<Eigen::Index>(ids.size()), a.cols());
    for (size_t i = 0; i < ids.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = a.value().row(ids[i]);
    if (!recording({&a})) return Tensor::constant(std::move(v));
    auto na = a.node();
    return Tensor::op_node("gather_rows", std::move(v), {a}, [na, ids](const Mat& g) {
        if (!na->requires_grad) return;
        Mat d = Mat::Zero(na->val.rows(), na->val.cols());
        for (size_t i = 0; i < ids.size(); ++i) d.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
        na->accum(d);
    });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& r) {
    if (r.rows() != 1 || r.cols() != x.cols()) shape_error("add_row_broadcast", x.value(), r.value());
    Mat v = x.value().rowwise() + r.value().row(0);
    if (!recording({&x, &r})) return Tensor::constant(std::move(v));
    auto nx = x.node(), nr = r.node();
    return Tensor::op_node("add_row_broadcast", std::move(v), {x, r}, [nx, nr](const Mat& g) {
        if (nx->requires_grad) nx->accum(g);
        if (nr->requires_grad) nr->accum(g.colwise().sum());
    });
}

Tensor mul_row_broadcast(const Tensor& x, const Tensor& r) {
    if (r.rows() != 1 || r.cols() != x.cols()) shape_error("mul_row_broadcast", x.value(), r.value());
    Mat v = x.value().array().rowwise() * r.value().row(0).array();
    if (!recording({&x, &r})) return Tensor::constant(std::move(v));
    auto nx = x.node(), nr = r.node();
    return Tensor::op_node("mul_row_broadcast", std::move(v), {x, r}, [nx, nr](const Mat& g) {
        if (nx->requires_grad) nx->accum(g.array().rowwise() * nr->val.row(0).array());
        if (nr->requires_grad) nr->accum(g.cwiseProduct(nx->val).colwise().sum());
    });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    if (s.cols() != 1 || s.rows() != x.rows()) shape_error("scale_rows", x.value(), s.value());
    Mat v = x.value().array().colwise() * s.value().col(0).array();
    if (!recording({&x, &s})) return Tensor::constant(std::move(v));
    auto nx = x.node(), ns = s.node();
    return Tensor::op_node("scale_rows", std::move(v), {x, s}, [nx, ns](const Mat& g) {
        if (nx->requires_grad) nx->accum(g.array().colwise() * ns->val.col(0).array());
        if (ns->requires_grad) {
            Mat d(ns->val.rows(), 1);
            for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, 0) = g.row(i).dot(nx->val.row(i));
            ns->accum(d);
        }
    });
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
        throw std::invalid_argument("cross_entropy_rows: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(logits.rows()) + " rows");
    for (int t : targets)
        if (t < 0 || t >= logits.cols())
            throw std::invalid_argument("cross_entropy_rows: target " + std::to_string(t) +
                                        " out of range for " + std::to_string(logits.cols()) +
                                        " classes");
    const Mat& l = logits.value();
    Mat probs(l.rows(), l.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        double mx = l.row(i).maxCoeff();
        Eigen::RowVectorXd e = (l.row(i).array() - mx).exp();
        double z = e.sum();
        probs.row(i) = e / z;
        loss += std::log(z) + mx - l(i, targets[static_cast<size_t>(i)]);
    }
    Mat v(1, 1);
    v(0, 0) = loss;
    if (!recording({&logits})) return Tensor::constant(std::move(v));
    auto nl = logits.node();
    return Tensor::op_node("cross_entropy", std::move(v), {logits}, [nl, probs, targets](const Mat& g) {
        if (!nl->requires_grad) return;
        Mat d = probs;
        for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, targets[static_cast<size_t>(i)]) -= 1.0;
        nl->accum(g(0, 0) * d);
    });
}

// --- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.value().size() != 1)
        throw std::invalid_argument("backward: loss must be a defined 1x1 tensor");
    auto root = loss.node();
    if (!root->requires_grad) return;  // constant loss: nothing reachable

    // Gather reachable subgraph; creation order is topological.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

    // Fresh grads for interior nodes; leaves accumulate across calls.
    for (detail::Node* n : order)
        if (!n->is_leaf) n->grad.resize(0, 0);

    root->accum(Mat::Ones(1, 1));
    for (detail::Node* n : order) {
        if (!n->backward) continue;              // leaf
        if (n->grad.size() == 0) continue;       // unreachable from root's grad flow
        n->backward(n->grad);
    }
}

// --- finite differences --------------------------------------------------------

FdReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double h, double tol, int max_coords_per_param,
                                 std::uint64_t seed) {
    if (h <= 0.0) throw std::invalid_argument("finite_difference_check: h must be positive");

    auto eval = [&loss_fn]() {
        NoGradGuard ng;
        return loss_fn().item();
    };

    double f1 = eval();
    double f2 = eval();
    if (f1 != f2)
        throw std::runtime_error("finite_difference_check: loss_fn is nondeterministic (" +
                                 std::to_string(f1) + " vs " + std::to_string(f2) + ")");

    for (const auto& [name, p] : params) {
        Tensor t = p;  // handle copy, shared node
        t.zero_grad();
    }
    Tensor loss = loss_fn();
    backward(loss);

    std::mt19937_64 rng(seed);
    FdReport report;
    report.pass = true;
    for (const auto& [name, p] : params) {
        Mat g = p.grad();
        Tensor handle = p;
        Mat& v = handle.value_mut();
        FdParamReport pr;
        pr.name = name;

        std::vector<Eigen::Index> coords(static_cast<size_t>(v.size()));
        for (size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<Eigen::Index>(i);
        if (max_coords_per_param > 0 && static_cast<int>(coords.size()) > max_coords_per_param) {
            for (int i = 0; i < max_coords_per_param; ++i) {
                std::uniform_int_distribution<size_t> pick(i, coords.size() - 1);
                std::swap(coords[static_cast<size_t>(i)], coords[pick(rng)]);
            }
            coords.resize(static_cast<size_t>(max_coords_per_param));
        }

        for (Eigen::Index flat : coords) {
            Eigen::Index r = flat / v.cols(), c = flat % v.cols();
            double orig = v(r, c);
            v(r, c) = orig + h;
            double fp = eval();
            v(r, c) = orig - h;
            double fm = eval();
            v(r, c) = orig;
            double fd = (fp - fm) / (2.0 * h);
            double an = g(r, c);
            double abs_err = std::abs(an - fd);
            double rel = abs_err / (std::max(std::abs(an), std::abs(fd)) + 1e-4);
            if (rel > pr.max_rel_err) {
                pr.max_rel_err = rel;
                pr.max_abs_err = abs_err;
                pr.worst_row = r;
                pr.worst_col = c;
            }
            ++pr.coords_checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, pr.max_rel_err);
        if (pr.max_rel_err > tol) report.pass = false;
        report.params.push_back(std::move(pr));
    }
    return report;
}

}  // namespace rvlm

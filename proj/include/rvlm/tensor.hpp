// Reverse-mode automatic differentiation over dense row-major matrices.
//
// The graph is define-by-run: every primitive applied to an input that
// requires gradients records a node holding the forward value, the parent
// links and a backward closure. Creation order is a valid topological order,
// so backward() walks the reachable subgraph once, newest node first.
// Wrapping code in a NoGradGuard suppresses recording entirely, which makes
// frozen-parameter forward passes (memory refresh, evaluation) cheap and
// thread-safe.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace rvlm {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

struct Node {
    Mat val;
    Mat grad;  // empty until first accumulation
    bool requires_grad = false;
    bool is_leaf = false;
    std::uint64_t seq = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Mat&)> backward;  // upstream grad -> accumulate into parents

    void accum(const Mat& g) {
        if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
        grad += g;
    }
};

}  // namespace detail

// Returns false inside a NoGradGuard scope (per thread).
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
  public:
    Tensor() = default;

    static Tensor constant(Mat v);
    static Tensor scalar(double v);
    static Tensor param(Mat v);  // leaf with requires_grad
    static Tensor zeros(Eigen::Index rows, Eigen::Index cols);
    static Tensor ones(Eigen::Index rows, Eigen::Index cols);

    bool defined() const { return node_ != nullptr; }
    const Mat& value() const { return node_->val; }
    Mat& value_mut();  // leaves only (optimizer updates, FD probes)
    double item() const;

    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool is_leaf() const { return node_ && node_->is_leaf; }

    // Gradient accumulated by the last backward(); zero matrix if untouched.
    Mat grad() const;
    void zero_grad();

    Eigen::Index rows() const { return node_->val.rows(); }
    Eigen::Index cols() const { return node_->val.cols(); }

    std::shared_ptr<detail::Node> node() const { return node_; }

    static Tensor op_node(const char* op, Mat val, const std::vector<Tensor>& inputs,
                          std::function<void(const Mat&)> backward);

  private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;
};

// True when a primitive over these inputs must be recorded.
bool recording(std::initializer_list<const Tensor*> inputs);

// --- primitives -----------------------------------------------------------
// Shape mismatches throw std::invalid_argument naming the primitive and both
// shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor div(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double k);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a);  // non-affine; eps 1e-6 on variance
Tensor gelu(const Tensor& a);             // tanh approximation (smooth)
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor sum(const Tensor& a);           // 1x1
Tensor mean(const Tensor& a);          // 1x1
Tensor frobenius_sq(const Tensor& a);  // 1x1, sum of squares
Tensor l2_norm(const Tensor& a);       // 1x1, Frobenius norm
Tensor l2_normalize(const Tensor& a);  // a / ||a||_F; rejects zero input
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor gather_rows(const Tensor& a, const std::vector<int>& ids);
Tensor add_row_broadcast(const Tensor& x, const Tensor& r);  // r is 1 x cols
Tensor mul_row_broadcast(const Tensor& x, const Tensor& r);  // r is 1 x cols
Tensor scale_rows(const Tensor& x, const Tensor& s);         // s is rows x 1
// Summed softmax cross-entropy against integer targets, one per row of logits.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets);

// --- backward --------------------------------------------------------------

// Populates grads of every requires_grad node reachable from `loss` (1x1).
// Accumulates into leaf grads; callers zero leaves between steps.
void backward(const Tensor& loss);

// --- finite-difference verification ----------------------------------------

struct FdParamReport {
    std::string name;
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    int coords_checked = 0;
    Eigen::Index worst_row = 0, worst_col = 0;
};

struct FdReport {
    std::vector<FdParamReport> params;
    double max_rel_err = 0.0;
    bool pass = false;
};

// Central-difference check of analytic gradients for each named parameter.
// loss_fn must be deterministic (verified by two evaluations) and rebuild the
// graph from the current parameter values on every call. max_coords_per_param
// of 0 checks every coordinate; otherwise that many coordinates are sampled
// per tensor with the given seed.
FdReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 double h, double tol, int max_coords_per_param = 0,
                                 std::uint64_t seed = 0);

}  // namespace rvlm

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace sslvit {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorNode;
}

/// Dense float32 tensor participating in reverse-mode autodiff.
///
/// A Tensor is a cheap handle onto a shared node. Operations on tensors with
/// requires_grad record backward rules onto a define-by-run tape; calling
/// backward() on a scalar result populates grad for every reachable leaf.
/// The graph is rebuilt from scratch each training step and dropped when the
/// step's handles go out of scope.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);
    static Tensor identity(std::size_t n);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;  // element count
    bool requires_grad() const;

    std::vector<float>& data();
    const std::vector<float>& data() const;

    bool has_grad() const;
    const std::vector<float>& grad() const;  // StateError when absent
    void zero_grad();

    float item() const;  // size()==1 only
    float at(std::initializer_list<std::size_t> index) const;

    /// Copy of the data with no graph attached.
    Tensor detach() const;

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::TensorNode> node_;
};

/// Runs reverse-mode accumulation from a scalar loss. Gradients accumulate
/// into every reachable requires_grad tensor. Calling twice on the same loss
/// without rebuilding the graph is a StateError.
void backward(const Tensor& loss);

// ---- primitive operations (all differentiable) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-D
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);

/// x[N,D] + row broadcast of b[D].
Tensor add_rowvec(const Tensor& x, const Tensor& b);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);   // 2-D, axis 0 or 1
Tensor mean_axis(const Tensor& a, int axis);  // 2-D, axis 0 or 1

Tensor gelu(const Tensor& a);
Tensor log(const Tensor& a, float floor = 1e-12f);
Tensor sqrt(const Tensor& a);

/// Temperature softmax along the last axis, stabilized by max subtraction.
Tensor softmax_temp(const Tensor& logits, float tau);

/// Normalizes each column of z[N,D] to mean 0, population variance 1.
Tensor batch_norm_columns(const Tensor& z, float eps = 1e-5f);

/// LayerNorm over the last axis with learned per-feature scale and shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

/// Rows scaled to unit L2 norm.
Tensor l2_normalize_rows(const Tensor& x, float eps = 1e-6f);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1);
Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices);

/// out.flat[i] = a.flat[index_map[i]]; backward scatter-adds. The index map
/// is captured by value, so it must outlive nothing.
Tensor gather_flat(const Tensor& a, Shape out_shape, std::vector<std::size_t> index_map);

// Number of worker threads matmul may use for row partitioning. Results are
// bit-identical to the sequential loop for any setting.
void set_matmul_threads(int n);
int matmul_threads();

}  // namespace sslvit

#include "sslvit/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <functional>
#include <thread>
#include <unordered_set>

#include "sslvit/error.hpp"

namespace sslvit {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::vector<float> grad;  // allocated lazily during backward
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;
    bool backward_ran = false;

    std::size_t size() const { return data.size(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }
};

}  // namespace detail

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

namespace {

std::atomic<int> g_matmul_threads{1};

NodePtr make_node(Shape shape, std::vector<float> data, bool requires_grad) {
    if (numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return n;
}

#ifndef NDEBUG
void check_finite(const TensorNode& n, const char* op) {
    for (float v : n.data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}
#define SSLVIT_CHECK_FINITE(node, op) check_finite(node, op)
#else
#define SSLVIT_CHECK_FINITE(node, op) ((void)0)
#endif

// Builds an op result node: forward data plus a backward closure over the
// parent nodes. Parents without requires_grad are still captured so the
// closure can read their data during backward.
Tensor make_op(Shape shape, std::vector<float> data, std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn, const char* op) {
    auto out = make_node(std::move(shape), std::move(data), false);
    SSLVIT_CHECK_FINITE(*out, op);
    for (const Tensor& t : inputs) {
        if (t.defined() && t.requires_grad()) {
            out->requires_grad = true;
            break;
        }
    }
    if (out->requires_grad) {
        out->parents.reserve(inputs.size());
        for (const Tensor& t : inputs) out->parents.push_back(t.node_ptr());
        out->backward_fn = std::move(backward_fn);
    }
    return Tensor(out);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

void accumulate(TensorNode& dst, const std::vector<float>& g) {
    dst.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) dst.grad[i] += g[i];
}

// C[m,n] += or = A[m,k] * B[k,n]. B is transposed up front so both inner
// loops stream contiguously; each output element accumulates over k in a
// double, in a fixed order, so row partitioning cannot change results.
void matmul_kernel(const float* a, const float* b, float* c, std::size_t m,
                   std::size_t k, std::size_t n, bool accumulate_into) {
    std::vector<float> bt(k * n);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = b[i * n + j];

    auto rows = [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const float* arow = a + i * k;
            for (std::size_t j = 0; j < n; ++j) {
                const float* brow = bt.data() + j * k;
                double acc = 0.0;
                for (std::size_t t = 0; t < k; ++t) acc += double(arow[t]) * double(brow[t]);
                float v = static_cast<float>(acc);
                if (accumulate_into)
                    c[i * n + j] += v;
                else
                    c[i * n + j] = v;
            }
        }
    };

    int nthreads = g_matmul_threads.load(std::memory_order_relaxed);
    if (nthreads > 1 && m >= 2 && m * n * k >= 65536) {
        std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(nthreads), m);
        std::vector<std::thread> pool;
        std::size_t chunk = (m + want - 1) / want;
        for (std::size_t t = 1; t < want; ++t) {
            std::size_t i0 = t * chunk;
            std::size_t i1 = std::min(m, i0 + chunk);
            if (i0 < i1) pool.emplace_back(rows, i0, i1);
        }
        rows(0, std::min(m, chunk));
        for (auto& th : pool) th.join();
    } else {
        rows(0, m);
    }
}

std::vector<float> matmul_data(const std::vector<float>& a, const std::vector<float>& b,
                               std::size_t m, std::size_t k, std::size_t n) {
    std::vector<float> out(m * n);
    matmul_kernel(a.data(), b.data(), out.data(), m, k, n, false);
    return out;
}

}  // namespace

void set_matmul_threads(int n) { g_matmul_threads.store(std::max(1, n)); }
int matmul_threads() { return g_matmul_threads.load(); }

// ---- Tensor handle ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::size_t n = numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<float>(n, 0.0f), requires_grad));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    std::size_t n = numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<float>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    return Tensor(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    std::vector<float> d(n * n, 0.0f);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0f;
    return from_data({n, n}, std::move(d));
}

const Shape& Tensor::shape() const {
    if (!node_) throw StateError("shape() on undefined tensor");
    return node_->shape;
}

std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) throw ShapeError("dim(): axis out of range");
    return s[axis];
}

std::size_t Tensor::size() const {
    if (!node_) throw StateError("size() on undefined tensor");
    return node_->data.size();
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::vector<float>& Tensor::data() {
    if (!node_) throw StateError("data() on undefined tensor");
    return node_->data;
}

const std::vector<float>& Tensor::data() const {
    if (!node_) throw StateError("data() on undefined tensor");
    return node_->data;
}

bool Tensor::has_grad() const {
    return node_ && node_->grad.size() == node_->data.size() && !node_->data.empty();
}

const std::vector<float>& Tensor::grad() const {
    if (!has_grad()) throw StateError("grad accessed before backward populated it");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

float Tensor::item() const {
    if (size() != 1) throw ShapeError("item(): tensor has " + std::to_string(size()) + " elements");
    return node_->data[0];
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) throw ShapeError("at(): index rank mismatch");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw ShapeError("at(): index out of bounds");
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node_->data[flat];
}

Tensor Tensor::detach() const {
    if (!node_) return Tensor();
    return from_data(node_->shape, node_->data, false);
}

// ---- backward ----

void backward(const Tensor& loss) {
    if (!loss.defined()) throw StateError("backward() on undefined tensor");
    if (loss.size() != 1) {
        throw ShapeError("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    TensorNode* root = loss.node();
    if (!root->requires_grad) {
        throw StateError("backward() on a tensor detached from any graph");
    }
    if (root->backward_ran) {
        throw StateError("backward() called twice on the same graph without reset");
    }
    root->backward_ran = true;

    // Iterative post-order DFS; reverse post-order is a topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (p && p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn && n->grad.size() == n->data.size()) n->backward_fn(*n);
    }
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    auto out = matmul_data(a.data(), b.data(), m, k, n);
    return make_op(
        {m, n}, std::move(out), {a, b},
        [m, k, n](TensorNode& t) {
            const auto& g = t.grad;
            TensorNode* pa = t.parents[0].get();
            TensorNode* pb = t.parents[1].get();
            if (pa->requires_grad) {
                // dA = g * B^T
                pa->ensure_grad();
                std::vector<float> bt(n * k);
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < n; ++j) bt[j * k + i] = pb->data[i * n + j];
                matmul_kernel(g.data(), bt.data(), pa->grad.data(), m, n, k, true);
            }
            if (pb->requires_grad) {
                // dB = A^T * g
                pb->ensure_grad();
                std::vector<float> at(k * m);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < k; ++j) at[j * m + i] = pa->data[i * k + j];
                matmul_kernel(at.data(), g.data(), pb->grad.data(), k, m, n, true);
            }
        },
        "matmul");
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    std::size_t r = a.dim(0), c = a.dim(1);
    std::vector<float> out(r * c);
    const auto& d = a.data();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
    return make_op(
        {c, r}, std::move(out), {a},
        [r, c](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < c; ++i)
                for (std::size_t j = 0; j < r; ++j) p->grad[j * c + i] += t.grad[i * r + j];
        },
        "transpose");
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    return make_op(
        std::move(shape), a.data(), {a},
        [](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            accumulate(*p, t.grad);
        },
        "reshape");
}

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, op);
    const auto& da = a.data();
    const auto& db = b.data();
    std::vector<float> out(da.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(da[i], db[i]);
    return make_op(
        a.shape(), std::move(out), {a, b},
        [bwd](TensorNode& t) {
            TensorNode* pa = t.parents[0].get();
            TensorNode* pb = t.parents[1].get();
            if (pa->requires_grad) pa->ensure_grad();
            if (pb->requires_grad) pb->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) {
                auto [ga, gb] = bwd(pa->data[i], pb->data[i], t.grad[i]);
                if (pa->requires_grad) pa->grad[i] += ga;
                if (pb->requires_grad) pb->grad[i] += gb;
            }
        },
        op);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "add", [](float x, float y) { return x + y; },
        [](float, float, float g) { return std::pair<float, float>(g, g); });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "sub", [](float x, float y) { return x - y; },
        [](float, float, float g) { return std::pair<float, float>(g, -g); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "mul", [](float x, float y) { return x * y; },
        [](float x, float y, float g) { return std::pair<float, float>(g * y, g * x); });
}

Tensor add_scalar(const Tensor& a, float s) {
    std::vector<float> out(a.data());
    for (float& v : out) v += s;
    return make_op(
        a.shape(), std::move(out), {a},
        [](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            accumulate(*p, t.grad);
        },
        "add_scalar");
}

Tensor mul_scalar(const Tensor& a, float s) {
    std::vector<float> out(a.data());
    for (float& v : out) v *= s;
    return make_op(
        a.shape(), std::move(out), {a},
        [s](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) p->grad[i] += t.grad[i] * s;
        },
        "mul_scalar");
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require_rank(x, 2, "add_rowvec");
    require_rank(b, 1, "add_rowvec");
    std::size_t n = x.dim(0), d = x.dim(1);
    if (b.dim(0) != d) {
        throw ShapeError("add_rowvec: vector length " + std::to_string(b.dim(0)) +
                         " vs row width " + std::to_string(d));
    }
    std::vector<float> out(x.data());
    const auto& bv = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] += bv[j];
    return make_op(
        {n, d}, std::move(out), {x, b},
        [n, d](TensorNode& t) {
            TensorNode* px = t.parents[0].get();
            TensorNode* pb = t.parents[1].get();
            if (px->requires_grad) accumulate(*px, t.grad);
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += t.grad[i * d + j];
                    pb->grad[j] += static_cast<float>(acc);
                }
            }
        },
        "add_rowvec");
}

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    return make_op(
        {1}, {static_cast<float>(acc)}, {a},
        [](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            float g = t.grad[0];
            for (float& v : p->grad) v += g;
        },
        "sum_all");
}

Tensor mean_all(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    std::size_t n = a.size();
    return make_op(
        {1}, {static_cast<float>(acc / double(n))}, {a},
        [n](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            float g = t.grad[0] / static_cast<float>(n);
            for (float& v : p->grad) v += g;
        },
        "mean_all");
}

namespace {

Tensor reduce_axis(const Tensor& a, int axis, bool mean, const char* op) {
    require_rank(a, 2, op);
    if (axis != 0 && axis != 1) throw ParamError(std::string(op) + ": axis must be 0 or 1");
    std::size_t r = a.dim(0), c = a.dim(1);
    const auto& d = a.data();
    std::size_t out_len = (axis == 0) ? c : r;
    std::size_t denom = (axis == 0) ? r : c;
    std::vector<float> out(out_len);
    if (axis == 0) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < r; ++i) acc += d[i * c + j];
            out[j] = static_cast<float>(mean ? acc / double(denom) : acc);
        }
    } else {
        for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < c; ++j) acc += d[i * c + j];
            out[i] = static_cast<float>(mean ? acc / double(denom) : acc);
        }
    }
    float scale = mean ? 1.0f / static_cast<float>(denom) : 1.0f;
    return make_op(
        {out_len}, std::move(out), {a},
        [axis, r, c, scale](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    p->grad[i * c + j] += t.grad[axis == 0 ? j : i] * scale;
        },
        op);
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis) { return reduce_axis(a, axis, false, "sum_axis"); }
Tensor mean_axis(const Tensor& a, int axis) { return reduce_axis(a, axis, true, "mean_axis"); }

Tensor gelu(const Tensor& a) {
    const float inv_sqrt2 = 0.7071067811865476f;
    const auto& d = a.data();
    std::vector<float> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[i] = 0.5f * d[i] * (1.0f + std::erf(d[i] * inv_sqrt2));
    }
    return make_op(
        a.shape(), std::move(out), {a},
        [inv_sqrt2](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            const float inv_sqrt2pi = 0.3989422804014327f;
            for (std::size_t i = 0; i < t.grad.size(); ++i) {
                float x = p->data[i];
                float cdf = 0.5f * (1.0f + std::erf(x * inv_sqrt2));
                float pdf = inv_sqrt2pi * std::exp(-0.5f * x * x);
                p->grad[i] += t.grad[i] * (cdf + x * pdf);
            }
        },
        "gelu");
}

Tensor log(const Tensor& a, float floor) {
    const auto& d = a.data();
    std::vector<float> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = std::log(std::max(d[i], floor));
    return make_op(
        a.shape(), std::move(out), {a},
        [floor](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) {
                float x = p->data[i];
                if (x > floor) p->grad[i] += t.grad[i] / x;
            }
        },
        "log");
}

Tensor sqrt(const Tensor& a) {
    const auto& d = a.data();
    std::vector<float> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] < 0.0f) throw ParamError("sqrt: negative input");
        out[i] = std::sqrt(d[i]);
    }
    return make_op(
        a.shape(), std::move(out), {a},
        [](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) {
                float y = t.data[i];
                if (y > 0.0f) p->grad[i] += t.grad[i] * 0.5f / y;
            }
        },
        "sqrt");
}

Tensor softmax_temp(const Tensor& logits, float tau) {
    if (!(tau > 0.0f)) throw ParamError("softmax_temp: tau must be positive");
    if (logits.rank() < 1) throw ShapeError("softmax_temp: rank-0 input");
    std::size_t k = logits.shape().back();
    std::size_t rows = logits.size() / k;
    const auto& d = logits.data();
    std::vector<float> out(d.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* in = d.data() + r * k;
        float* o = out.data() + r * k;
        float mx = in[0];
        for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, in[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            o[i] = std::exp((in[i] - mx) / tau);
            denom += o[i];
        }
        float inv = static_cast<float>(1.0 / denom);
        for (std::size_t i = 0; i < k; ++i) o[i] *= inv;
    }
    return make_op(
        logits.shape(), std::move(out), {logits},
        [k, rows, tau](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const float* y = t.data.data() + r * k;
                const float* g = t.grad.data() + r * k;
                double dot = 0.0;
                for (std::size_t i = 0; i < k; ++i) dot += double(g[i]) * double(y[i]);
                for (std::size_t i = 0; i < k; ++i) {
                    p->grad[r * k + i] += y[i] * (g[i] - static_cast<float>(dot)) / tau;
                }
            }
        },
        "softmax_temp");
}

Tensor batch_norm_columns(const Tensor& z, float eps) {
    require_rank(z, 2, "batch_norm_columns");
    std::size_t n = z.dim(0), d = z.dim(1);
    if (n < 2) {
        throw ParamError("batch_norm_columns: needs at least 2 rows, got " + std::to_string(n));
    }
    const auto& in = z.data();
    std::vector<float> out(in.size());
    // per-column mean and population variance, then (x - mu) / sqrt(var + eps)
    std::vector<float> inv_std(d);
    std::vector<float> mean(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += in[i * d + j];
        double mu = s / double(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double c = in[i * d + j] - mu;
            v += c * c;
        }
        v /= double(n);
        mean[j] = static_cast<float>(mu);
        inv_std[j] = static_cast<float>(1.0 / std::sqrt(v + double(eps)));
        for (std::size_t i = 0; i < n; ++i) out[i * d + j] = (in[i * d + j] - mean[j]) * inv_std[j];
    }
    return make_op(
        {n, d}, std::move(out), {z},
        [n, d, inv_std](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            // dx = (g - mean(g) - xhat * mean(g*xhat)) * inv_std, per column
            for (std::size_t j = 0; j < d; ++j) {
                double gsum = 0.0, gx = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    gsum += t.grad[i * d + j];
                    gx += double(t.grad[i * d + j]) * double(t.data[i * d + j]);
                }
                float gmean = static_cast<float>(gsum / double(n));
                float gxmean = static_cast<float>(gx / double(n));
                for (std::size_t i = 0; i < n; ++i) {
                    float xhat = t.data[i * d + j];
                    p->grad[i * d + j] +=
                        (t.grad[i * d + j] - gmean - xhat * gxmean) * inv_std[j];
                }
            }
        },
        "batch_norm_columns");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    require_rank(x, 2, "layer_norm");
    require_rank(gamma, 1, "layer_norm");
    require_rank(beta, 1, "layer_norm");
    std::size_t n = x.dim(0), d = x.dim(1);
    if (gamma.dim(0) != d || beta.dim(0) != d) {
        throw ShapeError("layer_norm: scale/shift length must equal last axis " + std::to_string(d));
    }
    const auto& in = x.data();
    const auto& gw = gamma.data();
    const auto& bw = beta.data();
    std::vector<float> out(in.size());
    std::vector<float> xhat(in.size());
    std::vector<float> inv_std(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += in[i * d + j];
        double mu = s / double(d);
        double v = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double c = in[i * d + j] - mu;
            v += c * c;
        }
        v /= double(d);
        float is = static_cast<float>(1.0 / std::sqrt(v + double(eps)));
        inv_std[i] = is;
        for (std::size_t j = 0; j < d; ++j) {
            float xh = (in[i * d + j] - static_cast<float>(mu)) * is;
            xhat[i * d + j] = xh;
            out[i * d + j] = xh * gw[j] + bw[j];
        }
    }
    return make_op(
        {n, d}, std::move(out), {x, gamma, beta},
        [n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode& t) {
            TensorNode* px = t.parents[0].get();
            TensorNode* pg = t.parents[1].get();
            TensorNode* pb = t.parents[2].get();
            if (pg->requires_grad) {
                pg->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        acc += double(t.grad[i * d + j]) * double(xhat[i * d + j]);
                    pg->grad[j] += static_cast<float>(acc);
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n; ++i) acc += t.grad[i * d + j];
                    pb->grad[j] += static_cast<float>(acc);
                }
            }
            if (px->requires_grad) {
                px->ensure_grad();
                const auto& gw = pg->data;
                for (std::size_t i = 0; i < n; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        double dy = double(t.grad[i * d + j]) * double(gw[j]);
                        m1 += dy;
                        m2 += dy * double(xhat[i * d + j]);
                    }
                    m1 /= double(d);
                    m2 /= double(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        double dy = double(t.grad[i * d + j]) * double(gw[j]);
                        px->grad[i * d + j] += static_cast<float>(
                            (dy - m1 - double(xhat[i * d + j]) * m2) * double(inv_std[i]));
                    }
                }
            }
        },
        "layer_norm");
}

Tensor l2_normalize_rows(const Tensor& x, float eps) {
    require_rank(x, 2, "l2_normalize_rows");
    std::size_t n = x.dim(0), d = x.dim(1);
    const auto& in = x.data();
    std::vector<float> out(in.size());
    std::vector<float> inv_norm(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += double(in[i * d + j]) * double(in[i * d + j]);
        float inv = static_cast<float>(1.0 / std::sqrt(s + double(eps)));
        inv_norm[i] = inv;
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = in[i * d + j] * inv;
    }
    return make_op(
        {n, d}, std::move(out), {x},
        [n, d, inv_norm = std::move(inv_norm)](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j)
                    dot += double(t.grad[i * d + j]) * double(t.data[i * d + j]);
                for (std::size_t j = 0; j < d; ++j) {
                    p->grad[i * d + j] += static_cast<float>(
                        (double(t.grad[i * d + j]) - double(t.data[i * d + j]) * dot) *
                        double(inv_norm[i]));
                }
            }
        },
        "l2_normalize_rows");
}

namespace {

Tensor concat_dim(const std::vector<Tensor>& parts, int axis, const char* op) {
    if (parts.empty()) throw ParamError(std::string(op) + ": no inputs");
    for (const Tensor& t : parts) require_rank(t, 2, op);
    std::size_t other = parts[0].dim(axis == 0 ? 1 : 0);
    std::size_t total = 0;
    for (const Tensor& t : parts) {
        if (t.dim(axis == 0 ? 1 : 0) != other) {
            throw ShapeError(std::string(op) + ": mismatched shapes " +
                             shape_str(parts[0].shape()) + " vs " + shape_str(t.shape()));
        }
        total += t.dim(axis);
    }
    std::size_t rows = axis == 0 ? total : other;
    std::size_t cols = axis == 0 ? other : total;
    std::vector<float> out(rows * cols);
    std::vector<std::size_t> offsets(parts.size());
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        offsets[p] = off;
        const auto& d = parts[p].data();
        if (axis == 0) {
            std::memcpy(out.data() + off * cols, d.data(), d.size() * sizeof(float));
            off += parts[p].dim(0);
        } else {
            std::size_t w = parts[p].dim(1);
            for (std::size_t i = 0; i < rows; ++i)
                std::memcpy(out.data() + i * cols + off, d.data() + i * w, w * sizeof(float));
            off += w;
        }
    }
    return make_op(
        {rows, cols}, std::move(out), parts,
        [axis, rows, cols, offsets](TensorNode& t) {
            for (std::size_t p = 0; p < t.parents.size(); ++p) {
                TensorNode* pp = t.parents[p].get();
                if (!pp->requires_grad) continue;
                pp->ensure_grad();
                std::size_t off = offsets[p];
                if (axis == 0) {
                    std::size_t r = pp->shape[0];
                    for (std::size_t i = 0; i < r * cols; ++i)
                        pp->grad[i] += t.grad[off * cols + i];
                } else {
                    std::size_t w = pp->shape[1];
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            pp->grad[i * w + j] += t.grad[i * cols + off + j];
                }
            }
        },
        op);
}

}  // namespace

Tensor concat_rows(const std::vector<Tensor>& parts) { return concat_dim(parts, 0, "concat_rows"); }
Tensor concat_cols(const std::vector<Tensor>& parts) { return concat_dim(parts, 1, "concat_cols"); }

Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
    require_rank(a, 2, "slice_rows");
    std::size_t r = a.dim(0), c = a.dim(1);
    if (r0 >= r1 || r1 > r) throw ShapeError("slice_rows: bad range");
    std::vector<float> out(a.data().begin() + r0 * c, a.data().begin() + r1 * c);
    return make_op(
        {r1 - r0, c}, std::move(out), {a},
        [r0, c](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < t.grad.size(); ++i) p->grad[r0 * c + i] += t.grad[i];
        },
        "slice_rows");
}

Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
    require_rank(a, 2, "slice_cols");
    std::size_t r = a.dim(0), c = a.dim(1);
    if (c0 >= c1 || c1 > c) throw ShapeError("slice_cols: bad range");
    std::size_t w = c1 - c0;
    std::vector<float> out(r * w);
    const auto& d = a.data();
    for (std::size_t i = 0; i < r; ++i)
        std::memcpy(out.data() + i * w, d.data() + i * c + c0, w * sizeof(float));
    return make_op(
        {r, w}, std::move(out), {a},
        [r, c, c0, w](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    p->grad[i * c + c0 + j] += t.grad[i * w + j];
        },
        "slice_cols");
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& indices) {
    require_rank(a, 2, "gather_rows");
    std::size_t r = a.dim(0), c = a.dim(1);
    for (std::size_t i : indices) {
        if (i >= r) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range");
    }
    std::vector<float> out(indices.size() * c);
    const auto& d = a.data();
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::memcpy(out.data() + i * c, d.data() + indices[i] * c, c * sizeof(float));
    return make_op(
        {indices.size(), c}, std::move(out), {a},
        [indices, c](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < indices.size(); ++i)
                for (std::size_t j = 0; j < c; ++j)
                    p->grad[indices[i] * c + j] += t.grad[i * c + j];
        },
        "gather_rows");
}

Tensor gather_flat(const Tensor& a, Shape out_shape, std::vector<std::size_t> index_map) {
    std::size_t n = numel(out_shape);
    if (index_map.size() != n) {
        throw ShapeError("gather_flat: index map length does not match output shape");
    }
    const auto& d = a.data();
    for (std::size_t i : index_map) {
        if (i >= d.size()) throw ShapeError("gather_flat: index out of range");
    }
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = d[index_map[i]];
    return make_op(
        std::move(out_shape), std::move(out), {a},
        [map = std::move(index_map)](TensorNode& t) {
            TensorNode* p = t.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            for (std::size_t i = 0; i < map.size(); ++i) p->grad[map[i]] += t.grad[i];
        },
        "gather_flat");
}

}  // namespace sslvit

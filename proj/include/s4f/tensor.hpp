// Dense row-major f64 tensor plus the handful of kernels the fusion
// pipeline needs: affine maps, layer norm, depthwise 3x3 convolution,
// activations and the Sobel magnitude operator. No broadcasting, no
// strided views; every operation checks shapes and is a pure function
// of its inputs.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace s4f {

using Shape = std::vector<std::size_t>;

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

std::size_t shape_size(const Shape& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor full(Shape shape, double value);

    // Default-constructed tensors act as "absent" (e.g. disabled skip gains).
    bool empty() const { return shape_.empty(); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return values_.size(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator()(std::size_t i) { return values_[i]; }
    double operator()(std::size_t i) const { return values_[i]; }
    double& operator()(std::size_t i, std::size_t j) {
        return values_[i * shape_[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return values_[i * shape_[1] + j];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return values_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return values_[(i * shape_[1] + j) * shape_[2] + k];
    }

private:
    Shape shape_;
    std::vector<double> values_;
};

bool same_shape(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
void add_inplace(Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);

// FNV-1a over the raw value bytes; used by determinism tests.
std::uint64_t tensor_hash(const Tensor& a);

/// Affine map y = W x + b with W stored [out x in].
struct LinearMap {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]

    LinearMap() = default;
    LinearMap(Tensor w, Tensor b);

    static LinearMap zeros(std::size_t out, std::size_t in);

    std::size_t in() const { return weight.extent(1); }
    std::size_t out() const { return weight.extent(0); }
};

// Applies m along the trailing axis of x: [..., in] -> [..., out].
Tensor linear_apply(const LinearMap& m, const Tensor& x);

// Normalizes each trailing-axis slice with population variance, then
// scales/shifts per channel.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);

// Per-channel 2D correlation with reflect padding. x is [C,H,W],
// kernels [C,3,3]; output shape equals input shape.
Tensor depthwise_conv3x3(const Tensor& x, const Tensor& kernels);

enum class Activation { silu, softplus, softmax_lastaxis };

Tensor activation(Activation kind, const Tensor& x);

inline double silu_scalar(double v) { return v / (1.0 + std::exp(-v)); }

// Overflow-safe: e^30 already exceeds f32 range, beyond that
// softplus(x) == x to double precision.
inline double softplus_scalar(double v) {
    return v > 30.0 ? v : std::log1p(std::exp(v));
}

// |grad| via the standard 3x3 Sobel pair, reflect padding. x is [H,W],
// H,W >= 3.
Tensor sobel_magnitude(const Tensor& x);

// Mirror-without-edge-repeat index for out-of-range accesses
// (..., x[2], x[1]) | x[0] x[1] x[2] ... ; n == 1 clamps.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

// Layout helpers between [H,W,C] grids and the conv kernel's [C,H,W].
Tensor hwc_to_chw(const Tensor& grid);
Tensor chw_to_hwc(const Tensor& chw);

// Splits [..., 2C] into two [..., C] halves along the trailing axis.
std::pair<Tensor, Tensor> split_last_axis(const Tensor& x);
Tensor concat_last_axis(const Tensor& a, const Tensor& b);

}  // namespace s4f

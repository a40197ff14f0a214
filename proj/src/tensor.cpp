#include "s4f/tensor.hpp"

#include <algorithm>

namespace s4f {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    require(!shape_.empty(), "tensor: shape must have at least one extent");
    for (std::size_t e : shape_) require(e > 0, "tensor: extents must be positive");
    values_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    require(!shape_.empty(), "tensor: shape must have at least one extent");
    for (std::size_t e : shape_) require(e > 0, "tensor: extents must be positive");
    require(shape_size(shape_) == values_.size(),
            "tensor: value count does not match shape");
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), value);
    return t;
}

bool same_shape(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape();
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(same_shape(a, b), "add: shape mismatch");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require(same_shape(a, b), "sub: shape mismatch");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(same_shape(a, b), "mul: shape mismatch");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    require(same_shape(a, b), "add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require(same_shape(a, b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool all_finite(const Tensor& a) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!std::isfinite(a.data()[i])) return false;
    return true;
}

std::uint64_t tensor_hash(const Tensor& a) {
    std::uint64_t h = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(a.data());
    for (std::size_t i = 0; i < a.size() * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

LinearMap::LinearMap(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
    require(weight.rank() == 2, "linear: weight must be [out, in]");
    if (bias.empty()) bias = Tensor({weight.extent(0)});
    require(bias.rank() == 1 && bias.extent(0) == weight.extent(0),
            "linear: bias extent must match out size");
}

LinearMap LinearMap::zeros(std::size_t out, std::size_t in) {
    return LinearMap(Tensor({out, in}), Tensor({out}));
}

Tensor linear_apply(const LinearMap& m, const Tensor& x) {
    require(x.rank() >= 1, "linear_apply: input must have rank >= 1");
    const std::size_t in = m.in(), out = m.out();
    require(x.extent(x.rank() - 1) == in,
            "linear_apply: trailing extent does not match map input size");
    Shape out_shape = x.shape();
    out_shape.back() = out;
    Tensor y(out_shape);
    const std::size_t rows = x.size() / in;
    const double* w = m.weight.data();
    const double* b = m.bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * in;
        double* yr = y.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* wo = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
    require(x.rank() >= 1, "layer_norm: input must have rank >= 1");
    const std::size_t c = x.extent(x.rank() - 1);
    require(gamma.rank() == 1 && gamma.extent(0) == c, "layer_norm: gamma extent mismatch");
    require(beta.rank() == 1 && beta.extent(0) == c, "layer_norm: beta extent mismatch");
    require(eps > 0.0, "layer_norm: eps must be positive");
    Tensor y(x.shape());
    const std::size_t rows = x.size() / c;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * c;
        double* yr = y.data() + r * c;
        double mean = 0.0;
        for (std::size_t i = 0; i < c; ++i) mean += xr[i];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            const double d = xr[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < c; ++i)
            yr[i] = gamma.data()[i] * ((xr[i] - mean) * inv) + beta.data()[i];
    }
    return y;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
    if (sn == 1) return 0;
    const std::ptrdiff_t period = 2 * (sn - 1);
    std::ptrdiff_t j = i % period;
    if (j < 0) j += period;
    if (j >= sn) j = period - j;
    return static_cast<std::size_t>(j);
}

Tensor depthwise_conv3x3(const Tensor& x, const Tensor& kernels) {
    require(x.rank() == 3, "depthwise_conv3x3: input must be [C,H,W]");
    require(kernels.rank() == 3 && kernels.extent(1) == 3 && kernels.extent(2) == 3,
            "depthwise_conv3x3: kernels must be [C,3,3]");
    require(kernels.extent(0) == x.extent(0),
            "depthwise_conv3x3: channel count mismatch");
    const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
    Tensor y(x.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* k = kernels.data() + ch * 9;
        const double* xc = x.data() + ch * h * w;
        double* yc = y.data() + ch * h * w;
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                double acc = 0.0;
                for (int di = -1; di <= 1; ++di) {
                    const std::size_t ri = reflect_index(static_cast<std::ptrdiff_t>(i) + di, h);
                    for (int dj = -1; dj <= 1; ++dj) {
                        const std::size_t rj = reflect_index(static_cast<std::ptrdiff_t>(j) + dj, w);
                        acc += k[(di + 1) * 3 + (dj + 1)] * xc[ri * w + rj];
                    }
                }
                yc[i * w + j] = acc;
            }
        }
    }
    return y;
}

Tensor activation(Activation kind, const Tensor& x) {
    Tensor y(x.shape());
    switch (kind) {
    case Activation::silu:
        for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = silu_scalar(x.data()[i]);
        break;
    case Activation::softplus:
        for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = softplus_scalar(x.data()[i]);
        break;
    case Activation::softmax_lastaxis: {
        const std::size_t c = x.extent(x.rank() - 1);
        const std::size_t rows = x.size() / c;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* xr = x.data() + r * c;
            double* yr = y.data() + r * c;
            double m = xr[0];
            for (std::size_t i = 1; i < c; ++i) m = std::max(m, xr[i]);
            double sum = 0.0;
            for (std::size_t i = 0; i < c; ++i) {
                yr[i] = std::exp(xr[i] - m);
                sum += yr[i];
            }
            for (std::size_t i = 0; i < c; ++i) yr[i] /= sum;
        }
        break;
    }
    }
    return y;
}

Tensor sobel_magnitude(const Tensor& x) {
    require(x.rank() == 2, "sobel_magnitude: input must be [H,W]");
    const std::size_t h = x.extent(0), w = x.extent(1);
    require(h >= 3 && w >= 3, "sobel_magnitude: image must be at least 3x3");
    static const double gx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static const double gy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Tensor y(x.shape());
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            double ax = 0.0, ay = 0.0;
            for (int di = -1; di <= 1; ++di) {
                const std::size_t ri = reflect_index(static_cast<std::ptrdiff_t>(i) + di, h);
                for (int dj = -1; dj <= 1; ++dj) {
                    const std::size_t rj = reflect_index(static_cast<std::ptrdiff_t>(j) + dj, w);
                    const double v = x(ri, rj);
                    ax += gx[(di + 1) * 3 + (dj + 1)] * v;
                    ay += gy[(di + 1) * 3 + (dj + 1)] * v;
                }
            }
            y(i, j) = std::sqrt(ax * ax + ay * ay);
        }
    }
    return y;
}

Tensor hwc_to_chw(const Tensor& grid) {
    require(grid.rank() == 3, "hwc_to_chw: input must be [H,W,C]");
    const std::size_t h = grid.extent(0), w = grid.extent(1), c = grid.extent(2);
    Tensor out({c, h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t ch = 0; ch < c; ++ch)
                out(ch, i, j) = grid(i, j, ch);
    return out;
}

Tensor chw_to_hwc(const Tensor& chw) {
    require(chw.rank() == 3, "chw_to_hwc: input must be [C,H,W]");
    const std::size_t c = chw.extent(0), h = chw.extent(1), w = chw.extent(2);
    Tensor out({h, w, c});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                out(i, j, ch) = chw(ch, i, j);
    return out;
}

std::pair<Tensor, Tensor> split_last_axis(const Tensor& x) {
    const std::size_t c2 = x.extent(x.rank() - 1);
    require(c2 % 2 == 0, "split_last_axis: trailing extent must be even");
    const std::size_t c = c2 / 2;
    Shape half = x.shape();
    half.back() = c;
    Tensor a(half), b(half);
    const std::size_t rows = x.size() / c2;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * c2;
        std::copy(xr, xr + c, a.data() + r * c);
        std::copy(xr + c, xr + c2, b.data() + r * c);
    }
    return {std::move(a), std::move(b)};
}

Tensor concat_last_axis(const Tensor& a, const Tensor& b) {
    require(a.rank() == b.rank(), "concat_last_axis: rank mismatch");
    for (std::size_t i = 0; i + 1 < a.rank(); ++i)
        require(a.extent(i) == b.extent(i), "concat_last_axis: leading extent mismatch");
    const std::size_t ca = a.extent(a.rank() - 1), cb = b.extent(b.rank() - 1);
    Shape out_shape = a.shape();
    out_shape.back() = ca + cb;
    Tensor out(out_shape);
    const std::size_t rows = a.size() / ca;
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(a.data() + r * ca, a.data() + (r + 1) * ca, out.data() + r * (ca + cb));
        std::copy(b.data() + r * cb, b.data() + (r + 1) * cb, out.data() + r * (ca + cb) + ca);
    }
    return out;
}

}  // namespace s4f

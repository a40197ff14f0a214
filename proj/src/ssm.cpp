#include "s4f/ssm.hpp"

#include <cmath>

#include "s4f/scan_kernel.hpp"

namespace s4f {

namespace {

void check_scan_shapes(const Tensor& a_bar, const Tensor& b_bar,
                       const Tensor& c_seq, const Tensor& x,
                       const Tensor& d_skip) {
    require(a_bar.rank() == 3, "scan: a_bar must be [L,C,H]");
    require(same_shape(a_bar, b_bar), "scan: a_bar/b_bar shape mismatch");
    const std::size_t len = a_bar.extent(0);
    const std::size_t channels = a_bar.extent(1);
    const std::size_t hidden = a_bar.extent(2);
    require(len >= 1, "scan: sequence must be non-empty");
    require(c_seq.rank() == 2 && c_seq.extent(0) == len && c_seq.extent(1) == hidden,
            "scan: c_seq must be [L,H]");
    require(x.rank() == 2 && x.extent(0) == len && x.extent(1) == channels,
            "scan: x must be [L,C]");
    if (!d_skip.empty())
        require(d_skip.rank() == 1 && d_skip.extent(0) == channels,
                "scan: d_skip must be [C]");
}

}  // namespace

Tensor ssm_state_matrix(const Tensor& a_log) {
    Tensor a(a_log.shape());
    for (std::size_t i = 0; i < a_log.size(); ++i)
        a.data()[i] = -std::exp(a_log.data()[i]);
    return a;
}

DiscreteStep discretize(const Tensor& delta, const Tensor& a, const Tensor& b,
                        DiscretizeMode mode) {
    require(delta.rank() == 2, "discretize: delta must be [L,C]");
    require(a.rank() == 2, "discretize: a must be [C,H]");
    require(b.rank() == 2, "discretize: b must be [L,H]");
    const std::size_t len = delta.extent(0);
    const std::size_t channels = delta.extent(1);
    const std::size_t hidden = a.extent(1);
    require(a.extent(0) == channels, "discretize: a channel extent mismatch");
    require(b.extent(0) == len, "discretize: b length mismatch");
    require(b.extent(1) == hidden, "discretize: b hidden extent mismatch");
    for (std::size_t i = 0; i < delta.size(); ++i)
        if (delta.data()[i] < 0.0)
            throw std::domain_error("discretize: delta must be nonnegative");

    DiscreteStep out{Tensor({len, channels, hidden}), Tensor({len, channels, hidden})};
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            const double dt = delta(t, c);
            const double* ac = a.data() + c * hidden;
            double* ab = out.a_bar.data() + (t * channels + c) * hidden;
            double* bb = out.b_bar.data() + (t * channels + c) * hidden;
            for (std::size_t h = 0; h < hidden; ++h) {
                const double z = dt * ac[h];
                ab[h] = std::exp(z);
                const double db = dt * b(t, h);
                if (mode == DiscretizeMode::euler) {
                    bb[h] = db;
                } else {
                    const double phi =
                        std::abs(z) < 1e-6 ? 1.0 + 0.5 * z : std::expm1(z) / z;
                    bb[h] = phi * db;
                }
            }
        }
    }
    return out;
}

Tensor selective_scan_ref(const Tensor& a_bar, const Tensor& b_bar,
                          const Tensor& c_seq, const Tensor& x,
                          const Tensor& d_skip) {
    check_scan_shapes(a_bar, b_bar, c_seq, x, d_skip);
    Tensor y(x.shape());
    detail::scan_reference(a_bar.data(), b_bar.data(), c_seq.data(), x.data(),
                           d_skip.empty() ? nullptr : d_skip.data(),
                           a_bar.extent(0), a_bar.extent(1), a_bar.extent(2),
                           y.data());
    return y;
}

Tensor selective_scan_chunked(const Tensor& a_bar, const Tensor& b_bar,
                              const Tensor& c_seq, const Tensor& x,
                              const Tensor& d_skip, std::size_t chunk) {
    check_scan_shapes(a_bar, b_bar, c_seq, x, d_skip);
    require(chunk >= 1, "scan: chunk must be >= 1");
    Tensor y(x.shape());
    detail::scan_chunked(a_bar.data(), b_bar.data(), c_seq.data(), x.data(),
                         d_skip.empty() ? nullptr : d_skip.data(),
                         a_bar.extent(0), a_bar.extent(1), a_bar.extent(2),
                         chunk, y.data());
    return y;
}

ScanGradients selective_scan_backward(const Tensor& a_bar, const Tensor& b_bar,
                                      const Tensor& c_seq, const Tensor& x,
                                      const Tensor& d_skip, const Tensor& dy) {
    check_scan_shapes(a_bar, b_bar, c_seq, x, d_skip);
    require(same_shape(dy, x), "scan backward: dy must match y shape");
    const std::size_t len = a_bar.extent(0);
    const std::size_t channels = a_bar.extent(1);
    const std::size_t hidden = a_bar.extent(2);
    const bool has_d = !d_skip.empty();

    // Forward pass storing the full state history for the reverse sweep.
    Tensor hist({len, channels, hidden});
    {
        std::vector<double> state(channels * hidden, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
            for (std::size_t c = 0; c < channels; ++c) {
                const double xtc = x(t, c);
                double* hc = state.data() + c * hidden;
                const double* ac = a_bar.data() + (t * channels + c) * hidden;
                const double* bc = b_bar.data() + (t * channels + c) * hidden;
                double* out = hist.data() + (t * channels + c) * hidden;
                for (std::size_t h = 0; h < hidden; ++h) {
                    hc[h] = (ac[h] * hc[h]) + (bc[h] * xtc);
                    out[h] = hc[h];
                }
            }
        }
    }

    ScanGradients g;
    g.a_bar = Tensor({len, channels, hidden});
    g.b_bar = Tensor({len, channels, hidden});
    g.c_seq = Tensor({len, hidden});
    g.x = Tensor({len, channels});
    if (has_d) g.d_skip = Tensor({channels});

    std::vector<double> adj(channels * hidden, 0.0);
    for (std::size_t t = len; t-- > 0;) {
        const double* ct = c_seq.data() + t * hidden;
        for (std::size_t c = 0; c < channels; ++c) {
            const double dytc = dy(t, c);
            const double xtc = x(t, c);
            double* gc = adj.data() + c * hidden;
            const double* ac = a_bar.data() + (t * channels + c) * hidden;
            const double* bc = b_bar.data() + (t * channels + c) * hidden;
            const double* ht = hist.data() + (t * channels + c) * hidden;
            const double* hprev =
                t > 0 ? hist.data() + ((t - 1) * channels + c) * hidden : nullptr;
            double* ga = g.a_bar.data() + (t * channels + c) * hidden;
            double* gb = g.b_bar.data() + (t * channels + c) * hidden;
            double* gcs = g.c_seq.data() + t * hidden;
            double dx = has_d ? d_skip(c) * dytc : 0.0;
            for (std::size_t h = 0; h < hidden; ++h) {
                gc[h] += dytc * ct[h];
                gcs[h] += dytc * ht[h];
                ga[h] = gc[h] * (hprev ? hprev[h] : 0.0);
                gb[h] = gc[h] * xtc;
                dx += gc[h] * bc[h];
                gc[h] *= ac[h];
            }
            g.x(t, c) = dx;
            if (has_d) g.d_skip(c) += xtc * dytc;
        }
    }
    return g;
}

}  // namespace s4f

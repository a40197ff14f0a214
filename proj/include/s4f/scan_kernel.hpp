// Raw selective-scan kernels over contiguous buffers, templated on the
// scalar type so the benchmark can run in f32 as well as the f64 used
// everywhere else.
//
// Layouts: a_bar/b_bar [L][C][H], c_seq [L][H], x [L][C], y [L][C],
// d (skip gains) [C] or nullptr. The recurrence per (c,h) lane is
//   h_t = a_t * h_{t-1} + b_t * x_t,   y_{t,c} = <c_t, h_t> + d_c x_{t,c}
// and both kernels keep the update written as (a*h) + (b*x) so that the
// chunk-size-1 blocked scan is bit-identical to the reference.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace s4f::detail {

template <typename T>
void scan_reference(const T* a_bar, const T* b_bar, const T* c_seq, const T* x,
                    const T* d, std::size_t len, std::size_t channels,
                    std::size_t hidden, T* y) {
    std::vector<T> state(channels * hidden, T(0));
    for (std::size_t t = 0; t < len; ++t) {
        const T* at = a_bar + t * channels * hidden;
        const T* bt = b_bar + t * channels * hidden;
        const T* ct = c_seq + t * hidden;
        for (std::size_t c = 0; c < channels; ++c) {
            const T xtc = x[t * channels + c];
            T* hc = state.data() + c * hidden;
            const T* ac = at + c * hidden;
            const T* bc = bt + c * hidden;
            T acc = T(0);
            for (std::size_t h = 0; h < hidden; ++h) {
                hc[h] = (ac[h] * hc[h]) + (bc[h] * xtc);
                acc += ct[h] * hc[h];
            }
            if (d) acc += d[c] * xtc;
            y[t * channels + c] = acc;
        }
    }
}

// Blocked variant: each fixed-size chunk runs locally from a zero state
// while carrying a (decay-product, local-state) pair per lane, so the true
// state is p * carry + local. Within floating-point reassociation this is
// the reference recurrence; chunk == 1 reproduces it bit-exactly.
template <typename T>
void scan_chunked(const T* a_bar, const T* b_bar, const T* c_seq, const T* x,
                  const T* d, std::size_t len, std::size_t channels,
                  std::size_t hidden, std::size_t chunk, T* y) {
    const std::size_t lanes = channels * hidden;
    std::vector<T> carry(lanes, T(0));
    std::vector<T> decay(lanes), local(lanes);
    for (std::size_t t0 = 0; t0 < len; t0 += chunk) {
        const std::size_t t1 = (t0 + chunk < len) ? t0 + chunk : len;
        for (std::size_t l = 0; l < lanes; ++l) {
            decay[l] = T(1);
            local[l] = T(0);
        }
        for (std::size_t t = t0; t < t1; ++t) {
            const T* at = a_bar + t * lanes;
            const T* bt = b_bar + t * lanes;
            const T* ct = c_seq + t * hidden;
            for (std::size_t c = 0; c < channels; ++c) {
                const T xtc = x[t * channels + c];
                T* pc = decay.data() + c * hidden;
                T* lc = local.data() + c * hidden;
                const T* cr = carry.data() + c * hidden;
                const T* ac = at + c * hidden;
                const T* bc = bt + c * hidden;
                T acc = T(0);
                for (std::size_t h = 0; h < hidden; ++h) {
                    lc[h] = (ac[h] * lc[h]) + (bc[h] * xtc);
                    pc[h] = pc[h] * ac[h];
                    const T ht = (pc[h] * cr[h]) + lc[h];
                    acc += ct[h] * ht;
                }
                if (d) acc += d[c] * xtc;
                y[t * channels + c] = acc;
            }
        }
        for (std::size_t l = 0; l < lanes; ++l)
            carry[l] = (decay[l] * carry[l]) + local[l];
    }
}

// Benchmark kernel: Euler discretization fused into the chunked scan so
// the per-element cost is compute-dominated and independent of whether
// the sequence fits in cache. Inputs are the raw selective parameters:
// delta [L][C], a [C][H], b_proj [L][H], c_seq [L][H], x [L][C].
template <typename T>
void scan_fused_bench(const T* delta, const T* a, const T* b_proj,
                      const T* c_seq, const T* x, const T* d, std::size_t len,
                      std::size_t channels, std::size_t hidden,
                      std::size_t chunk, T* y) {
    const std::size_t lanes = channels * hidden;
    std::vector<T> carry(lanes, T(0));
    std::vector<T> decay(lanes), local(lanes);
    for (std::size_t t0 = 0; t0 < len; t0 += chunk) {
        const std::size_t t1 = (t0 + chunk < len) ? t0 + chunk : len;
        for (std::size_t l = 0; l < lanes; ++l) {
            decay[l] = T(1);
            local[l] = T(0);
        }
        for (std::size_t t = t0; t < t1; ++t) {
            const T* bt = b_proj + t * hidden;
            const T* ct = c_seq + t * hidden;
            for (std::size_t c = 0; c < channels; ++c) {
                const T dt = delta[t * channels + c];
                const T xtc = x[t * channels + c];
                T* pc = decay.data() + c * hidden;
                T* lc = local.data() + c * hidden;
                const T* cr = carry.data() + c * hidden;
                const T* ac = a + c * hidden;
                T acc = T(0);
                for (std::size_t h = 0; h < hidden; ++h) {
                    const T ab = std::exp(dt * ac[h]);
                    const T bb = dt * bt[h];
                    lc[h] = (ab * lc[h]) + (bb * xtc);
                    pc[h] = pc[h] * ab;
                    const T ht = (pc[h] * cr[h]) + lc[h];
                    acc += ct[h] * ht;
                }
                if (d) acc += d[c] * xtc;
                y[t * channels + c] = acc;
            }
        }
        for (std::size_t l = 0; l < lanes; ++l)
            carry[l] = (decay[l] * carry[l]) + local[l];
    }
}

}  // namespace s4f::detail

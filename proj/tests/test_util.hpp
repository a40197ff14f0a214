// Shared helpers for the unit tests: seeded random parameter builders.
#pragma once

#include "s4f/cmsa.hpp"
#include "s4f/rng.hpp"
#include "s4f/ssm.hpp"
#include "s4f/tensor.hpp"

namespace s4f::test {

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.symmetric(scale);
    return t;
}

inline LinearMap random_linear(Rng& rng, std::size_t out, std::size_t in,
                               double scale = 0.5) {
    return LinearMap(random_tensor(rng, {out, in}, scale),
                     random_tensor(rng, {out}, scale));
}

inline LayerNormParams random_norm(Rng& rng, std::size_t c) {
    LayerNormParams n{Tensor({c}), Tensor({c})};
    for (std::size_t i = 0; i < c; ++i) {
        n.gamma(i) = rng.uniform(0.5, 1.5);
        n.beta(i) = rng.symmetric(0.3);
    }
    return n;
}

inline Tensor random_a_log(Rng& rng, std::size_t c, std::size_t hidden) {
    Tensor a({c, hidden});
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-2.0, 0.5);
    return a;
}

inline SsmProjections random_proj(Rng& rng, std::size_t c, std::size_t hidden) {
    return {random_linear(rng, hidden, c), random_linear(rng, hidden, c),
            random_linear(rng, c, c)};
}

inline SsmSingleParams random_single_params(Rng& rng, std::size_t c,
                                            std::size_t hidden,
                                            bool with_skip = true) {
    SsmSingleParams p;
    p.a_log = random_a_log(rng, c, hidden);
    p.proj = random_proj(rng, c, hidden);
    p.delta_bias = random_tensor(rng, {c}, 0.5);
    if (with_skip) p.d_skip = random_tensor(rng, {c}, 1.0);
    return p;
}

inline SsmParams random_pair_params(Rng& rng, std::size_t c, std::size_t hidden,
                                    bool with_skip = true) {
    SsmParams p;
    p.a_log = random_a_log(rng, c, hidden);
    p.ir = random_proj(rng, c, hidden);
    p.vi = random_proj(rng, c, hidden);
    p.delta_bias = random_tensor(rng, {c}, 0.5);
    if (with_skip) p.d_skip = random_tensor(rng, {c}, 1.0);
    return p;
}

}  // namespace s4f::test

#include <doctest.h>

#include <cmath>
#include <cstring>

#include "s4f/cmsa.hpp"
#include "test_util.hpp"

using namespace s4f;

namespace {

CmsaBlockParams random_block(Rng& rng, std::size_t c, std::size_t hidden,
                             bool zero_proj_out) {
    CmsaBlockParams p;
    p.norm_in_ir = test::random_norm(rng, c);
    p.norm_in_vi = test::random_norm(rng, c);
    p.proj_in_ir = test::random_linear(rng, 2 * c, c);
    p.proj_in_vi = test::random_linear(rng, 2 * c, c);
    p.dw_kernels = test::random_tensor(rng, {c, 3, 3}, 0.4);
    p.mark = test::random_linear(rng, c, 2 * c);
    for (std::size_t d = 0; d < 4; ++d) p.ssm[d] = test::random_pair_params(rng, c, hidden);
    p.norm_out_ir = test::random_norm(rng, c);
    p.norm_out_vi = test::random_norm(rng, c);
    if (zero_proj_out) {
        p.proj_out_ir = LinearMap::zeros(c, c);
        p.proj_out_vi = LinearMap::zeros(c, c);
    } else {
        p.proj_out_ir = test::random_linear(rng, c, c);
        p.proj_out_vi = test::random_linear(rng, c, c);
    }
    return p;
}

CmsaBlockParams swapped_block(const CmsaBlockParams& blk) {
    CmsaBlockParams s = blk;
    std::swap(s.norm_in_ir, s.norm_in_vi);
    std::swap(s.proj_in_ir, s.proj_in_vi);
    const std::size_t out = s.mark.out(), in = s.mark.in(), half = in / 2;
    Tensor w({out, in});
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i)
            w(o, i) = s.mark.weight(o, i < half ? i + half : i - half);
    s.mark.weight = w;
    for (SsmParams& ssm : s.ssm) std::swap(ssm.ir, ssm.vi);
    std::swap(s.norm_out_ir, s.norm_out_vi);
    std::swap(s.proj_out_ir, s.proj_out_vi);
    return s;
}

}  // namespace

TEST_CASE("patch_mark closed forms") {
    SUBCASE("zero weight broadcasts the bias") {
        const Tensor p_ir({2, 2, 1}, {1, 2, 3, 4});
        const Tensor p_vi({2, 2, 1}, {5, 6, 7, 8});
        LinearMap mark(Tensor({1, 2}), Tensor({1}, {0.25}));
        auto [m_ir, m_vi, m] = patch_mark(p_ir, p_vi, mark);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(m.data()[i] == 0.25);
            CHECK(m_ir.data()[i] == p_ir.data()[i] + 0.25);
            CHECK(m_vi.data()[i] == p_vi.data()[i] + 0.25);
        }
    }
    SUBCASE("hand product on a single cell") {
        const Tensor p_ir({1, 1, 1}, {1.0});
        const Tensor p_vi({1, 1, 1}, {3.0});
        LinearMap mark(Tensor({1, 2}, {0.5, 0.5}), Tensor({1}));
        auto [m_ir, m_vi, m] = patch_mark(p_ir, p_vi, mark);
        CHECK(m(0, 0, 0) == 2.0);
        CHECK(m_ir(0, 0, 0) == 3.0);
        CHECK(m_vi(0, 0, 0) == 5.0);
    }
    SUBCASE("both modalities receive the identical mark") {
        Rng rng(73);
        const Tensor p_ir = test::random_tensor(rng, {3, 4, 2});
        const Tensor p_vi = test::random_tensor(rng, {3, 4, 2});
        LinearMap mark = test::random_linear(rng, 2, 4);
        auto [m_ir, m_vi, m] = patch_mark(p_ir, p_vi, mark);
        // the same mark tensor is added to both inputs
        CHECK(max_abs_diff(sub(m_ir, p_ir), m) <= 1e-15);
        CHECK(max_abs_diff(sub(m_vi, p_vi), m) <= 1e-15);
        CHECK(max_abs_diff(m_ir, add(p_ir, m)) == 0.0);
        CHECK(max_abs_diff(m_vi, add(p_vi, m)) == 0.0);
    }
}

TEST_CASE("interleave_params applies per-modality maps by parity") {
    Rng rng(79);
    SUBCASE("identity on even rows, zero map on odd rows") {
        LinearMap id(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}));
        LinearMap zero = LinearMap::zeros(2, 2);
        const Tensor x = test::random_tensor(rng, {6, 2});
        const Tensor y = interleave_params(id, zero, x);
        for (std::size_t r = 0; r < 6; ++r)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(y(r, c) == (r % 2 == 0 ? x(r, c) : 0.0));
    }
    SUBCASE("tied maps reduce to a plain linear application") {
        LinearMap m = test::random_linear(rng, 3, 2);
        const Tensor x = test::random_tensor(rng, {8, 2});
        CHECK(max_abs_diff(interleave_params(m, m, x), linear_apply(m, x)) == 0.0);
    }
    SUBCASE("scaling maps on a single pair") {
        LinearMap two(Tensor({1, 1}, {2.0}), Tensor({1}));
        LinearMap three(Tensor({1, 1}, {3.0}), Tensor({1}));
        const Tensor x({2, 1}, {5.0, 7.0});
        const Tensor y = interleave_params(two, three, x);
        CHECK(y(0, 0) == 10.0);
        CHECK(y(1, 0) == 21.0);
    }
    SUBCASE("odd length is rejected") {
        LinearMap m = LinearMap::zeros(1, 1);
        CHECK_THROWS_AS(interleave_params(m, m, Tensor({3, 1})), std::invalid_argument);
    }
}

TEST_CASE("cross_ss2d reductions and oracle") {
    Rng rng(83);
    SUBCASE("tied modality parameters equal a plain selective scan") {
        SsmParams p = test::random_pair_params(rng, 3, 4);
        p.vi = p.ir;
        const Tensor phi = test::random_tensor(rng, {10, 3});
        const Tensor got = cross_ss2d(phi, p, DiscretizeMode::euler);

        const Tensor b = linear_apply(p.ir.to_b, phi);
        const Tensor cs = linear_apply(p.ir.to_c, phi);
        Tensor delta = linear_apply(p.ir.to_delta, phi);
        for (std::size_t r = 0; r < 10; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                delta(r, c) = softplus_scalar(delta(r, c) + p.delta_bias(c));
        const DiscreteStep step =
            discretize(delta, ssm_state_matrix(p.a_log), b, DiscretizeMode::euler);
        const Tensor want = selective_scan_ref(step.a_bar, step.b_bar, cs, phi, p.d_skip);
        CHECK(max_abs_diff(got, want) == 0.0);
    }
    SUBCASE("zero C projections and zero skip give zero output") {
        SsmParams p = test::random_pair_params(rng, 2, 3);
        p.ir.to_c = LinearMap::zeros(3, 2);
        p.vi.to_c = LinearMap::zeros(3, 2);
        p.d_skip = Tensor({2});
        const Tensor phi = test::random_tensor(rng, {8, 2});
        CHECK(max_abs_diff(cross_ss2d(phi, p, DiscretizeMode::euler), Tensor({8, 2})) == 0.0);
    }
    SUBCASE("matches a hand-rolled sequential recurrence") {
        const std::size_t rows = 8, channels = 2, hidden = 3;
        SsmParams p = test::random_pair_params(rng, channels, hidden);
        const Tensor phi = test::random_tensor(rng, {rows, channels});
        const Tensor got = cross_ss2d(phi, p, DiscretizeMode::euler);

        std::vector<double> state(channels * hidden, 0.0);
        for (std::size_t t = 0; t < rows; ++t) {
            const SsmProjections& proj = t % 2 == 0 ? p.ir : p.vi;
            std::vector<double> b(hidden), cs(hidden), dt(channels);
            for (std::size_t h = 0; h < hidden; ++h) {
                double accb = proj.to_b.bias(h), accc = proj.to_c.bias(h);
                for (std::size_t c = 0; c < channels; ++c) {
                    accb += proj.to_b.weight(h, c) * phi(t, c);
                    accc += proj.to_c.weight(h, c) * phi(t, c);
                }
                b[h] = accb;
                cs[h] = accc;
            }
            for (std::size_t c = 0; c < channels; ++c) {
                double acc = proj.to_delta.bias(c) + p.delta_bias(c);
                for (std::size_t c2 = 0; c2 < channels; ++c2)
                    acc += proj.to_delta.weight(c, c2) * phi(t, c2);
                dt[c] = std::log1p(std::exp(acc));
            }
            for (std::size_t c = 0; c < channels; ++c) {
                double y = p.d_skip(c) * phi(t, c);
                for (std::size_t h = 0; h < hidden; ++h) {
                    const double a = -std::exp(p.a_log(c, h));
                    const double a_bar = std::exp(dt[c] * a);
                    const double b_bar = dt[c] * b[h];
                    state[c * hidden + h] =
                        a_bar * state[c * hidden + h] + b_bar * phi(t, c);
                    y += cs[h] * state[c * hidden + h];
                }
                CHECK(got(t, c) == doctest::Approx(y).epsilon(1e-12));
            }
        }
    }
    SUBCASE("causal along the interleaved order") {
        SsmParams p = test::random_pair_params(rng, 2, 3);
        const Tensor phi = test::random_tensor(rng, {12, 2});
        const Tensor base = cross_ss2d(phi, p, DiscretizeMode::euler);
        Tensor bumped = phi;
        bumped(9, 0) += 1.0;
        const Tensor out = cross_ss2d(bumped, p, DiscretizeMode::euler);
        CHECK(std::memcmp(base.data(), out.data(), 9 * 2 * sizeof(double)) == 0);
    }
}

TEST_CASE("cmsa_block residual identity and shape contract") {
    Rng rng(89);
    const std::size_t c = 8;
    CmsaBlockParams blk = random_block(rng, c, 4, /*zero_proj_out=*/true);
    const ModalPair pair{test::random_tensor(rng, {6, 6, c}),
                         test::random_tensor(rng, {6, 6, c})};
    const ModalPair out = cmsa_block(pair, blk, DiscretizeMode::euler);
    CHECK(max_abs_diff(out.ir, pair.ir) == 0.0);
    CHECK(max_abs_diff(out.vi, pair.vi) == 0.0);

    CmsaBlockParams live = random_block(rng, c, 4, /*zero_proj_out=*/false);
    const ModalPair out2 = cmsa_block(pair, live, DiscretizeMode::euler);
    CHECK(out2.ir.shape() == pair.ir.shape());
    CHECK(out2.vi.shape() == pair.vi.shape());
    CHECK(all_finite(out2.ir));
    CHECK(all_finite(out2.vi));
    CHECK(max_abs_diff(out2.ir, pair.ir) > 0.0);
}

TEST_CASE("cmsa_block modality swap with the designed initialization") {
    // Holds exactly for zero output projections (the designed init);
    // the interleaved scan breaks it for general weights.
    Rng rng(97);
    const std::size_t c = 4;
    CmsaBlockParams blk = random_block(rng, c, 3, /*zero_proj_out=*/true);
    const ModalPair pair{test::random_tensor(rng, {4, 5, c}),
                         test::random_tensor(rng, {4, 5, c})};
    const ModalPair a = cmsa_block(pair, blk, DiscretizeMode::euler);
    const ModalPair b = cmsa_block({pair.vi, pair.ir}, swapped_block(blk),
                                   DiscretizeMode::euler);
    CHECK(max_abs_diff(a.ir, b.vi) == 0.0);
    CHECK(max_abs_diff(a.vi, b.ir) == 0.0);
}

TEST_CASE("cmsa_stack composition") {
    Rng rng(101);
    const std::size_t c = 4;
    const ModalPair pair{test::random_tensor(rng, {3, 4, c}),
                         test::random_tensor(rng, {3, 4, c})};
    SUBCASE("residual-degenerate blocks reduce to I + V") {
        std::vector<CmsaBlockParams> blocks;
        for (int k = 0; k < 3; ++k) blocks.push_back(random_block(rng, c, 3, true));
        CHECK(max_abs_diff(cmsa_stack(pair, blocks, DiscretizeMode::euler),
                           add(pair.ir, pair.vi)) == 0.0);
    }
    SUBCASE("K=1 equals one block then sum") {
        std::vector<CmsaBlockParams> blocks{random_block(rng, c, 3, false)};
        const ModalPair one = cmsa_block(pair, blocks[0], DiscretizeMode::euler);
        CHECK(max_abs_diff(cmsa_stack(pair, blocks, DiscretizeMode::euler),
                           add(one.ir, one.vi)) == 0.0);
    }
    SUBCASE("swap equivariance of the stack under the designed init") {
        std::vector<CmsaBlockParams> blocks, swapped;
        for (int k = 0; k < 2; ++k) {
            blocks.push_back(random_block(rng, c, 3, true));
            swapped.push_back(swapped_block(blocks.back()));
        }
        const Tensor r1 = cmsa_stack(pair, blocks, DiscretizeMode::euler);
        const Tensor r2 = cmsa_stack({pair.vi, pair.ir}, swapped, DiscretizeMode::euler);
        CHECK(max_abs_diff(r1, r2) <= 1e-12);
    }
    SUBCASE("zero inputs and zero biases give zero output") {
        std::vector<CmsaBlockParams> blocks{random_block(rng, c, 3, false)};
        CmsaBlockParams& blk = blocks[0];
        for (Tensor* b : {&blk.proj_in_ir.bias, &blk.proj_in_vi.bias, &blk.mark.bias,
                          &blk.proj_out_ir.bias, &blk.proj_out_vi.bias})
            *b = Tensor(b->shape());
        for (LayerNormParams* n : {&blk.norm_in_ir, &blk.norm_in_vi, &blk.norm_out_ir,
                                   &blk.norm_out_vi})
            n->beta = Tensor({c});
        const ModalPair zero{Tensor({3, 4, c}), Tensor({3, 4, c})};
        CHECK(max_abs_diff(cmsa_stack(zero, blocks, DiscretizeMode::euler),
                           Tensor({3, 4, c})) == 0.0);
    }
}

TEST_CASE("delta probe reports forced constant time steps") {
    Rng rng(103);
    const std::size_t c = 3;
    SsmParams p = test::random_pair_params(rng, c, 2);
    const double bias = 0.75;
    p.ir.to_delta = LinearMap::zeros(c, c);
    p.vi.to_delta = LinearMap::zeros(c, c);
    p.delta_bias = Tensor::full({c}, bias);
    const Tensor phi = test::random_tensor(rng, {10, c});
    DeltaAccumulator probe;
    cross_ss2d(phi, p, DiscretizeMode::euler, &probe);
    CHECK(probe.pre_ir_mean() == doctest::Approx(bias).epsilon(1e-12));
    CHECK(probe.pre_vi_mean() == doctest::Approx(bias).epsilon(1e-12));
    CHECK(probe.post_ir_mean() ==
          doctest::Approx(softplus_scalar(bias)).epsilon(1e-12));
    CHECK(probe.post_vi_mean() ==
          doctest::Approx(softplus_scalar(bias)).epsilon(1e-12));
    CHECK(probe.count_ir == 5 * c);
    CHECK(probe.count_vi == 5 * c);
}

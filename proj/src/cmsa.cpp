#include "s4f/cmsa.hpp"

namespace s4f {

std::tuple<Tensor, Tensor, Tensor> patch_mark(const Tensor& p_ir,
                                              const Tensor& p_vi,
                                              const LinearMap& mark) {
    require(same_shape(p_ir, p_vi), "patch_mark: modality shape mismatch");
    require(p_ir.rank() == 3, "patch_mark: inputs must be [H,W,C]");
    const std::size_t c = p_ir.extent(2);
    require(mark.in() == 2 * c, "patch_mark: mark input extent must be 2C");
    Tensor m = linear_apply(mark, concat_last_axis(p_ir, p_vi));
    return {add(p_ir, m), add(p_vi, m), std::move(m)};
}

Tensor interleave_params(const LinearMap& s_ir, const LinearMap& s_vi,
                         const Tensor& x) {
    require(x.rank() == 2, "interleave_params: input must be [2L,C]");
    require(x.extent(0) % 2 == 0, "interleave_params: length must be even");
    require(s_ir.in() == x.extent(1) && s_vi.in() == x.extent(1),
            "interleave_params: map input extent mismatch");
    require(s_ir.out() == s_vi.out(),
            "interleave_params: maps must share output extent");
    const std::size_t rows = x.extent(0), in = x.extent(1), out = s_ir.out();
    Tensor y({rows, out});
    for (std::size_t r = 0; r < rows; ++r) {
        const LinearMap& m = (r % 2 == 0) ? s_ir : s_vi;
        const double* xr = x.data() + r * in;
        double* yr = y.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            double acc = m.bias(o);
            const double* wo = m.weight.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

Tensor cross_ss2d(const Tensor& phi, const SsmParams& params,
                  DiscretizeMode mode, DeltaAccumulator* probe) {
    require(phi.rank() == 2, "cross_ss2d: input must be [2L,C]");
    require(phi.extent(0) % 2 == 0, "cross_ss2d: length must be even");
    const std::size_t rows = phi.extent(0), c = phi.extent(1);
    require(params.a_log.rank() == 2 && params.a_log.extent(0) == c,
            "cross_ss2d: a_log must be [C,H]");
    require(params.ir.to_delta.out() == c && params.vi.to_delta.out() == c,
            "cross_ss2d: delta projections must map C -> C");
    require(params.delta_bias.rank() == 1 && params.delta_bias.extent(0) == c,
            "cross_ss2d: delta_bias must be [C]");

    const Tensor b = interleave_params(params.ir.to_b, params.vi.to_b, phi);
    const Tensor cs = interleave_params(params.ir.to_c, params.vi.to_c, phi);
    Tensor delta = interleave_params(params.ir.to_delta, params.vi.to_delta, phi);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double pre = delta(r, ch) + params.delta_bias(ch);
            const double post = softplus_scalar(pre);
            if (probe) {
                if (r % 2 == 0) {
                    probe->pre_ir += pre;
                    probe->post_ir += post;
                    ++probe->count_ir;
                } else {
                    probe->pre_vi += pre;
                    probe->post_vi += post;
                    ++probe->count_vi;
                }
            }
            delta(r, ch) = post;
        }
    }

    DiscreteStep step = discretize(delta, ssm_state_matrix(params.a_log), b, mode);
    return selective_scan_ref(step.a_bar, step.b_bar, cs, phi, params.d_skip);
}

namespace {

struct BranchOut {
    Tensor scan;  // after shared dwconv + SiLU
    Tensor gate;  // raw gate branch (SiLU applied at the output stage)
};

BranchOut input_branch(const Tensor& x, const LayerNormParams& norm,
                       const LinearMap& proj_in, const Tensor& dw_kernels) {
    const Tensor normed = layer_norm(x, norm.gamma, norm.beta, kBlockNormEps);
    auto [scan, gate] = split_last_axis(linear_apply(proj_in, normed));
    scan = chw_to_hwc(depthwise_conv3x3(hwc_to_chw(scan), dw_kernels));
    return {activation(Activation::silu, scan), std::move(gate)};
}

Tensor output_stage(const Tensor& recovered, const Tensor& gate,
                    const LayerNormParams& norm, const LinearMap& proj_out,
                    const Tensor& residual) {
    const Tensor normed =
        layer_norm(recovered, norm.gamma, norm.beta, kBlockNormEps);
    const Tensor gated = mul(normed, activation(Activation::silu, gate));
    return add(residual, linear_apply(proj_out, gated));
}

}  // namespace

ModalPair cmsa_block(const ModalPair& pair, const CmsaBlockParams& params,
                     DiscretizeMode mode, DeltaAccumulator* probe) {
    require(same_shape(pair.ir, pair.vi), "cmsa_block: modality shape mismatch");
    require(pair.ir.rank() == 3, "cmsa_block: inputs must be [H,W,C]");
    const std::size_t h = pair.ir.extent(0), w = pair.ir.extent(1);

    const BranchOut ir = input_branch(pair.ir, params.norm_in_ir,
                                      params.proj_in_ir, params.dw_kernels);
    const BranchOut vi = input_branch(pair.vi, params.norm_in_vi,
                                      params.proj_in_vi, params.dw_kernels);

    auto [pm_ir, pm_vi, mark] = patch_mark(ir.scan, vi.scan, params.mark);
    (void)mark;

    std::array<Tensor, 4> scanned;
    for (std::size_t di = 0; di < 4; ++di) {
        const Direction d = kDirections[di];
        const Tensor phi = interleave(flatten_direction(pm_ir, d).values,
                                      flatten_direction(pm_vi, d).values);
        scanned[di] = cross_ss2d(phi, params.ssm[di], mode, probe);
    }
    auto [t_ir, t_vi] = recover(scanned[0], scanned[1], scanned[2], scanned[3], h, w);

    return {output_stage(t_ir, ir.gate, params.norm_out_ir, params.proj_out_ir,
                         pair.ir),
            output_stage(t_vi, vi.gate, params.norm_out_vi, params.proj_out_vi,
                         pair.vi)};
}

Tensor cmsa_stack(const ModalPair& pair,
                  const std::vector<CmsaBlockParams>& blocks,
                  DiscretizeMode mode,
                  std::vector<DeltaAccumulator>* probes) {
    require(!blocks.empty(), "cmsa_stack: need at least one block");
    if (probes) probes->assign(blocks.size(), DeltaAccumulator{});
    ModalPair cur = pair;
    for (std::size_t k = 0; k < blocks.size(); ++k)
        cur = cmsa_block(cur, blocks[k], mode, probes ? &(*probes)[k] : nullptr);
    return add(cur.ir, cur.vi);
}

}  // namespace s4f

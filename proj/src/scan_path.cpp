#include "s4f/scan_path.hpp"

namespace s4f {

const char* direction_name(Direction d) {
    switch (d) {
    case Direction::hf: return "hf";
    case Direction::hb: return "hb";
    case Direction::vf: return "vf";
    case Direction::vb: return "vb";
    }
    return "?";
}

std::size_t direction_offset(Direction d, std::size_t l, std::size_t grid_h,
                             std::size_t grid_w) {
    const std::size_t len = grid_h * grid_w;
    switch (d) {
    case Direction::hf:
        return l;
    case Direction::hb:
        return len - 1 - l;
    case Direction::vf:
        return (l % grid_h) * grid_w + l / grid_h;
    case Direction::vb: {
        const std::size_t r = len - 1 - l;
        return (r % grid_h) * grid_w + r / grid_h;
    }
    }
    return 0;
}

DirectionalSequence flatten_direction(const Tensor& grid, Direction d) {
    require(grid.rank() == 3, "flatten_direction: grid must be [H,W,C]");
    const std::size_t h = grid.extent(0), w = grid.extent(1), c = grid.extent(2);
    const std::size_t len = h * w;
    DirectionalSequence seq{d, h, w, Tensor({len, c})};
    for (std::size_t l = 0; l < len; ++l) {
        const std::size_t off = direction_offset(d, l, h, w);
        const double* src = grid.data() + off * c;
        double* dst = seq.values.data() + l * c;
        for (std::size_t i = 0; i < c; ++i) dst[i] = src[i];
    }
    return seq;
}

Tensor unflatten_direction(const DirectionalSequence& seq) {
    const std::size_t h = seq.grid_h, w = seq.grid_w;
    require(seq.values.rank() == 2 && seq.values.extent(0) == h * w,
            "unflatten_direction: sequence length must equal grid_h*grid_w");
    const std::size_t c = seq.values.extent(1);
    Tensor grid({h, w, c});
    for (std::size_t l = 0; l < h * w; ++l) {
        const std::size_t off = direction_offset(seq.direction, l, h, w);
        const double* src = seq.values.data() + l * c;
        double* dst = grid.data() + off * c;
        for (std::size_t i = 0; i < c; ++i) dst[i] = src[i];
    }
    return grid;
}

Tensor interleave(const Tensor& seq_ir, const Tensor& seq_vi) {
    require(seq_ir.rank() == 2 && seq_vi.rank() == 2,
            "interleave: sequences must be [L,C]");
    require(same_shape(seq_ir, seq_vi), "interleave: length mismatch");
    const std::size_t len = seq_ir.extent(0), c = seq_ir.extent(1);
    Tensor out({2 * len, c});
    for (std::size_t l = 0; l < len; ++l) {
        std::copy(seq_ir.data() + l * c, seq_ir.data() + (l + 1) * c,
                  out.data() + (2 * l) * c);
        std::copy(seq_vi.data() + l * c, seq_vi.data() + (l + 1) * c,
                  out.data() + (2 * l + 1) * c);
    }
    return out;
}

std::pair<Tensor, Tensor> deinterleave(const Tensor& x) {
    require(x.rank() == 2, "deinterleave: input must be [2L,C]");
    require(x.extent(0) % 2 == 0, "deinterleave: length must be even");
    const std::size_t len = x.extent(0) / 2, c = x.extent(1);
    Tensor ir({len, c}), vi({len, c});
    for (std::size_t l = 0; l < len; ++l) {
        std::copy(x.data() + (2 * l) * c, x.data() + (2 * l + 1) * c,
                  ir.data() + l * c);
        std::copy(x.data() + (2 * l + 1) * c, x.data() + (2 * l + 2) * c,
                  vi.data() + l * c);
    }
    return {std::move(ir), std::move(vi)};
}

std::pair<Tensor, Tensor> recover(const Tensor& f_hf, const Tensor& f_hb,
                                  const Tensor& f_vf, const Tensor& f_vb,
                                  std::size_t grid_h, std::size_t grid_w) {
    const std::array<const Tensor*, 4> seqs{&f_hf, &f_hb, &f_vf, &f_vb};
    const std::size_t len = grid_h * grid_w;
    for (const Tensor* s : seqs) {
        require(s->rank() == 2 && s->extent(0) == 2 * len,
                "recover: each sequence must be [2L,C] with L = grid_h*grid_w");
        require(s->extent(1) == f_hf.extent(1), "recover: channel mismatch");
    }
    const std::size_t c = f_hf.extent(1);
    Tensor t_ir({grid_h, grid_w, c}), t_vi({grid_h, grid_w, c});
    for (std::size_t di = 0; di < 4; ++di) {
        auto [ir, vi] = deinterleave(*seqs[di]);
        add_inplace(t_ir, unflatten_direction({kDirections[di], grid_h, grid_w,
                                               std::move(ir)}));
        add_inplace(t_vi, unflatten_direction({kDirections[di], grid_h, grid_w,
                                               std::move(vi)}));
    }
    return {std::move(t_ir), std::move(t_vi)};
}

Tensor ss2d_single(const Tensor& grid, const SsmSingleParams& params,
                   DiscretizeMode mode) {
    require(grid.rank() == 3, "ss2d_single: grid must be [H,W,C]");
    const std::size_t h = grid.extent(0), w = grid.extent(1), c = grid.extent(2);
    require(params.a_log.rank() == 2 && params.a_log.extent(0) == c,
            "ss2d_single: a_log must be [C,H]");
    require(params.proj.to_delta.out() == c,
            "ss2d_single: delta projection must map C -> C");
    require(params.delta_bias.rank() == 1 && params.delta_bias.extent(0) == c,
            "ss2d_single: delta_bias must be [C]");
    const Tensor a = ssm_state_matrix(params.a_log);
    Tensor out({h, w, c});
    for (Direction d : kDirections) {
        DirectionalSequence seq = flatten_direction(grid, d);
        const Tensor b = linear_apply(params.proj.to_b, seq.values);
        const Tensor cs = linear_apply(params.proj.to_c, seq.values);
        Tensor delta = linear_apply(params.proj.to_delta, seq.values);
        for (std::size_t l = 0; l < delta.extent(0); ++l)
            for (std::size_t ch = 0; ch < c; ++ch)
                delta(l, ch) = softplus_scalar(delta(l, ch) + params.delta_bias(ch));
        DiscreteStep step = discretize(delta, a, b, mode);
        Tensor y = selective_scan_ref(step.a_bar, step.b_bar, cs, seq.values,
                                      params.d_skip);
        add_inplace(out, unflatten_direction({d, h, w, std::move(y)}));
    }
    return out;
}

}  // namespace s4f

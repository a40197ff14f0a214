// Cross-Modal Spatial Awareness: patch marking, parameter interleaving,
// the cross selective scan over interleaved two-modality sequences, the
// CMSA block and the K-block stack, plus the time-step diagnostics.
#pragma once

#include <array>
#include <cstddef>
#include <tuple>
#include <vector>

#include "s4f/scan_path.hpp"
#include "s4f/ssm.hpp"
#include "s4f/tensor.hpp"

namespace s4f {

inline constexpr double kBlockNormEps = 1e-6;

struct LayerNormParams {
    Tensor gamma;  // [C]
    Tensor beta;   // [C]
};

struct ModalPair {
    Tensor ir;  // [H,W,C]
    Tensor vi;  // [H,W,C]
};

struct CmsaBlockParams {
    LayerNormParams norm_in_ir, norm_in_vi;
    LinearMap proj_in_ir, proj_in_vi;  // C -> 2C, chunked into scan/gate
    Tensor dw_kernels;                 // [C,3,3], shared by both modalities
    LinearMap mark;                    // 2C -> C
    std::array<SsmParams, 4> ssm;      // one bundle per scan direction
    LayerNormParams norm_out_ir, norm_out_vi;
    LinearMap proj_out_ir, proj_out_vi;  // C -> C
};

// Accumulates time-step statistics for one cross scan: pre/post softplus
// sums split by modality (even rows infrared, odd visible).
struct DeltaAccumulator {
    double pre_ir = 0.0, pre_vi = 0.0;
    double post_ir = 0.0, post_vi = 0.0;
    std::size_t count_ir = 0, count_vi = 0;

    double pre_ir_mean() const { return count_ir ? pre_ir / count_ir : 0.0; }
    double pre_vi_mean() const { return count_vi ? pre_vi / count_vi : 0.0; }
    double post_ir_mean() const { return count_ir ? post_ir / count_ir : 0.0; }
    double post_vi_mean() const { return count_vi ? post_vi / count_vi : 0.0; }
};

// M = mark([p_ir ; p_vi]); both modalities receive the identical mark.
// Returns (p_ir + M, p_vi + M, M).
std::tuple<Tensor, Tensor, Tensor> patch_mark(const Tensor& p_ir,
                                              const Tensor& p_vi,
                                              const LinearMap& mark);

// Applies s_ir to even rows and s_vi to odd rows of an interleaved
// sequence (infrared at even offsets).
Tensor interleave_params(const LinearMap& s_ir, const LinearMap& s_vi,
                         const Tensor& x /*[2L,Cin]*/);

// Selective scan over a full interleaved sequence with per-modality B/C/
// delta projections and a shared hidden state crossing modality
// boundaries.
Tensor cross_ss2d(const Tensor& phi /*[2L,C]*/, const SsmParams& params,
                  DiscretizeMode mode, DeltaAccumulator* probe = nullptr);

ModalPair cmsa_block(const ModalPair& pair, const CmsaBlockParams& params,
                     DiscretizeMode mode,
                     DeltaAccumulator* probe = nullptr);

// Applies the K blocks sequentially and returns the elementwise sum of the
// final pair. When probes is non-null it must hold one accumulator per
// block.
Tensor cmsa_stack(const ModalPair& pair,
                  const std::vector<CmsaBlockParams>& blocks,
                  DiscretizeMode mode,
                  std::vector<DeltaAccumulator>* probes = nullptr);

}  // namespace s4f

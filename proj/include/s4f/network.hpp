// Multi-scale forward pipeline: overlap patch embedding, single-modality
// VSS blocks, the two encoder towers with patch merging, per-scale fusion
// (CMSA stack or the elementwise-ADD ablation), the decoder with patch
// expanding, and the fold back to pixel space.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "s4f/cmsa.hpp"
#include "s4f/scan_path.hpp"
#include "s4f/ssm.hpp"
#include "s4f/tensor.hpp"

namespace s4f {

enum class FusionMode { cmsa, add };

struct FusionConfig {
    std::size_t n_layers = 3;
    std::size_t k_blocks = 3;
    std::vector<std::size_t> vss_counts{1, 2, 1};
    std::vector<std::size_t> channels{48, 96, 192};
    std::size_t patch_size = 4;
    std::size_t overlap = 1;
    std::size_t hidden = 16;
    DiscretizeMode mode = DiscretizeMode::euler;
    bool skip_d = true;
    FusionMode fusion = FusionMode::cmsa;
    std::uint64_t seed = 0;

    std::size_t stride() const { return patch_size - overlap; }
    void validate() const;
};

struct VssBlockParams {
    LayerNormParams norm_in, norm_out;
    LinearMap proj_in;  // C -> 2C
    Tensor dw_kernels;  // [C,3,3]
    SsmSingleParams ssm;
    LinearMap proj_out;  // C -> C
};

struct ModelWeights {
    FusionConfig cfg;
    LinearMap ope_ir, ope_vi;  // p*p -> channels[0]
    std::vector<std::vector<VssBlockParams>> enc_ir, enc_vi;  // [N][G_l]
    std::vector<LinearMap> merge_ir, merge_vi;                // [N-1]
    std::vector<std::vector<CmsaBlockParams>> cmsa_layers;    // [N][K]
    std::vector<LinearMap> expand;                            // [N-1]
    std::vector<std::vector<VssBlockParams>> dec;             // [N][G_l]
    LinearMap unproject;  // channels[0] -> p*p
};

// Smallest H' >= max(H, p) with (H' - p) divisible by the stride.
std::size_t padded_extent(std::size_t image_extent, std::size_t patch,
                          std::size_t stride);

// Raw p x p windows at stride p-o with reflect padding: [H,W] -> [h,w,p*p].
Tensor unfold(const Tensor& img, std::size_t patch, std::size_t overlap);

// Inverse of unfold: overlapping contributions averaged by per-pixel
// contribution count, cropped to [out_h, out_w].
Tensor fold(const Tensor& tokens /*[h,w,p*p]*/, std::size_t patch,
            std::size_t overlap, std::size_t out_h, std::size_t out_w);

Tensor overlap_patch_embed(const Tensor& img, std::size_t patch,
                           std::size_t overlap, const LinearMap& proj);

Tensor vss_block(const Tensor& grid, const VssBlockParams& params,
                 DiscretizeMode mode);

// Concatenates 2x2 neighbours channel-wise (TL,TR,BL,BR), then projects;
// odd extents are reflect-padded first.
Tensor patch_merge(const Tensor& grid, const LinearMap& proj);

// Projects then redistributes the values as 2x2 spatial blocks (inverse
// layout of patch_merge). proj.out must be divisible by 4.
Tensor patch_expand(const Tensor& grid, const LinearMap& proj);

// Per-layer feature pairs after each layer's VSS blocks (the grids the
// fusion stage consumes): 76x76x48 / 38x38x96 / 19x19x192 for the default
// config on 229x229 inputs.
std::vector<ModalPair> encode(const Tensor& img_ir, const Tensor& img_vi,
                              const ModelWeights& w);

// Decoder plus fold. top_sum is the elementwise sum of the deepest encoder
// pair, which seeds the decoder recursion.
Tensor decode_and_fold(const std::vector<Tensor>& fused, const Tensor& top_sum,
                       const ModelWeights& w, std::size_t out_h,
                       std::size_t out_w);

struct FuseTrace {
    std::vector<ModalPair> feats;
    std::vector<Tensor> fused;
};

// Full pipeline; deterministic for fixed weights and inputs. Images are
// [H,W] luminance in [0,1]; so is the result.
Tensor fuse_forward(const Tensor& img_ir, const Tensor& img_vi,
                    const ModelWeights& w, FuseTrace* trace = nullptr);

// Seeded initialization: linear weights uniform +-1/sqrt(fan_in),
// A = -(h+1) per hidden index, time-step bias placed so softplus lands
// log-uniformly in [1e-3, 1e-1], zero output projections.
ModelWeights init_weights(const FusionConfig& cfg);

// Exchanges every infrared/visible parameter (including the two halves of
// each mark map input); shared decoder parameters are untouched.
ModelWeights swap_modalities(const ModelWeights& w);

struct DeltaBlockStats {
    std::size_t layer = 0;  // 1-based
    std::size_t block = 0;  // 1-based
    double pre_ir = 0.0, pre_vi = 0.0;
    double post_ir = 0.0, post_vi = 0.0;
};

struct DeltaLayerStats {
    std::size_t layer = 0;
    double pre_ir = 0.0, pre_vi = 0.0;
    double post_ir = 0.0, post_vi = 0.0;
};

struct DeltaStats {
    std::vector<DeltaBlockStats> blocks;
    std::vector<DeltaLayerStats> layers;
};

// Per-modality time-step means over all positions, channels and scan
// directions: per block, and aggregated per layer. Reports both the
// pre-softplus and post-softplus values.
DeltaStats delta_stats(const ModelWeights& w, const Tensor& img_ir,
                       const Tensor& img_vi);

// CSV rows: layer,block,modality,pre_mean,post_mean.
std::string delta_stats_csv(const DeltaStats& stats);

}  // namespace s4f

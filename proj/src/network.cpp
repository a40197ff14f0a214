#include "s4f/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "s4f/rng.hpp"

namespace s4f {

void FusionConfig::validate() const {
    require(n_layers >= 1, "config: n_layers must be >= 1");
    require(k_blocks >= 1, "config: k_blocks must be >= 1");
    require(vss_counts.size() == n_layers, "config: vss_counts must have n_layers entries");
    for (std::size_t g : vss_counts) require(g >= 1, "config: vss_counts entries must be >= 1");
    require(channels.size() == n_layers, "config: channels must have n_layers entries");
    for (std::size_t c : channels) require(c >= 1, "config: channels must be positive");
    for (std::size_t i = 1; i < channels.size(); ++i)
        require(channels[i] >= channels[i - 1], "config: channels must be non-decreasing");
    require(patch_size >= 1, "config: patch_size must be >= 1");
    require(overlap < patch_size, "config: overlap must satisfy 0 <= o < p");
    require(hidden >= 1, "config: hidden must be >= 1");
}

std::size_t padded_extent(std::size_t image_extent, std::size_t patch,
                          std::size_t stride) {
    require(stride >= 1, "padded_extent: stride must be positive");
    if (image_extent <= patch) return patch;
    const std::size_t rem = (image_extent - patch) % stride;
    return rem == 0 ? image_extent : image_extent + (stride - rem);
}

Tensor unfold(const Tensor& img, std::size_t patch, std::size_t overlap) {
    require(img.rank() == 2, "unfold: image must be [H,W]");
    require(overlap < patch, "unfold: stride p-o must be positive");
    const std::size_t s = patch - overlap;
    const std::size_t h_img = img.extent(0), w_img = img.extent(1);
    const std::size_t h_pad = padded_extent(h_img, patch, s);
    const std::size_t w_pad = padded_extent(w_img, patch, s);
    const std::size_t h = (h_pad - patch) / s + 1;
    const std::size_t w = (w_pad - patch) / s + 1;
    Tensor tokens({h, w, patch * patch});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            double* tok = tokens.data() + (i * w + j) * patch * patch;
            for (std::size_t di = 0; di < patch; ++di) {
                const std::size_t ri = reflect_index(
                    static_cast<std::ptrdiff_t>(i * s + di), h_img);
                for (std::size_t dj = 0; dj < patch; ++dj) {
                    const std::size_t rj = reflect_index(
                        static_cast<std::ptrdiff_t>(j * s + dj), w_img);
                    tok[di * patch + dj] = img(ri, rj);
                }
            }
        }
    }
    return tokens;
}

Tensor fold(const Tensor& tokens, std::size_t patch, std::size_t overlap,
            std::size_t out_h, std::size_t out_w) {
    require(tokens.rank() == 3, "fold: tokens must be [h,w,p*p]");
    require(tokens.extent(2) == patch * patch, "fold: token extent must be p*p");
    require(overlap < patch, "fold: stride p-o must be positive");
    const std::size_t s = patch - overlap;
    const std::size_t h = tokens.extent(0), w = tokens.extent(1);
    const std::size_t h_pad = (h - 1) * s + patch;
    const std::size_t w_pad = (w - 1) * s + patch;
    require(h_pad >= out_h && w_pad >= out_w, "fold: token grid too small for output");
    std::vector<double> canvas(h_pad * w_pad, 0.0);
    std::vector<std::uint32_t> counts(h_pad * w_pad, 0);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const double* tok = tokens.data() + (i * w + j) * patch * patch;
            for (std::size_t di = 0; di < patch; ++di) {
                for (std::size_t dj = 0; dj < patch; ++dj) {
                    const std::size_t idx = (i * s + di) * w_pad + (j * s + dj);
                    canvas[idx] += tok[di * patch + dj];
                    ++counts[idx];
                }
            }
        }
    }
    Tensor img({out_h, out_w});
    for (std::size_t i = 0; i < out_h; ++i)
        for (std::size_t j = 0; j < out_w; ++j)
            img(i, j) = canvas[i * w_pad + j] / counts[i * w_pad + j];
    return img;
}

Tensor overlap_patch_embed(const Tensor& img, std::size_t patch,
                           std::size_t overlap, const LinearMap& proj) {
    require(proj.in() == patch * patch, "overlap_patch_embed: projection input must be p*p");
    return linear_apply(proj, unfold(img, patch, overlap));
}

Tensor vss_block(const Tensor& grid, const VssBlockParams& params,
                 DiscretizeMode mode) {
    require(grid.rank() == 3, "vss_block: input must be [H,W,C]");
    const Tensor normed = layer_norm(grid, params.norm_in.gamma,
                                     params.norm_in.beta, kBlockNormEps);
    auto [scan, gate] = split_last_axis(linear_apply(params.proj_in, normed));
    scan = chw_to_hwc(depthwise_conv3x3(hwc_to_chw(scan), params.dw_kernels));
    scan = activation(Activation::silu, scan);
    const Tensor y = ss2d_single(scan, params.ssm, mode);
    const Tensor normed_out =
        layer_norm(y, params.norm_out.gamma, params.norm_out.beta, kBlockNormEps);
    const Tensor gated = mul(normed_out, activation(Activation::silu, gate));
    return add(grid, linear_apply(params.proj_out, gated));
}

Tensor patch_merge(const Tensor& grid, const LinearMap& proj) {
    require(grid.rank() == 3, "patch_merge: input must be [H,W,C]");
    const std::size_t h = grid.extent(0), w = grid.extent(1), c = grid.extent(2);
    require(proj.in() == 4 * c, "patch_merge: projection input must be 4C");
    const std::size_t h2 = (h + 1) / 2, w2 = (w + 1) / 2;
    Tensor gathered({h2, w2, 4 * c});
    static const int offs[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};  // TL,TR,BL,BR
    for (std::size_t i = 0; i < h2; ++i) {
        for (std::size_t j = 0; j < w2; ++j) {
            for (int q = 0; q < 4; ++q) {
                const std::size_t si = reflect_index(
                    static_cast<std::ptrdiff_t>(2 * i + offs[q][0]), h);
                const std::size_t sj = reflect_index(
                    static_cast<std::ptrdiff_t>(2 * j + offs[q][1]), w);
                const double* src = grid.data() + (si * w + sj) * c;
                double* dst = gathered.data() + ((i * w2 + j) * 4 + q) * c;
                std::copy(src, src + c, dst);
            }
        }
    }
    return linear_apply(proj, gathered);
}

Tensor patch_expand(const Tensor& grid, const LinearMap& proj) {
    require(grid.rank() == 3, "patch_expand: input must be [H,W,C]");
    const std::size_t h = grid.extent(0), w = grid.extent(1);
    require(proj.in() == grid.extent(2), "patch_expand: projection input mismatch");
    require(proj.out() % 4 == 0,
            "patch_expand: projected extent must split into a 2x2 block (C even)");
    const std::size_t c_out = proj.out() / 4;
    const Tensor t = linear_apply(proj, grid);
    Tensor out({2 * h, 2 * w, c_out});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const double* src = t.data() + (i * w + j) * 4 * c_out;
            for (int q = 0; q < 4; ++q) {
                const std::size_t oi = 2 * i + static_cast<std::size_t>(q / 2);
                const std::size_t oj = 2 * j + static_cast<std::size_t>(q % 2);
                double* dst = out.data() + (oi * 2 * w + oj) * c_out;
                std::copy(src + q * c_out, src + (q + 1) * c_out, dst);
            }
        }
    }
    return out;
}

namespace {

Tensor crop_grid(const Tensor& grid, std::size_t h, std::size_t w) {
    if (grid.extent(0) == h && grid.extent(1) == w) return grid;
    const std::size_t c = grid.extent(2);
    Tensor out({h, w, c});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            std::copy(grid.data() + (i * grid.extent(1) + j) * c,
                      grid.data() + (i * grid.extent(1) + j) * c + c,
                      out.data() + (i * w + j) * c);
    return out;
}

}  // namespace

std::vector<ModalPair> encode(const Tensor& img_ir, const Tensor& img_vi,
                              const ModelWeights& w) {
    require(img_ir.rank() == 2 && img_vi.rank() == 2, "encode: images must be [H,W]");
    require(same_shape(img_ir, img_vi), "encode: image extent mismatch");
    const FusionConfig& cfg = w.cfg;
    Tensor g_ir = overlap_patch_embed(img_ir, cfg.patch_size, cfg.overlap, w.ope_ir);
    Tensor g_vi = overlap_patch_embed(img_vi, cfg.patch_size, cfg.overlap, w.ope_vi);
    std::vector<ModalPair> feats;
    feats.reserve(cfg.n_layers);
    for (std::size_t li = 0; li < cfg.n_layers; ++li) {
        for (const VssBlockParams& blk : w.enc_ir[li]) g_ir = vss_block(g_ir, blk, cfg.mode);
        for (const VssBlockParams& blk : w.enc_vi[li]) g_vi = vss_block(g_vi, blk, cfg.mode);
        feats.push_back({g_ir, g_vi});
        if (li + 1 < cfg.n_layers) {
            g_ir = patch_merge(g_ir, w.merge_ir[li]);
            g_vi = patch_merge(g_vi, w.merge_vi[li]);
        }
    }
    return feats;
}

Tensor decode_and_fold(const std::vector<Tensor>& fused, const Tensor& top_sum,
                       const ModelWeights& w, std::size_t out_h,
                       std::size_t out_w) {
    const FusionConfig& cfg = w.cfg;
    require(fused.size() == cfg.n_layers, "decode: need one fused grid per layer");
    Tensor f = top_sum;
    for (std::size_t li = cfg.n_layers; li-- > 0;) {
        if (li + 1 < cfg.n_layers)
            f = crop_grid(patch_expand(f, w.expand[li]), fused[li].extent(0),
                          fused[li].extent(1));
        f = add(f, fused[li]);
        for (const VssBlockParams& blk : w.dec[li]) f = vss_block(f, blk, cfg.mode);
    }
    Tensor tokens = linear_apply(w.unproject, f);
    Tensor img = fold(tokens, cfg.patch_size, cfg.overlap, out_h, out_w);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data()[i] = std::clamp(img.data()[i], 0.0, 1.0);
    return img;
}

Tensor fuse_forward(const Tensor& img_ir, const Tensor& img_vi,
                    const ModelWeights& w, FuseTrace* trace) {
    const FusionConfig& cfg = w.cfg;
    std::vector<ModalPair> feats = encode(img_ir, img_vi, w);
    std::vector<Tensor> fused(cfg.n_layers);
    for (std::size_t li = 0; li < cfg.n_layers; ++li) {
        fused[li] = cfg.fusion == FusionMode::add
                        ? add(feats[li].ir, feats[li].vi)
                        : cmsa_stack(feats[li], w.cmsa_layers[li], cfg.mode);
    }
    const Tensor top = add(feats.back().ir, feats.back().vi);
    Tensor img = decode_and_fold(fused, top, w, img_ir.extent(0), img_ir.extent(1));
    if (trace) {
        trace->feats = std::move(feats);
        trace->fused = std::move(fused);
    }
    return img;
}

namespace {

LinearMap init_linear(Rng& rng, std::size_t out, std::size_t in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor weight({out, in});
    for (std::size_t i = 0; i < weight.size(); ++i) weight.data()[i] = rng.symmetric(s);
    return LinearMap(std::move(weight), Tensor({out}));
}

LayerNormParams init_norm(std::size_t c) {
    return {Tensor::full({c}, 1.0), Tensor({c})};
}

Tensor init_dw_kernels(Rng& rng, std::size_t c) {
    Tensor k({c, 3, 3});
    for (std::size_t i = 0; i < k.size(); ++i) k.data()[i] = rng.symmetric(1.0 / 3.0);
    return k;
}

Tensor init_a_log(std::size_t c, std::size_t hidden) {
    Tensor a({c, hidden});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t h = 0; h < hidden; ++h)
            a(ch, h) = std::log(static_cast<double>(h + 1));
    return a;
}

Tensor init_delta_bias(Rng& rng, std::size_t c) {
    // softplus(bias) lands log-uniformly in [1e-3, 1e-1]
    Tensor b({c});
    for (std::size_t i = 0; i < c; ++i) {
        const double target = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
        b(i) = std::log(std::expm1(target));
    }
    return b;
}

SsmProjections init_proj(Rng& rng, std::size_t c, std::size_t hidden) {
    return {init_linear(rng, hidden, c), init_linear(rng, hidden, c),
            init_linear(rng, c, c)};
}

VssBlockParams init_vss(Rng& rng, const FusionConfig& cfg, std::size_t c) {
    VssBlockParams p;
    p.norm_in = init_norm(c);
    p.proj_in = init_linear(rng, 2 * c, c);
    p.dw_kernels = init_dw_kernels(rng, c);
    p.ssm.a_log = init_a_log(c, cfg.hidden);
    p.ssm.proj = init_proj(rng, c, cfg.hidden);
    p.ssm.delta_bias = init_delta_bias(rng, c);
    if (cfg.skip_d) p.ssm.d_skip = Tensor::full({c}, 1.0);
    p.norm_out = init_norm(c);
    p.proj_out = LinearMap::zeros(c, c);
    return p;
}

CmsaBlockParams init_cmsa(Rng& rng, const FusionConfig& cfg, std::size_t c) {
    CmsaBlockParams p;
    p.norm_in_ir = init_norm(c);
    p.norm_in_vi = init_norm(c);
    p.proj_in_ir = init_linear(rng, 2 * c, c);
    p.proj_in_vi = init_linear(rng, 2 * c, c);
    p.dw_kernels = init_dw_kernels(rng, c);
    p.mark = init_linear(rng, c, 2 * c);
    for (std::size_t d = 0; d < 4; ++d) {
        SsmParams& s = p.ssm[d];
        s.a_log = init_a_log(c, cfg.hidden);
        s.ir = init_proj(rng, c, cfg.hidden);
        s.vi = init_proj(rng, c, cfg.hidden);
        s.delta_bias = init_delta_bias(rng, c);
        if (cfg.skip_d) s.d_skip = Tensor::full({c}, 1.0);
    }
    p.norm_out_ir = init_norm(c);
    p.norm_out_vi = init_norm(c);
    p.proj_out_ir = LinearMap::zeros(c, c);
    p.proj_out_vi = LinearMap::zeros(c, c);
    return p;
}

}  // namespace

ModelWeights init_weights(const FusionConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    ModelWeights w;
    w.cfg = cfg;
    const std::size_t n = cfg.n_layers;
    const std::size_t pp = cfg.patch_size * cfg.patch_size;
    w.ope_ir = init_linear(rng, cfg.channels[0], pp);
    w.ope_vi = init_linear(rng, cfg.channels[0], pp);
    w.enc_ir.resize(n);
    w.enc_vi.resize(n);
    for (std::size_t li = 0; li < n; ++li)
        for (std::size_t g = 0; g < cfg.vss_counts[li]; ++g)
            w.enc_ir[li].push_back(init_vss(rng, cfg, cfg.channels[li]));
    for (std::size_t li = 0; li < n; ++li)
        for (std::size_t g = 0; g < cfg.vss_counts[li]; ++g)
            w.enc_vi[li].push_back(init_vss(rng, cfg, cfg.channels[li]));
    for (std::size_t li = 0; li + 1 < n; ++li)
        w.merge_ir.push_back(init_linear(rng, cfg.channels[li + 1], 4 * cfg.channels[li]));
    for (std::size_t li = 0; li + 1 < n; ++li)
        w.merge_vi.push_back(init_linear(rng, cfg.channels[li + 1], 4 * cfg.channels[li]));
    w.cmsa_layers.resize(n);
    for (std::size_t li = 0; li < n; ++li)
        for (std::size_t k = 0; k < cfg.k_blocks; ++k)
            w.cmsa_layers[li].push_back(init_cmsa(rng, cfg, cfg.channels[li]));
    for (std::size_t li = 0; li + 1 < n; ++li)
        w.expand.push_back(init_linear(rng, 4 * cfg.channels[li], cfg.channels[li + 1]));
    w.dec.resize(n);
    for (std::size_t li = 0; li < n; ++li)
        for (std::size_t g = 0; g < cfg.vss_counts[li]; ++g)
            w.dec[li].push_back(init_vss(rng, cfg, cfg.channels[li]));
    w.unproject = init_linear(rng, pp, cfg.channels[0]);
    return w;
}

namespace {

LinearMap swap_mark_halves(const LinearMap& mark) {
    const std::size_t out = mark.out(), in = mark.in();
    const std::size_t half = in / 2;
    Tensor weight({out, in});
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i)
            weight(o, i) = mark.weight(o, i < half ? i + half : i - half);
    return LinearMap(std::move(weight), mark.bias);
}

}  // namespace

ModelWeights swap_modalities(const ModelWeights& w) {
    ModelWeights s = w;
    std::swap(s.ope_ir, s.ope_vi);
    std::swap(s.enc_ir, s.enc_vi);
    std::swap(s.merge_ir, s.merge_vi);
    for (auto& layer : s.cmsa_layers) {
        for (CmsaBlockParams& blk : layer) {
            std::swap(blk.norm_in_ir, blk.norm_in_vi);
            std::swap(blk.proj_in_ir, blk.proj_in_vi);
            blk.mark = swap_mark_halves(blk.mark);
            for (SsmParams& ssm : blk.ssm) std::swap(ssm.ir, ssm.vi);
            std::swap(blk.norm_out_ir, blk.norm_out_vi);
            std::swap(blk.proj_out_ir, blk.proj_out_vi);
        }
    }
    return s;
}

DeltaStats delta_stats(const ModelWeights& w, const Tensor& img_ir,
                       const Tensor& img_vi) {
    const std::vector<ModalPair> feats = encode(img_ir, img_vi, w);
    DeltaStats stats;
    for (std::size_t li = 0; li < w.cfg.n_layers; ++li) {
        std::vector<DeltaAccumulator> probes;
        cmsa_stack(feats[li], w.cmsa_layers[li], w.cfg.mode, &probes);
        DeltaAccumulator layer_acc;
        for (std::size_t k = 0; k < probes.size(); ++k) {
            const DeltaAccumulator& a = probes[k];
            stats.blocks.push_back({li + 1, k + 1, a.pre_ir_mean(), a.pre_vi_mean(),
                                    a.post_ir_mean(), a.post_vi_mean()});
            layer_acc.pre_ir += a.pre_ir;
            layer_acc.pre_vi += a.pre_vi;
            layer_acc.post_ir += a.post_ir;
            layer_acc.post_vi += a.post_vi;
            layer_acc.count_ir += a.count_ir;
            layer_acc.count_vi += a.count_vi;
        }
        stats.layers.push_back({li + 1, layer_acc.pre_ir_mean(),
                                layer_acc.pre_vi_mean(), layer_acc.post_ir_mean(),
                                layer_acc.post_vi_mean()});
    }
    return stats;
}

std::string delta_stats_csv(const DeltaStats& stats) {
    std::ostringstream out;
    out.precision(17);
    out << "layer,block,modality,pre_mean,post_mean\n";
    for (const DeltaBlockStats& b : stats.blocks) {
        out << b.layer << ',' << b.block << ",ir," << b.pre_ir << ',' << b.post_ir << '\n';
        out << b.layer << ',' << b.block << ",vi," << b.pre_vi << ',' << b.post_vi << '\n';
    }
    return out.str();
}

}  // namespace s4f

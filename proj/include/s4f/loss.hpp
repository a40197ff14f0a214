// Training-objective components and the no-reference image metrics.
// Everything here is verified analytically (closed forms or finite
// differences) rather than against trained models: the classifier behind
// the perception term is a pluggable logits provider with a deterministic
// default.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "s4f/tensor.hpp"

namespace s4f {

struct LossWeights {
    double alpha1 = 15.0;
    double alpha2 = 15.0;
    double alpha3 = 15.0;
};

// Maps an [H,W] image to a logits vector of fixed length.
struct LogitsProvider {
    std::size_t num_classes = 1000;
    std::function<std::vector<double>(const Tensor&)> eval;
};

// Deterministic stand-in for a pretrained classifier head: average-pools
// the image to 7x7, flattens, and applies a seed-fixed random linear map.
LogitsProvider make_pooled_random_provider(std::uint64_t seed,
                                           std::size_t num_classes = 1000);

struct PerceptionLoss {
    double value = 0.0;
    std::vector<double> grad;  // d(value)/d(logits)
};

// Entropy of softmax(logits) with its analytic gradient. Bounded by
// [0, ln K]; needs at least two classes.
PerceptionLoss perception_loss(const std::vector<double>& logits);

// mean | |grad F| - max(|grad I|, |grad V|) | via Sobel magnitudes.
double gradient_loss(const Tensor& fused, const Tensor& ir, const Tensor& vi);

// Mean SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01/K2=0.03, dynamic
// range 1, valid-region windowing (extents must be >= 11).
double ssim(const Tensor& a, const Tensor& b);

struct FidelityResult {
    double l1 = 0.0;
    double ssim_loss = 0.0;
    double omega_ir = 0.0;
    double omega_vi = 0.0;
};

// Source weights from normalized Sobel-gradient energy
// (omega_i = (g_i + eps)/(g_I + g_V + 2 eps), eps = 1e-8); then the
// omega-weighted L1 and (1-SSIM) terms. omega_ir + omega_vi == 1 exactly.
FidelityResult weighted_fidelity(const Tensor& fused, const Tensor& ir,
                                 const Tensor& vi);

// l_per + a1 * l1 + a2 * l_ssim + a3 * l_grad
double total_loss(double l_per, double l1, double l_ssim, double l_grad,
                  const LossWeights& w);

struct QualityMetrics {
    double sf = 0.0;
    double ag = 0.0;
};

// Spatial frequency and average gradient on a 0..scale grayscale range.
QualityMetrics quality_metrics(const Tensor& img, double scale = 255.0);

struct EntropyHistogram {
    std::vector<double> edges;       // bins + 1 values covering [0, ln K]
    std::vector<std::size_t> counts; // per bin; top edge falls in the last bin
    std::vector<double> entropies;   // per input image
};

EntropyHistogram entropy_histogram(const std::vector<Tensor>& images,
                                   const LogitsProvider& provider,
                                   std::size_t bins);

// CSV rows: entropy (bin lower edge), count.
std::string entropy_histogram_csv(const EntropyHistogram& hist);

}  // namespace s4f

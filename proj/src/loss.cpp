#include "s4f/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "s4f/rng.hpp"

namespace s4f {

LogitsProvider make_pooled_random_provider(std::uint64_t seed,
                                           std::size_t num_classes) {
    constexpr std::size_t kPool = 7;
    Rng rng(seed);
    auto head = std::make_shared<LinearMap>();
    {
        const double s = 1.0 / std::sqrt(static_cast<double>(kPool * kPool));
        Tensor weight({num_classes, kPool * kPool});
        for (std::size_t i = 0; i < weight.size(); ++i)
            weight.data()[i] = rng.symmetric(s);
        *head = LinearMap(std::move(weight), Tensor({num_classes}));
    }
    LogitsProvider provider;
    provider.num_classes = num_classes;
    provider.eval = [head, num_classes](const Tensor& img) {
        require(img.rank() == 2, "logits provider: image must be [H,W]");
        const std::size_t h = img.extent(0), w = img.extent(1);
        Tensor pooled({1, kPool * kPool});
        for (std::size_t a = 0; a < kPool; ++a) {
            std::size_t r0 = a * h / kPool, r1 = (a + 1) * h / kPool;
            if (r0 >= h) r0 = h - 1;
            if (r1 <= r0) r1 = r0 + 1;
            for (std::size_t b = 0; b < kPool; ++b) {
                std::size_t c0 = b * w / kPool, c1 = (b + 1) * w / kPool;
                if (c0 >= w) c0 = w - 1;
                if (c1 <= c0) c1 = c0 + 1;
                double sum = 0.0;
                for (std::size_t i = r0; i < r1; ++i)
                    for (std::size_t j = c0; j < c1; ++j) sum += img(i, j);
                pooled(0, a * kPool + b) =
                    sum / static_cast<double>((r1 - r0) * (c1 - c0));
            }
        }
        const Tensor logits = linear_apply(*head, pooled);
        std::vector<double> out(num_classes);
        std::copy(logits.data(), logits.data() + num_classes, out.begin());
        return out;
    };
    return provider;
}

PerceptionLoss perception_loss(const std::vector<double>& logits) {
    const std::size_t k = logits.size();
    require(k >= 2, "perception_loss: need at least two classes");
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double lse = 0.0;
    for (double v : logits) lse += std::exp(v - m);
    lse = std::log(lse);

    PerceptionLoss out;
    std::vector<double> prob(k), logp(k);
    for (std::size_t i = 0; i < k; ++i) {
        logp[i] = (logits[i] - m) - lse;
        prob[i] = std::exp(logp[i]);
        if (prob[i] > 0.0) out.value -= prob[i] * logp[i];
    }
    out.grad.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        out.grad[i] = prob[i] > 0.0 ? -prob[i] * (logp[i] + out.value) : 0.0;
    return out;
}

double gradient_loss(const Tensor& fused, const Tensor& ir, const Tensor& vi) {
    require(same_shape(fused, ir) && same_shape(fused, vi),
            "gradient_loss: extent mismatch");
    const Tensor gf = sobel_magnitude(fused);
    const Tensor gi = sobel_magnitude(ir);
    const Tensor gv = sobel_magnitude(vi);
    double acc = 0.0;
    for (std::size_t i = 0; i < gf.size(); ++i)
        acc += std::abs(gf.data()[i] - std::max(gi.data()[i], gv.data()[i]));
    return acc / static_cast<double>(gf.size());
}

namespace {

constexpr std::size_t kSsimWindow = 11;

const std::vector<double>& ssim_window() {
    static const std::vector<double> win = [] {
        constexpr double sigma = 1.5;
        std::vector<double> w(kSsimWindow * kSsimWindow);
        double sum = 0.0;
        for (std::size_t i = 0; i < kSsimWindow; ++i) {
            for (std::size_t j = 0; j < kSsimWindow; ++j) {
                const double di = static_cast<double>(i) - 5.0;
                const double dj = static_cast<double>(j) - 5.0;
                w[i * kSsimWindow + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
                sum += w[i * kSsimWindow + j];
            }
        }
        for (double& v : w) v /= sum;
        return w;
    }();
    return win;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && same_shape(a, b), "ssim: images must be matching [H,W]");
    const std::size_t h = a.extent(0), w = a.extent(1);
    require(h >= kSsimWindow && w >= kSsimWindow,
            "ssim: image smaller than the 11x11 window");
    constexpr double c1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
    constexpr double c2 = 0.03 * 0.03;
    const std::vector<double>& win = ssim_window();
    const std::size_t vh = h - kSsimWindow + 1, vw = w - kSsimWindow + 1;
    double total = 0.0;
    for (std::size_t i = 0; i < vh; ++i) {
        for (std::size_t j = 0; j < vw; ++j) {
            double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
            for (std::size_t di = 0; di < kSsimWindow; ++di) {
                for (std::size_t dj = 0; dj < kSsimWindow; ++dj) {
                    const double weight = win[di * kSsimWindow + dj];
                    const double x = a(i + di, j + dj);
                    const double y = b(i + di, j + dj);
                    mx += weight * x;
                    my += weight * y;
                    // weight * (x*y) keeps the moments bitwise symmetric in
                    // the two images and cov == var for identical inputs
                    mxx += weight * (x * x);
                    myy += weight * (y * y);
                    mxy += weight * (x * y);
                }
            }
            const double vx = mxx - mx * mx;
            const double vy = myy - my * my;
            const double cov = mxy - mx * my;
            total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    return total / static_cast<double>(vh * vw);
}

FidelityResult weighted_fidelity(const Tensor& fused, const Tensor& ir,
                                 const Tensor& vi) {
    require(same_shape(fused, ir) && same_shape(fused, vi),
            "weighted_fidelity: extent mismatch");
    constexpr double eps = 1e-8;
    auto gradient_energy = [](const Tensor& img) {
        const Tensor g = sobel_magnitude(img);
        double sum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) sum += g.data()[i];
        return sum / static_cast<double>(g.size());
    };
    const double g_ir = gradient_energy(ir);
    const double g_vi = gradient_energy(vi);
    FidelityResult r;
    r.omega_ir = (g_ir + eps) / (g_ir + g_vi + 2 * eps);
    r.omega_vi = 1.0 - r.omega_ir;  // sums to 1 exactly

    auto mean_abs_diff = [](const Tensor& x, const Tensor& y) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            acc += std::abs(x.data()[i] - y.data()[i]);
        return acc / static_cast<double>(x.size());
    };
    r.l1 = r.omega_ir * mean_abs_diff(fused, ir) + r.omega_vi * mean_abs_diff(fused, vi);
    r.ssim_loss =
        r.omega_ir * (1.0 - ssim(fused, ir)) + r.omega_vi * (1.0 - ssim(fused, vi));
    return r;
}

double total_loss(double l_per, double l1, double l_ssim, double l_grad,
                  const LossWeights& w) {
    for (double a : {w.alpha1, w.alpha2, w.alpha3})
        require(std::isfinite(a) && a >= 0.0,
                "total_loss: weights must be finite and nonnegative");
    for (double v : {l_per, l1, l_ssim, l_grad})
        require(std::isfinite(v), "total_loss: components must be finite");
    return l_per + w.alpha1 * l1 + w.alpha2 * l_ssim + w.alpha3 * l_grad;
}

QualityMetrics quality_metrics(const Tensor& img, double scale) {
    require(img.rank() == 2, "quality_metrics: image must be [H,W]");
    const std::size_t h = img.extent(0), w = img.extent(1);
    require(h >= 2 && w >= 2, "quality_metrics: image must be at least 2x2");
    QualityMetrics out;
    double rf = 0.0, cf = 0.0;
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 1; j < w; ++j) {
            const double d = scale * (img(i, j) - img(i, j - 1));
            rf += d * d;
        }
    for (std::size_t i = 1; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double d = scale * (img(i, j) - img(i - 1, j));
            cf += d * d;
        }
    rf /= static_cast<double>(h * (w - 1));
    cf /= static_cast<double>((h - 1) * w);
    out.sf = std::sqrt(rf + cf);

    double ag = 0.0;
    for (std::size_t i = 0; i + 1 < h; ++i)
        for (std::size_t j = 0; j + 1 < w; ++j) {
            const double dx = scale * (img(i, j + 1) - img(i, j));
            const double dy = scale * (img(i + 1, j) - img(i, j));
            ag += std::sqrt((dx * dx + dy * dy) / 2.0);
        }
    out.ag = ag / static_cast<double>((h - 1) * (w - 1));
    return out;
}

EntropyHistogram entropy_histogram(const std::vector<Tensor>& images,
                                   const LogitsProvider& provider,
                                   std::size_t bins) {
    require(bins >= 1, "entropy_histogram: need at least one bin");
    require(provider.num_classes >= 2, "entropy_histogram: provider needs K >= 2");
    EntropyHistogram hist;
    const double top = std::log(static_cast<double>(provider.num_classes));
    hist.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        hist.edges[i] = top * static_cast<double>(i) / static_cast<double>(bins);
    hist.edges[0] = 0.0;
    hist.edges[bins] = top;
    hist.counts.assign(bins, 0);
    for (const Tensor& img : images) {
        const double e = perception_loss(provider.eval(img)).value;
        hist.entropies.push_back(e);
        std::size_t bin = static_cast<std::size_t>(e / top * static_cast<double>(bins));
        if (bin >= bins) bin = bins - 1;
        ++hist.counts[bin];
    }
    return hist;
}

std::string entropy_histogram_csv(const EntropyHistogram& hist) {
    std::ostringstream out;
    out.precision(17);
    out << "entropy,count\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i)
        out << hist.edges[i] << ',' << hist.counts[i] << '\n';
    return out.str();
}

}  // namespace s4f

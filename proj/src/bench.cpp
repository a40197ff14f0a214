#include "s4f/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <vector>

#include "s4f/rng.hpp"
#include "s4f/scan_kernel.hpp"
#include "s4f/tensor.hpp"

namespace s4f {

namespace {

// Keeps the optimizer from discarding the benched computation.
volatile double g_bench_sink = 0.0;

template <typename T>
double run_bench_point(Rng& rng, std::size_t len, std::size_t channels,
                       std::size_t hidden, std::size_t chunk, int reps) {
    std::vector<T> delta(len * channels), b(len * hidden), c(len * hidden),
        x(len * channels), y(len * channels), a(channels * hidden);
    for (auto& v : delta) v = static_cast<T>(rng.uniform(0.0, 1.0));
    for (auto& v : b) v = static_cast<T>(rng.symmetric(1.0));
    for (auto& v : c) v = static_cast<T>(rng.symmetric(1.0));
    for (auto& v : x) v = static_cast<T>(rng.symmetric(1.0));
    for (std::size_t ch = 0; ch < channels; ++ch)
        for (std::size_t h = 0; h < hidden; ++h)
            a[ch * hidden + h] = static_cast<T>(-(1.0 + static_cast<double>(h)));

    using clock = std::chrono::steady_clock;
    double best_ns = 0.0;
    for (int r = -1; r < reps; ++r) {  // one warmup pass
        const auto start = clock::now();
        detail::scan_fused_bench<T>(delta.data(), a.data(), b.data(), c.data(),
                                    x.data(), nullptr, len, channels, hidden,
                                    chunk, y.data());
        const auto stop = clock::now();
        g_bench_sink = g_bench_sink + static_cast<double>(y.front()) +
                       static_cast<double>(y.back());
        const double ns = std::chrono::duration<double, std::nano>(stop - start).count();
        if (r >= 0 && (best_ns == 0.0 || ns < best_ns)) best_ns = ns;
    }
    return best_ns / static_cast<double>(len);
}

}  // namespace

std::vector<BenchPoint> bench_scan(const BenchOptions& opt) {
    require(!opt.lengths.empty(), "bench: need at least one length");
    require(opt.chunk >= 1 && opt.channels >= 1 && opt.hidden >= 1,
            "bench: dimensions must be positive");
    Rng rng(opt.seed);
    std::vector<BenchPoint> points;
    for (std::size_t len : opt.lengths) {
        const double ns =
            opt.use_f32
                ? run_bench_point<float>(rng, len, opt.channels, opt.hidden,
                                         opt.chunk, opt.reps)
                : run_bench_point<double>(rng, len, opt.channels, opt.hidden,
                                          opt.chunk, opt.reps);
        points.push_back({len, ns});
    }
    return points;
}

std::string bench_csv(const std::vector<BenchPoint>& points) {
    std::ostringstream out;
    out.precision(6);
    out << "L,ns_per_element\n";
    for (const BenchPoint& p : points)
        out << p.length << ',' << std::fixed << p.ns_per_element << '\n';
    return out.str();
}

double bench_loglog_slope(const std::vector<BenchPoint>& points) {
    const std::size_t n = points.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const BenchPoint& p : points) {
        const double lx = std::log(static_cast<double>(p.length));
        const double ly = std::log(p.ns_per_element);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

double bench_max_min_ratio(const std::vector<BenchPoint>& points) {
    double lo = points.front().ns_per_element, hi = lo;
    for (const BenchPoint& p : points) {
        lo = std::min(lo, p.ns_per_element);
        hi = std::max(hi, p.ns_per_element);
    }
    return hi / lo;
}

}  // namespace s4f

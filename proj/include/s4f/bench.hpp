// Timing harness for the linear-time claim: per-element cost of the fused
// discretize+scan step across sequence lengths.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace s4f {

struct BenchPoint {
    std::size_t length = 0;
    double ns_per_element = 0.0;
};

struct BenchOptions {
    std::vector<std::size_t> lengths{4096, 8192, 16384, 32768, 65536};
    std::size_t channels = 4;
    std::size_t hidden = 16;
    std::size_t chunk = 64;
    int reps = 5;
    bool use_f32 = false;
    std::uint64_t seed = 42;
};

std::vector<BenchPoint> bench_scan(const BenchOptions& opt);

// CSV rows: L,ns_per_element.
std::string bench_csv(const std::vector<BenchPoint>& points);

// Least-squares slope of log(ns_per_element) against log(L).
double bench_loglog_slope(const std::vector<BenchPoint>& points);
double bench_max_min_ratio(const std::vector<BenchPoint>& points);

}  // namespace s4f

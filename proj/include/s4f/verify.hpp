// Randomized oracle suites behind `verify`: chunked-scan equivalence
// against the sequential reference, finite-difference gradient checks,
// and geometry/container roundtrips.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace s4f {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ScanSuiteOptions {
    std::size_t cases = 200;
    std::size_t max_len = 512;
    std::size_t max_channels = 8;
    std::size_t max_hidden = 16;
    std::uint64_t seed = 7;
};

struct GradSuiteOptions {
    std::size_t scan_cases = 30;
    std::size_t loss_cases = 30;
    std::uint64_t seed = 11;
};

std::vector<CheckResult> verify_scan_suite(const ScanSuiteOptions& opt = {});
std::vector<CheckResult> verify_grad_suite(const GradSuiteOptions& opt = {});
std::vector<CheckResult> verify_roundtrip_suite(const std::string& tmpdir,
                                                std::uint64_t seed = 13);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace s4f

#include "s4f/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "s4f/image_io.hpp"
#include "s4f/loss.hpp"
#include "s4f/network.hpp"
#include "s4f/rng.hpp"
#include "s4f/scan_path.hpp"
#include "s4f/ssm.hpp"
#include "s4f/weights_io.hpp"

namespace s4f {

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(3);
    out << v;
    return out.str();
}

struct ScanCase {
    Tensor a_bar, b_bar, c_seq, x, d;
};

ScanCase random_scan_case(Rng& rng, std::size_t len, std::size_t channels,
                          std::size_t hidden, bool with_skip) {
    Tensor delta({len, channels});
    for (std::size_t i = 0; i < delta.size(); ++i) delta.data()[i] = rng.uniform(0.0, 1.5);
    Tensor a({channels, hidden});
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = -std::exp(rng.uniform(-2.0, 1.0));
    Tensor b({len, hidden});
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.symmetric(1.0);
    DiscreteStep step = discretize(delta, a, b, DiscretizeMode::euler);
    ScanCase sc;
    sc.a_bar = std::move(step.a_bar);
    sc.b_bar = std::move(step.b_bar);
    sc.c_seq = Tensor({len, hidden});
    for (std::size_t i = 0; i < sc.c_seq.size(); ++i) sc.c_seq.data()[i] = rng.symmetric(1.0);
    sc.x = Tensor({len, channels});
    for (std::size_t i = 0; i < sc.x.size(); ++i) sc.x.data()[i] = rng.symmetric(1.0);
    if (with_skip) {
        sc.d = Tensor({channels});
        for (std::size_t i = 0; i < channels; ++i) sc.d(i) = rng.symmetric(1.0);
    }
    return sc;
}

// Central finite differences of sum(dy (*) scan(...)) w.r.t. one input
// tensor, perturbing coordinates in place. target must alias a member
// of sc.
Tensor fd_gradient(ScanCase& sc, Tensor& target, const Tensor& dy) {
    Tensor grad(target.shape());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double saved = target.data()[i];
        const double step = 1e-5 * std::max(1.0, std::abs(saved));
        auto objective = [&](double v) {
            target.data()[i] = v;
            const Tensor y = selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d);
            double acc = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) acc += dy.data()[k] * y.data()[k];
            return acc;
        };
        const double hi = objective(saved + step);
        const double lo = objective(saved - step);
        target.data()[i] = saved;
        grad.data()[i] = (hi - lo) / (2.0 * step);
    }
    return grad;
}

double rel_error(const Tensor& got, const Tensor& want) {
    double diff = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        diff = std::max(diff, std::abs(got.data()[i] - want.data()[i]));
        scale = std::max(scale, std::abs(want.data()[i]));
    }
    return diff / scale;
}

Tensor dyadic_grid(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
    // Values k * 2^-20 so four-way sums stay exact.
    Tensor g({h, w, c});
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto k = static_cast<std::int64_t>(rng.next_u64() % (1u << 21)) - (1 << 20);
        g.data()[i] = static_cast<double>(k) * 0x1.0p-20;
    }
    return g;
}

}  // namespace

std::vector<CheckResult> verify_scan_suite(const ScanSuiteOptions& opt) {
    std::vector<CheckResult> results;
    Rng rng(opt.seed);

    {
        const std::size_t chunks[] = {1, 2, 7, 64};
        double max_dev = 0.0;
        bool chunk1_exact = true;
        for (std::size_t i = 0; i < opt.cases; ++i) {
            const std::size_t len = 1 + rng.index(opt.max_len);
            const std::size_t channels = 1 + rng.index(opt.max_channels);
            const std::size_t hidden = 1 + rng.index(opt.max_hidden);
            ScanCase sc = random_scan_case(rng, len, channels, hidden, i % 2 == 0);
            const Tensor ref = selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d);
            const std::size_t chunk = chunks[rng.index(4)];
            const Tensor got =
                selective_scan_chunked(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d, chunk);
            max_dev = std::max(max_dev, max_abs_diff(ref, got));
            const Tensor one =
                selective_scan_chunked(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d, 1);
            if (std::memcmp(one.data(), ref.data(), ref.size() * sizeof(double)) != 0)
                chunk1_exact = false;
        }
        results.push_back({"scan chunked vs sequential reference", max_dev <= 1e-12,
                           "max dev " + fmt(max_dev) + " over " +
                               std::to_string(opt.cases) + " cases"});
        results.push_back({"scan chunk=1 bit-identical to reference", chunk1_exact, ""});
    }

    {
        const Tensor delta({1, 1}, {std::log(2.0)});
        const Tensor a({1, 1}, {1.0});  // test-only positive state matrix
        const Tensor b({1, 1}, {1.0});
        const DiscreteStep euler = discretize(delta, a, b, DiscretizeMode::euler);
        const DiscreteStep zoh = discretize(delta, a, b, DiscretizeMode::zoh);
        const double e1 = std::abs(euler.a_bar(0, 0, 0) - 2.0);
        const double e2 = std::abs(euler.b_bar(0, 0, 0) - std::log(2.0));
        const double e3 = std::abs(zoh.b_bar(0, 0, 0) - 1.0);
        const Tensor dz({1, 1}, {0.0});
        const DiscreteStep at_zero = discretize(dz, a, b, DiscretizeMode::zoh);
        const double e4 = std::abs(at_zero.a_bar(0, 0, 0) - 1.0) +
                          std::abs(at_zero.b_bar(0, 0, 0));
        const double worst = std::max({e1, e2, e3, e4});
        results.push_back({"discretize closed forms (ln 2 case, delta=0 case)",
                           worst <= 1e-12, "max err " + fmt(worst)});
    }

    {
        bool in_range = true;
        for (int i = 0; i < 64; ++i) {
            Tensor delta({4, 3});
            for (std::size_t k = 0; k < delta.size(); ++k)
                delta.data()[k] = rng.uniform(0.0, 4.0);
            Tensor a({3, 5});
            for (std::size_t k = 0; k < a.size(); ++k)
                a.data()[k] = -std::exp(rng.uniform(-3.0, 1.5));
            Tensor b({4, 5});
            const DiscreteStep step = discretize(delta, a, b, DiscretizeMode::euler);
            for (std::size_t k = 0; k < step.a_bar.size(); ++k) {
                const double v = step.a_bar.data()[k];
                if (!(v > 0.0 && v <= 1.0)) in_range = false;
            }
        }
        results.push_back({"decay bound: a_bar in (0,1] for A<0, delta>=0", in_range, ""});
    }

    {
        // ZOH-Euler discrepancy is O(delta): halving delta halves it.
        auto discrepancy = [&](double dt) {
            Tensor delta({1, 1}, {dt});
            Tensor a({1, 1}, {-1.3});
            Tensor b({1, 1}, {0.7});
            const DiscreteStep e = discretize(delta, a, b, DiscretizeMode::euler);
            const DiscreteStep z = discretize(delta, a, b, DiscretizeMode::zoh);
            return std::abs(z.b_bar(0, 0, 0) - e.b_bar(0, 0, 0)) /
                   std::abs(e.b_bar(0, 0, 0));
        };
        const double r1 = discrepancy(1e-3);
        const double r2 = discrepancy(5e-4);
        const double ratio = r1 / r2;
        results.push_back({"zoh/euler discrepancy halves with delta",
                           ratio > 1.8 && ratio < 2.2, "ratio " + fmt(ratio)});
    }

    {
        double worst = 0.0;
        for (int i = 0; i < 16; ++i) {
            ScanCase sc = random_scan_case(rng, 64, 3, 4, true);
            Tensor x2({64, 3});
            for (std::size_t k = 0; k < x2.size(); ++k) x2.data()[k] = rng.symmetric(1.0);
            const Tensor lhs = selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq,
                                                  add(sc.x, x2), sc.d);
            const Tensor rhs =
                add(selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d),
                    selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq, x2, sc.d));
            worst = std::max(worst, max_abs_diff(lhs, rhs));
        }
        results.push_back({"scan linearity in x", worst <= 1e-12, "max dev " + fmt(worst)});
    }

    {
        bool causal = true;
        for (int i = 0; i < 8; ++i) {
            ScanCase sc = random_scan_case(rng, 48, 2, 3, false);
            const Tensor base = selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d);
            const std::size_t t = 1 + rng.index(47);
            Tensor x2 = sc.x;
            x2(t, rng.index(2)) += 0.751;
            const Tensor bumped = selective_scan_ref(sc.a_bar, sc.b_bar, sc.c_seq, x2, sc.d);
            if (std::memcmp(base.data(), bumped.data(), t * 2 * sizeof(double)) != 0)
                causal = false;
        }
        results.push_back({"scan causality (prefix bit-identical)", causal, ""});
    }

    return results;
}

std::vector<CheckResult> verify_grad_suite(const GradSuiteOptions& opt) {
    std::vector<CheckResult> results;
    Rng rng(opt.seed);

    {
        double worst = 0.0;
        for (std::size_t i = 0; i < opt.scan_cases; ++i) {
            const std::size_t len = 2 + rng.index(12);
            const std::size_t channels = 1 + rng.index(3);
            const std::size_t hidden = 1 + rng.index(4);
            ScanCase sc = random_scan_case(rng, len, channels, hidden, i % 2 == 0);
            Tensor dy({len, channels});
            for (std::size_t k = 0; k < dy.size(); ++k) dy.data()[k] = rng.symmetric(1.0);
            const ScanGradients g =
                selective_scan_backward(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d, dy);
            worst = std::max(worst, rel_error(g.a_bar, fd_gradient(sc, sc.a_bar, dy)));
            worst = std::max(worst, rel_error(g.b_bar, fd_gradient(sc, sc.b_bar, dy)));
            worst = std::max(worst, rel_error(g.c_seq, fd_gradient(sc, sc.c_seq, dy)));
            worst = std::max(worst, rel_error(g.x, fd_gradient(sc, sc.x, dy)));
            if (!sc.d.empty())
                worst = std::max(worst, rel_error(g.d_skip, fd_gradient(sc, sc.d, dy)));
        }
        results.push_back({"scan adjoint vs central finite differences",
                           worst <= 1e-5,
                           "max rel err " + fmt(worst) + " over " +
                               std::to_string(opt.scan_cases) + " cases"});
    }

    {
        double worst = 0.0;
        for (std::size_t i = 0; i < opt.loss_cases; ++i) {
            const std::size_t k = i % 3 == 0 ? 1000 : 2 + rng.index(64);
            std::vector<double> logits(k);
            for (double& v : logits) v = rng.symmetric(4.0);
            const PerceptionLoss loss = perception_loss(logits);
            double diff = 0.0, scale = 1.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double saved = logits[j];
                const double step = 1e-5 * std::max(1.0, std::abs(saved));
                logits[j] = saved + step;
                const double hi = perception_loss(logits).value;
                logits[j] = saved - step;
                const double lo = perception_loss(logits).value;
                logits[j] = saved;
                const double fd = (hi - lo) / (2.0 * step);
                diff = std::max(diff, std::abs(loss.grad[j] - fd));
                scale = std::max(scale, std::abs(fd));
            }
            worst = std::max(worst, diff / scale);
        }
        results.push_back({"perception loss gradient vs finite differences",
                           worst <= 1e-6,
                           "max rel err " + fmt(worst) + " over " +
                               std::to_string(opt.loss_cases) + " cases"});
    }

    {
        ScanCase sc = random_scan_case(rng, 6, 2, 3, true);
        const Tensor zero_dy({6, 2});
        const ScanGradients g =
            selective_scan_backward(sc.a_bar, sc.b_bar, sc.c_seq, sc.x, sc.d, zero_dy);
        const bool all_zero = max_abs_diff(g.a_bar, Tensor({6, 2, 3})) == 0.0 &&
                              max_abs_diff(g.b_bar, Tensor({6, 2, 3})) == 0.0 &&
                              max_abs_diff(g.c_seq, Tensor({6, 3})) == 0.0 &&
                              max_abs_diff(g.x, Tensor({6, 2})) == 0.0 &&
                              max_abs_diff(g.d_skip, Tensor({2})) == 0.0;
        results.push_back({"zero dy gives zero gradients", all_zero, ""});
    }

    return results;
}

std::vector<CheckResult> verify_roundtrip_suite(const std::string& tmpdir,
                                                std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::vector<CheckResult> results;
    Rng rng(seed);
    fs::create_directories(tmpdir);

    {
        bool exact = true;
        for (int i = 0; i < 24; ++i) {
            const std::size_t h = 1 + rng.index(16);
            const std::size_t w = 1 + rng.index(16);
            const std::size_t c = 1 + rng.index(8);
            const Tensor grid = dyadic_grid(rng, h, w, c);
            for (Direction d : kDirections) {
                const Tensor back = unflatten_direction(flatten_direction(grid, d));
                if (max_abs_diff(back, grid) != 0.0) exact = false;
            }
        }
        results.push_back({"flatten/unflatten identity, all four directions", exact, ""});
    }

    {
        // Index-level bijectivity of every direction order.
        bool bijective = true;
        for (Direction d : kDirections) {
            const std::size_t h = 5, w = 7;
            std::vector<bool> seen(h * w, false);
            for (std::size_t l = 0; l < h * w; ++l) {
                const std::size_t off = direction_offset(d, l, h, w);
                if (off >= h * w || seen[off]) bijective = false;
                else seen[off] = true;
            }
        }
        results.push_back({"direction orders are permutations", bijective, ""});
    }

    {
        bool exact = true;
        for (int i = 0; i < 16; ++i) {
            const std::size_t len = 1 + rng.index(32);
            const std::size_t c = 1 + rng.index(6);
            Tensor a({len, c}), b({len, c});
            for (std::size_t k = 0; k < a.size(); ++k) {
                a.data()[k] = rng.symmetric(2.0);
                b.data()[k] = rng.symmetric(2.0);
            }
            auto [ra, rb] = deinterleave(interleave(a, b));
            if (max_abs_diff(ra, a) != 0.0 || max_abs_diff(rb, b) != 0.0) exact = false;
        }
        results.push_back({"deinterleave of interleave is the identity", exact, ""});
    }

    {
        bool exact = true;
        for (int i = 0; i < 12; ++i) {
            const std::size_t h = 1 + rng.index(16);
            const std::size_t w = 1 + rng.index(16);
            const std::size_t c = 1 + rng.index(8);
            const Tensor grid = dyadic_grid(rng, h, w, c);
            std::array<Tensor, 4> seqs;
            for (std::size_t di = 0; di < 4; ++di) {
                const Tensor f = flatten_direction(grid, kDirections[di]).values;
                seqs[di] = interleave(f, f);
            }
            auto [t_ir, t_vi] = recover(seqs[0], seqs[1], seqs[2], seqs[3], h, w);
            const Tensor four = scale(grid, 4.0);
            if (max_abs_diff(t_ir, four) != 0.0 || max_abs_diff(t_vi, four) != 0.0)
                exact = false;
        }
        results.push_back({"recover of identity flattens equals 4x input", exact, ""});
    }

    {
        const std::string path = (fs::path(tmpdir) / "roundtrip.pgm").string();
        Tensor img({5, 9});
        for (std::size_t i = 0; i < img.size(); ++i)
            img.data()[i] = static_cast<double>(rng.index(256)) / 255.0;
        write_image(path, img);
        const std::string first = read_file(path);
        write_image(path, read_image(path).y);
        const bool ok = first == read_file(path);
        results.push_back({"pgm write/read/write byte-identical", ok, ""});
    }

    {
        const std::string path = (fs::path(tmpdir) / "roundtrip.ppm").string();
        std::string file = "P6\n6 4\n255\n";
        for (int i = 0; i < 6 * 4 * 3; ++i)
            file.push_back(static_cast<char>(rng.index(256)));
        atomic_write_file(path, file);
        const Image img = read_image(path);
        write_image(path, img.y, &img.cb, &img.cr);
        results.push_back({"ppm read/write byte-identical", file == read_file(path), ""});
    }

    {
        FusionConfig cfg;
        cfg.n_layers = 2;
        cfg.k_blocks = 1;
        cfg.vss_counts = {1, 1};
        cfg.channels = {4, 8};
        cfg.hidden = 3;
        cfg.seed = seed;
        const ModelWeights w = init_weights(cfg);
        const std::string path = (fs::path(tmpdir) / "roundtrip.s4fw").string();
        save_weights(path, w);
        const std::string first = read_file(path);
        save_weights(path, load_weights(path));
        const bool ok = first == read_file(path);
        results.push_back({"weights save/load/save byte-identical", ok, ""});

        std::string corrupted = first;
        corrupted.back() = static_cast<char>(corrupted.back() ^ 0x5A);
        bool crc_caught = false;
        try {
            decode_tensors(corrupted, "corrupted");
        } catch (const std::runtime_error& e) {
            crc_caught = std::string(e.what()).find("crc") != std::string::npos;
        }
        results.push_back({"corrupted container rejected via crc", crc_caught, ""});
    }

    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const CheckResult& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace s4f

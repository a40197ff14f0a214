// s4fusion command line: weight initialization, image fusion, oracle
// verification, scan benchmarking and the loss/metric reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "s4f/bench.hpp"
#include "s4f/config.hpp"
#include "s4f/image_io.hpp"
#include "s4f/loss.hpp"
#include "s4f/network.hpp"
#include "s4f/verify.hpp"
#include "s4f/weights_io.hpp"

namespace {

using nlohmann::json;

void emit(const std::string& path, const std::string& content) {
    if (path.empty())
        std::cout << content;
    else
        s4f::atomic_write_file(path, content);
}

s4f::Tensor channel_mean_map(const s4f::Tensor& grid) {
    const std::size_t h = grid.extent(0), w = grid.extent(1), c = grid.extent(2);
    s4f::Tensor out({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double acc = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) acc += grid(i, j, ch);
            out(i, j) = acc / static_cast<double>(c);
        }
    double lo = out.data()[0], hi = out.data()[0];
    for (std::size_t i = 0; i < out.size(); ++i) {
        lo = std::min(lo, out.data()[i]);
        hi = std::max(hi, out.data()[i]);
    }
    if (hi > lo)
        for (std::size_t i = 0; i < out.size(); ++i)
            out.data()[i] = (out.data()[i] - lo) / (hi - lo);
    else
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = 0.0;
    return out;
}

json metrics_json(const s4f::Tensor& img) {
    const s4f::QualityMetrics m = s4f::quality_metrics(img);
    return json{{"sf", m.sf}, {"ag", m.ag}};
}

int print_suite(const std::vector<s4f::CheckResult>& results) {
    for (const s4f::CheckResult& r : results)
        std::printf("[%s] %s%s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.empty() ? "" : " — ", r.detail.c_str());
    return s4f::all_passed(results) ? 0 : 1;
}

std::vector<std::size_t> parse_lengths(const std::string& list) {
    std::vector<std::size_t> lengths;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) lengths.push_back(std::stoull(item));
    }
    s4f::require(!lengths.empty(), "bench-scan: empty --lengths list");
    return lengths;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "s4fusion — infrared/visible selective-scan image fusion toolkit.\n"
        "Images are binary PGM (P5) or PPM (P6), maxval 255; color inputs are\n"
        "fused on luminance with the visible chroma copied to the output.\n"
        "JSON/CSV schemas emitted by the subcommands are stable; see each\n"
        "subcommand's --help."};
    app.require_subcommand(1);

    // init-weights
    std::string iw_config, iw_out;
    std::uint64_t iw_seed = 0;
    bool iw_seed_set = false;
    auto* iw = app.add_subcommand("init-weights",
                                  "Write a seeded S4FW weights file for a config");
    iw->add_option("--config", iw_config, "run config JSON (defaults when omitted)");
    iw->add_option("--seed", iw_seed, "override the config seed")
        ->each([&](const std::string&) { iw_seed_set = true; });
    iw->add_option("--out", iw_out, "output .s4fw path")->required();

    // fuse
    std::string fu_ir, fu_vis, fu_weights, fu_out, fu_metrics, fu_dump;
    auto* fu = app.add_subcommand("fuse", "Fuse an infrared/visible image pair");
    fu->add_option("--ir", fu_ir, "infrared image (PGM/PPM)")->required();
    fu->add_option("--vis", fu_vis, "visible image (PGM/PPM)")->required();
    fu->add_option("--weights", fu_weights, "S4FW weights file")->required();
    fu->add_option("--out", fu_out, "fused output image")->required();
    fu->add_option("--metrics", fu_metrics,
                   "write SF/AG JSON {fused:{sf,ag}, ir:{...}, vis:{...}}");
    fu->add_option("--dump-features", fu_dump,
                   "directory for per-layer feature PGMs "
                   "(layer<l>_{ir,vi,fused}.pgm, channel-mean, min-max scaled)");

    // verify
    std::string ve_suite = "all";
    auto* ve = app.add_subcommand("verify", "Run oracle suites; nonzero exit on failure");
    ve->add_option("--suite", ve_suite, "scan | grad | roundtrip | all")
        ->check(CLI::IsMember({"scan", "grad", "roundtrip", "all"}));

    // bench-scan
    std::string bs_lengths = "4096,8192,16384,32768,65536", bs_out, bs_dtype = "f64";
    std::size_t bs_channels = 4, bs_hidden = 16, bs_chunk = 64;
    int bs_reps = 5;
    auto* bs = app.add_subcommand("bench-scan",
                                  "Time the fused discretize+scan step; CSV L,ns_per_element");
    bs->add_option("--lengths", bs_lengths, "comma-separated sequence lengths");
    bs->add_option("--channels", bs_channels, "channel count");
    bs->add_option("--hidden", bs_hidden, "hidden state size");
    bs->add_option("--chunk", bs_chunk, "chunk size");
    bs->add_option("--reps", bs_reps, "timed repetitions per length (min taken)");
    bs->add_option("--dtype", bs_dtype, "f64 | f32")
        ->check(CLI::IsMember({"f64", "f32"}));
    bs->add_option("--out", bs_out, "CSV output path (stdout when omitted)");

    // stats-delta
    std::string sd_weights, sd_ir, sd_vis, sd_out;
    auto* sd = app.add_subcommand(
        "stats-delta",
        "Per-modality time-step means per layer/block; CSV "
        "layer,block,modality,pre_mean,post_mean");
    sd->add_option("--weights", sd_weights, "S4FW weights file")->required();
    sd->add_option("--ir", sd_ir, "infrared image")->required();
    sd->add_option("--vis", sd_vis, "visible image")->required();
    sd->add_option("--out", sd_out, "CSV output path (stdout when omitted)");

    // metrics
    std::string me_image, me_out, me_entropy_out;
    std::vector<std::string> me_entropy;
    std::size_t me_bins = 20;
    std::uint64_t me_provider_seed = 0;
    auto* me = app.add_subcommand("metrics",
                                  "SF/AG of one image (JSON {sf,ag}) or an entropy "
                                  "histogram over several (CSV entropy,count)");
    me->add_option("--image", me_image, "image for the SF/AG report");
    me->add_option("--out", me_out, "JSON output path (stdout when omitted)");
    me->add_option("--entropy", me_entropy, "images for the entropy histogram");
    me->add_option("--bins", me_bins, "histogram bin count over [0, ln K]");
    me->add_option("--provider-seed", me_provider_seed, "logits provider seed");
    me->add_option("--entropy-out", me_entropy_out, "CSV output path (stdout when omitted)");

    // loss
    std::string lo_fused, lo_ir, lo_vis, lo_out;
    double lo_a1 = 15.0, lo_a2 = 15.0, lo_a3 = 15.0;
    std::uint64_t lo_provider_seed = 0;
    auto* lo = app.add_subcommand(
        "loss",
        "Full objective breakdown JSON {per,l1,ssim,grad,omega_ir,omega_vi,"
        "alpha1,alpha2,alpha3,total}");
    lo->add_option("--fused", lo_fused, "fused image")->required();
    lo->add_option("--ir", lo_ir, "infrared image")->required();
    lo->add_option("--vis", lo_vis, "visible image")->required();
    lo->add_option("--alpha1", lo_a1, "L1 weight");
    lo->add_option("--alpha2", lo_a2, "SSIM weight");
    lo->add_option("--alpha3", lo_a3, "gradient weight");
    lo->add_option("--provider-seed", lo_provider_seed, "logits provider seed");
    lo->add_option("--out", lo_out, "JSON output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*iw) {
            s4f::RunConfig cfg;
            if (!iw_config.empty()) cfg = s4f::run_config_from_file(iw_config);
            if (iw_seed_set) cfg.net.seed = iw_seed;
            s4f::save_weights(iw_out, s4f::init_weights(cfg.net));
            return 0;
        }

        if (*fu) {
            const s4f::Image ir = s4f::read_image(fu_ir);
            const s4f::Image vis = s4f::read_image(fu_vis);
            const s4f::ModelWeights weights = s4f::load_weights(fu_weights);
            s4f::FuseTrace trace;
            const s4f::Tensor fused =
                s4f::fuse_forward(ir.y, vis.y, weights,
                                  fu_dump.empty() ? nullptr : &trace);
            if (vis.colorspace == s4f::ColorSpace::ycbcr)
                s4f::write_image(fu_out, fused, &vis.cb, &vis.cr);
            else
                s4f::write_image(fu_out, fused);
            if (!fu_metrics.empty()) {
                json report{{"fused", metrics_json(fused)},
                            {"ir", metrics_json(ir.y)},
                            {"vis", metrics_json(vis.y)}};
                emit(fu_metrics, report.dump(2) + "\n");
            }
            if (!fu_dump.empty()) {
                std::filesystem::create_directories(fu_dump);
                for (std::size_t li = 0; li < trace.feats.size(); ++li) {
                    const std::string base =
                        (std::filesystem::path(fu_dump) /
                         ("layer" + std::to_string(li + 1)))
                            .string();
                    s4f::write_image(base + "_ir.pgm", channel_mean_map(trace.feats[li].ir));
                    s4f::write_image(base + "_vi.pgm", channel_mean_map(trace.feats[li].vi));
                    s4f::write_image(base + "_fused.pgm", channel_mean_map(trace.fused[li]));
                }
            }
            return 0;
        }

        if (*ve) {
            std::vector<s4f::CheckResult> results;
            const std::string tmpdir =
                (std::filesystem::temp_directory_path() / "s4f_verify").string();
            if (ve_suite == "scan" || ve_suite == "all") {
                auto r = s4f::verify_scan_suite();
                results.insert(results.end(), r.begin(), r.end());
            }
            if (ve_suite == "grad" || ve_suite == "all") {
                auto r = s4f::verify_grad_suite();
                results.insert(results.end(), r.begin(), r.end());
            }
            if (ve_suite == "roundtrip" || ve_suite == "all") {
                auto r = s4f::verify_roundtrip_suite(tmpdir);
                results.insert(results.end(), r.begin(), r.end());
            }
            return print_suite(results);
        }

        if (*bs) {
            s4f::BenchOptions opt;
            opt.lengths = parse_lengths(bs_lengths);
            opt.channels = bs_channels;
            opt.hidden = bs_hidden;
            opt.chunk = bs_chunk;
            opt.reps = bs_reps;
            opt.use_f32 = bs_dtype == "f32";
            const std::vector<s4f::BenchPoint> points = s4f::bench_scan(opt);
            emit(bs_out, s4f::bench_csv(points));
            std::fprintf(stderr, "bench-scan: log-log slope %.3f, max/min ratio %.3f\n",
                         s4f::bench_loglog_slope(points),
                         s4f::bench_max_min_ratio(points));
            return 0;
        }

        if (*sd) {
            const s4f::ModelWeights weights = s4f::load_weights(sd_weights);
            const s4f::Image ir = s4f::read_image(sd_ir);
            const s4f::Image vis = s4f::read_image(sd_vis);
            emit(sd_out, s4f::delta_stats_csv(s4f::delta_stats(weights, ir.y, vis.y)));
            return 0;
        }

        if (*me) {
            if (me_image.empty() && me_entropy.empty())
                throw std::invalid_argument("metrics: need --image or --entropy");
            if (!me_image.empty()) {
                emit(me_out, metrics_json(s4f::read_image(me_image).y).dump(2) + "\n");
            }
            if (!me_entropy.empty()) {
                std::vector<s4f::Tensor> images;
                for (const std::string& p : me_entropy)
                    images.push_back(s4f::read_image(p).y);
                const s4f::LogitsProvider provider =
                    s4f::make_pooled_random_provider(me_provider_seed);
                emit(me_entropy_out, s4f::entropy_histogram_csv(
                                         s4f::entropy_histogram(images, provider, me_bins)));
            }
            return 0;
        }

        if (*lo) {
            const s4f::Tensor fused = s4f::read_image(lo_fused).y;
            const s4f::Tensor ir = s4f::read_image(lo_ir).y;
            const s4f::Tensor vis = s4f::read_image(lo_vis).y;
            const s4f::LogitsProvider provider =
                s4f::make_pooled_random_provider(lo_provider_seed);
            const double l_per = s4f::perception_loss(provider.eval(fused)).value;
            const s4f::FidelityResult fid = s4f::weighted_fidelity(fused, ir, vis);
            const double l_grad = s4f::gradient_loss(fused, ir, vis);
            const s4f::LossWeights weights{lo_a1, lo_a2, lo_a3};
            json report{{"per", l_per},
                        {"l1", fid.l1},
                        {"ssim", fid.ssim_loss},
                        {"grad", l_grad},
                        {"omega_ir", fid.omega_ir},
                        {"omega_vi", fid.omega_vi},
                        {"alpha1", lo_a1},
                        {"alpha2", lo_a2},
                        {"alpha3", lo_a3},
                        {"total", s4f::total_loss(l_per, fid.l1, fid.ssim_loss,
                                                  l_grad, weights)}};
            emit(lo_out, report.dump(2) + "\n");
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

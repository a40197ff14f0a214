#include "s4f/config.hpp"

#include <set>

#include <json.hpp>

#include "s4f/image_io.hpp"

namespace s4f {

using nlohmann::json;

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    require(j.is_object(), "config: top level must be a JSON object");

    static const std::set<std::string> known{
        "n_layers", "k_blocks",       "vss_counts", "channels",
        "patch_size", "overlap",      "hidden",     "discretization",
        "skip_d",   "fusion_mode",    "seed",       "chunk",
        "provider_seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        require(known.count(key) != 0, "config: unknown key '" + key + "'");
    }

    RunConfig cfg;
    FusionConfig& net = cfg.net;
    if (j.contains("n_layers")) net.n_layers = j["n_layers"].get<std::size_t>();
    if (j.contains("k_blocks")) net.k_blocks = j["k_blocks"].get<std::size_t>();
    if (j.contains("vss_counts"))
        net.vss_counts = j["vss_counts"].get<std::vector<std::size_t>>();
    else if (j.contains("n_layers"))
        net.vss_counts.assign(net.n_layers, 1);
    if (j.contains("channels"))
        net.channels = j["channels"].get<std::vector<std::size_t>>();
    if (j.contains("patch_size")) net.patch_size = j["patch_size"].get<std::size_t>();
    if (j.contains("overlap")) net.overlap = j["overlap"].get<std::size_t>();
    if (j.contains("hidden")) net.hidden = j["hidden"].get<std::size_t>();
    if (j.contains("discretization")) {
        const std::string mode = j["discretization"].get<std::string>();
        if (mode == "euler")
            net.mode = DiscretizeMode::euler;
        else if (mode == "zoh")
            net.mode = DiscretizeMode::zoh;
        else
            throw std::invalid_argument("config: discretization must be euler or zoh");
    }
    if (j.contains("skip_d")) net.skip_d = j["skip_d"].get<bool>();
    if (j.contains("fusion_mode")) {
        const std::string mode = j["fusion_mode"].get<std::string>();
        if (mode == "cmsa")
            net.fusion = FusionMode::cmsa;
        else if (mode == "add")
            net.fusion = FusionMode::add;
        else
            throw std::invalid_argument("config: fusion_mode must be cmsa or add");
    }
    if (j.contains("seed")) net.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("chunk")) cfg.chunk = j["chunk"].get<std::size_t>();
    if (j.contains("provider_seed"))
        cfg.provider_seed = j["provider_seed"].get<std::uint64_t>();
    require(cfg.chunk >= 1, "config: chunk must be >= 1");
    net.validate();
    return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
    return run_config_from_json(read_file(path));
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["n_layers"] = cfg.net.n_layers;
    j["k_blocks"] = cfg.net.k_blocks;
    j["vss_counts"] = cfg.net.vss_counts;
    j["channels"] = cfg.net.channels;
    j["patch_size"] = cfg.net.patch_size;
    j["overlap"] = cfg.net.overlap;
    j["hidden"] = cfg.net.hidden;
    j["discretization"] = cfg.net.mode == DiscretizeMode::zoh ? "zoh" : "euler";
    j["skip_d"] = cfg.net.skip_d;
    j["fusion_mode"] = cfg.net.fusion == FusionMode::add ? "add" : "cmsa";
    j["seed"] = cfg.net.seed;
    j["chunk"] = cfg.chunk;
    j["provider_seed"] = cfg.provider_seed;
    return j.dump(2) + "\n";
}

}  // namespace s4f

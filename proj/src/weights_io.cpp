#include "s4f/weights_io.hpp"

#include <array>
#include <cstring>
#include <set>

#include "s4f/image_io.hpp"

namespace s4f {

std::uint32_t crc32(const void* data, std::size_t size) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i)
        crc = table[(crc ^ bytes[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

[[noreturn]] void container_error(const std::string& origin, const std::string& what) {
    throw std::runtime_error(origin + ": " + what);
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t& pos,
                      const std::string& origin) {
    if (buf.size() - pos < 4) container_error(origin, "truncated container");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t get_u64(const std::string& buf, std::size_t& pos,
                      const std::string& origin) {
    if (buf.size() - pos < 8) container_error(origin, "truncated container");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kDtypeF64 = 1;

}  // namespace

std::string encode_tensors(const TensorMap& tensors) {
    std::string out;
    out += "S4FW";
    put_u32(out, kWeightFileVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        require(!tensor.empty(), "weights: cannot serialize empty tensor " + name);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(kDtypeF64));
        put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d = 0; d < tensor.rank(); ++d)
            put_u64(out, tensor.extent(d));
        while (out.size() % 8 != 0) out.push_back('\0');
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &tensor.data()[i], sizeof bits);
            put_u64(out, bits);
        }
    }
    put_u32(out, crc32(out.data(), out.size()));
    return out;
}

TensorMap decode_tensors(const std::string& buf, const std::string& origin) {
    if (buf.size() < 16) container_error(origin, "truncated container");
    if (buf.compare(0, 4, "S4FW") != 0) container_error(origin, "bad magic");
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(
                          static_cast<unsigned char>(buf[buf.size() - 4 + i]))
                      << (8 * i);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        container_error(origin, "crc mismatch");

    std::size_t pos = 4;
    const std::uint32_t version = get_u32(buf, pos, origin);
    if (version != kWeightFileVersion) container_error(origin, "unsupported version");
    const std::uint32_t count = get_u32(buf, pos, origin);
    const std::size_t payload_end = buf.size() - 4;

    TensorMap tensors;
    for (std::uint32_t ti = 0; ti < count; ++ti) {
        const std::uint32_t name_len = get_u32(buf, pos, origin);
        if (payload_end - pos < name_len) container_error(origin, "truncated container");
        std::string name = buf.substr(pos, name_len);
        pos += name_len;
        if (pos >= payload_end) container_error(origin, "truncated container");
        const std::uint8_t dtype = static_cast<std::uint8_t>(buf[pos++]);
        if (dtype != kDtypeF32 && dtype != kDtypeF64)
            container_error(origin, "unknown dtype for tensor " + name);
        const std::uint32_t rank = get_u32(buf, pos, origin);
        if (rank == 0 || rank > 8) container_error(origin, "bad rank for tensor " + name);
        Shape shape(rank);
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<std::size_t>(get_u64(buf, pos, origin));
            if (shape[d] == 0) container_error(origin, "zero extent in tensor " + name);
            if (shape[d] > buf.size() / total)
                container_error(origin, "truncated container");
            total *= shape[d];
        }
        if (pos > payload_end) container_error(origin, "truncated container");
        while (pos % 8 != 0) {
            if (pos >= payload_end) container_error(origin, "truncated container");
            ++pos;
        }
        const std::size_t elem = dtype == kDtypeF64 ? 8 : 4;
        if (payload_end - pos < total * elem) container_error(origin, "truncated container");
        std::vector<double> values(total);
        if (dtype == kDtypeF64) {
            for (std::size_t i = 0; i < total; ++i) {
                std::uint64_t bits = get_u64(buf, pos, origin);
                double v;
                std::memcpy(&v, &bits, sizeof v);
                values[i] = v;
            }
        } else {
            for (std::size_t i = 0; i < total; ++i) {
                std::uint32_t bits = get_u32(buf, pos, origin);
                float v;
                std::memcpy(&v, &bits, sizeof v);
                values[i] = static_cast<double>(v);
            }
        }
        if (!tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values))).second)
            container_error(origin, "duplicate tensor name");
    }
    if (pos != payload_end) container_error(origin, "trailing bytes in container");
    return tensors;
}

void save_tensors(const std::string& path, const TensorMap& tensors) {
    atomic_write_file(path, encode_tensors(tensors));
}

TensorMap load_tensors(const std::string& path) {
    return decode_tensors(read_file(path), path);
}

namespace {

struct Packer {
    TensorMap map;

    void put(const std::string& name, const Tensor& t) {
        require(!t.empty(), "weights: refusing to serialize empty tensor " + name);
        map.emplace(name, t);
    }
    void put_linear(const std::string& prefix, const LinearMap& m) {
        put(prefix + "/weight", m.weight);
        put(prefix + "/bias", m.bias);
    }
    void put_norm(const std::string& prefix, const LayerNormParams& n) {
        put(prefix + "/gamma", n.gamma);
        put(prefix + "/beta", n.beta);
    }
    void put_proj(const std::string& prefix, const SsmProjections& p) {
        put_linear(prefix + "/proj_b", p.to_b);
        put_linear(prefix + "/proj_c", p.to_c);
        put_linear(prefix + "/proj_delta", p.to_delta);
    }
    void put_vss(const std::string& prefix, const VssBlockParams& v, bool skip_d) {
        put_norm(prefix + "/norm_in", v.norm_in);
        put_linear(prefix + "/proj_in", v.proj_in);
        put(prefix + "/dwconv/kernels", v.dw_kernels);
        put(prefix + "/ssm/a_log", v.ssm.a_log);
        put_proj(prefix + "/ssm", v.ssm.proj);
        put(prefix + "/ssm/delta_bias", v.ssm.delta_bias);
        if (skip_d) put(prefix + "/ssm/d_skip", v.ssm.d_skip);
        put_norm(prefix + "/norm_out", v.norm_out);
        put_linear(prefix + "/proj_out", v.proj_out);
    }
    void put_cmsa(const std::string& prefix, const CmsaBlockParams& c, bool skip_d) {
        put_norm(prefix + "/norm_in/ir", c.norm_in_ir);
        put_norm(prefix + "/norm_in/vi", c.norm_in_vi);
        put_linear(prefix + "/proj_in/ir", c.proj_in_ir);
        put_linear(prefix + "/proj_in/vi", c.proj_in_vi);
        put(prefix + "/dwconv/kernels", c.dw_kernels);
        put_linear(prefix + "/mark", c.mark);
        for (std::size_t d = 0; d < 4; ++d) {
            const std::string dp = prefix + "/dir" + std::to_string(d);
            put(dp + "/a_log", c.ssm[d].a_log);
            put_proj(dp + "/ir", c.ssm[d].ir);
            put_proj(dp + "/vi", c.ssm[d].vi);
            put(dp + "/delta_bias", c.ssm[d].delta_bias);
            if (skip_d) put(dp + "/d_skip", c.ssm[d].d_skip);
        }
        put_norm(prefix + "/norm_out/ir", c.norm_out_ir);
        put_norm(prefix + "/norm_out/vi", c.norm_out_vi);
        put_linear(prefix + "/proj_out/ir", c.proj_out_ir);
        put_linear(prefix + "/proj_out/vi", c.proj_out_vi);
    }
};

struct Unpacker {
    const TensorMap& map;
    std::set<std::string> used;

    const Tensor& get(const std::string& name) {
        auto it = map.find(name);
        if (it == map.end())
            throw std::runtime_error("weights: missing tensor " + name);
        used.insert(name);
        return it->second;
    }
    Tensor get_checked(const std::string& name, const Shape& expected) {
        const Tensor& t = get(name);
        if (t.shape() != expected)
            throw std::runtime_error("weights: extent mismatch for " + name);
        return t;
    }
    LinearMap get_linear(const std::string& prefix, std::size_t out, std::size_t in) {
        return LinearMap(get_checked(prefix + "/weight", {out, in}),
                         get_checked(prefix + "/bias", {out}));
    }
    LayerNormParams get_norm(const std::string& prefix, std::size_t c) {
        return {get_checked(prefix + "/gamma", {c}),
                get_checked(prefix + "/beta", {c})};
    }
    SsmProjections get_proj(const std::string& prefix, std::size_t c, std::size_t h) {
        return {get_linear(prefix + "/proj_b", h, c),
                get_linear(prefix + "/proj_c", h, c),
                get_linear(prefix + "/proj_delta", c, c)};
    }
    VssBlockParams get_vss(const std::string& prefix, const FusionConfig& cfg,
                           std::size_t c) {
        VssBlockParams v;
        v.norm_in = get_norm(prefix + "/norm_in", c);
        v.proj_in = get_linear(prefix + "/proj_in", 2 * c, c);
        v.dw_kernels = get_checked(prefix + "/dwconv/kernels", {c, 3, 3});
        v.ssm.a_log = get_checked(prefix + "/ssm/a_log", {c, cfg.hidden});
        v.ssm.proj = get_proj(prefix + "/ssm", c, cfg.hidden);
        v.ssm.delta_bias = get_checked(prefix + "/ssm/delta_bias", {c});
        if (cfg.skip_d) v.ssm.d_skip = get_checked(prefix + "/ssm/d_skip", {c});
        v.norm_out = get_norm(prefix + "/norm_out", c);
        v.proj_out = get_linear(prefix + "/proj_out", c, c);
        return v;
    }
    CmsaBlockParams get_cmsa(const std::string& prefix, const FusionConfig& cfg,
                             std::size_t c) {
        CmsaBlockParams b;
        b.norm_in_ir = get_norm(prefix + "/norm_in/ir", c);
        b.norm_in_vi = get_norm(prefix + "/norm_in/vi", c);
        b.proj_in_ir = get_linear(prefix + "/proj_in/ir", 2 * c, c);
        b.proj_in_vi = get_linear(prefix + "/proj_in/vi", 2 * c, c);
        b.dw_kernels = get_checked(prefix + "/dwconv/kernels", {c, 3, 3});
        b.mark = get_linear(prefix + "/mark", c, 2 * c);
        for (std::size_t d = 0; d < 4; ++d) {
            const std::string dp = prefix + "/dir" + std::to_string(d);
            b.ssm[d].a_log = get_checked(dp + "/a_log", {c, cfg.hidden});
            b.ssm[d].ir = get_proj(dp + "/ir", c, cfg.hidden);
            b.ssm[d].vi = get_proj(dp + "/vi", c, cfg.hidden);
            b.ssm[d].delta_bias = get_checked(dp + "/delta_bias", {c});
            if (cfg.skip_d) b.ssm[d].d_skip = get_checked(dp + "/d_skip", {c});
        }
        b.norm_out_ir = get_norm(prefix + "/norm_out/ir", c);
        b.norm_out_vi = get_norm(prefix + "/norm_out/vi", c);
        b.proj_out_ir = get_linear(prefix + "/proj_out/ir", c, c);
        b.proj_out_vi = get_linear(prefix + "/proj_out/vi", c, c);
        return b;
    }
};

std::string layer_prefix(const std::string& base, std::size_t li) {
    return base + "/l" + std::to_string(li + 1);
}

Tensor scalar_tensor(double v) { return Tensor({1}, {v}); }

}  // namespace

TensorMap weights_to_tensors(const ModelWeights& w) {
    const FusionConfig& cfg = w.cfg;
    Packer p;
    {
        Tensor meta({8});
        meta(0) = static_cast<double>(cfg.n_layers);
        meta(1) = static_cast<double>(cfg.k_blocks);
        meta(2) = static_cast<double>(cfg.patch_size);
        meta(3) = static_cast<double>(cfg.overlap);
        meta(4) = static_cast<double>(cfg.hidden);
        meta(5) = cfg.mode == DiscretizeMode::zoh ? 1.0 : 0.0;
        meta(6) = cfg.fusion == FusionMode::add ? 1.0 : 0.0;
        meta(7) = cfg.skip_d ? 1.0 : 0.0;
        p.put("config/meta", meta);
        Tensor channels({cfg.n_layers});
        Tensor counts({cfg.n_layers});
        for (std::size_t i = 0; i < cfg.n_layers; ++i) {
            channels(i) = static_cast<double>(cfg.channels[i]);
            counts(i) = static_cast<double>(cfg.vss_counts[i]);
        }
        p.put("config/channels", channels);
        p.put("config/vss_counts", counts);
        p.put("config/seed", scalar_tensor(static_cast<double>(cfg.seed)));
    }
    p.put_linear("ope/ir", w.ope_ir);
    p.put_linear("ope/vi", w.ope_vi);
    for (std::size_t li = 0; li < cfg.n_layers; ++li) {
        for (std::size_t g = 0; g < cfg.vss_counts[li]; ++g) {
            const std::string suffix = "/b" + std::to_string(g);
            p.put_vss(layer_prefix("enc/ir", li) + suffix, w.enc_ir[li][g], cfg.skip_d);
            p.put_vss(layer_prefix("enc/vi", li) + suffix, w.enc_vi[li][g], cfg.skip_d);
            p.put_vss(layer_prefix("dec", li) + suffix, w.dec[li][g], cfg.skip_d);
        }
        for (std::size_t k = 0; k < cfg.k_blocks; ++k)
            p.put_cmsa(layer_prefix("cmsa", li) + "/b" + std::to_string(k),
                       w.cmsa_layers[li][k], cfg.skip_d);
    }
    for (std::size_t li = 0; li + 1 < cfg.n_layers; ++li) {
        p.put_linear(layer_prefix("merge/ir", li), w.merge_ir[li]);
        p.put_linear(layer_prefix("merge/vi", li), w.merge_vi[li]);
        p.put_linear(layer_prefix("expand", li), w.expand[li]);
    }
    p.put_linear("final", w.unproject);
    return std::move(p.map);
}

ModelWeights weights_from_tensors(const TensorMap& tensors) {
    Unpacker u{tensors, {}};
    FusionConfig cfg;
    {
        const Tensor& meta = u.get("config/meta");
        if (meta.shape() != Shape{8})
            throw std::runtime_error("weights: extent mismatch for config/meta");
        cfg.n_layers = static_cast<std::size_t>(meta(0));
        cfg.k_blocks = static_cast<std::size_t>(meta(1));
        cfg.patch_size = static_cast<std::size_t>(meta(2));
        cfg.overlap = static_cast<std::size_t>(meta(3));
        cfg.hidden = static_cast<std::size_t>(meta(4));
        cfg.mode = meta(5) != 0.0 ? DiscretizeMode::zoh : DiscretizeMode::euler;
        cfg.fusion = meta(6) != 0.0 ? FusionMode::add : FusionMode::cmsa;
        cfg.skip_d = meta(7) != 0.0;
        const Tensor channels = u.get_checked("config/channels", {cfg.n_layers});
        const Tensor counts = u.get_checked("config/vss_counts", {cfg.n_layers});
        cfg.channels.clear();
        cfg.vss_counts.clear();
        for (std::size_t i = 0; i < cfg.n_layers; ++i) {
            cfg.channels.push_back(static_cast<std::size_t>(channels(i)));
            cfg.vss_counts.push_back(static_cast<std::size_t>(counts(i)));
        }
        cfg.seed = static_cast<std::uint64_t>(u.get_checked("config/seed", {1})(0));
        cfg.validate();
    }
    ModelWeights w;
    w.cfg = cfg;
    const std::size_t pp = cfg.patch_size * cfg.patch_size;
    w.ope_ir = u.get_linear("ope/ir", cfg.channels[0], pp);
    w.ope_vi = u.get_linear("ope/vi", cfg.channels[0], pp);
    w.enc_ir.resize(cfg.n_layers);
    w.enc_vi.resize(cfg.n_layers);
    w.dec.resize(cfg.n_layers);
    w.cmsa_layers.resize(cfg.n_layers);
    for (std::size_t li = 0; li < cfg.n_layers; ++li) {
        const std::size_t c = cfg.channels[li];
        for (std::size_t g = 0; g < cfg.vss_counts[li]; ++g) {
            const std::string suffix = "/b" + std::to_string(g);
            w.enc_ir[li].push_back(u.get_vss(layer_prefix("enc/ir", li) + suffix, cfg, c));
            w.enc_vi[li].push_back(u.get_vss(layer_prefix("enc/vi", li) + suffix, cfg, c));
            w.dec[li].push_back(u.get_vss(layer_prefix("dec", li) + suffix, cfg, c));
        }
        for (std::size_t k = 0; k < cfg.k_blocks; ++k)
            w.cmsa_layers[li].push_back(
                u.get_cmsa(layer_prefix("cmsa", li) + "/b" + std::to_string(k), cfg, c));
    }
    for (std::size_t li = 0; li + 1 < cfg.n_layers; ++li) {
        w.merge_ir.push_back(u.get_linear(layer_prefix("merge/ir", li),
                                          cfg.channels[li + 1], 4 * cfg.channels[li]));
        w.merge_vi.push_back(u.get_linear(layer_prefix("merge/vi", li),
                                          cfg.channels[li + 1], 4 * cfg.channels[li]));
        w.expand.push_back(u.get_linear(layer_prefix("expand", li),
                                        4 * cfg.channels[li], cfg.channels[li + 1]));
    }
    w.unproject = u.get_linear("final", pp, cfg.channels[0]);
    for (const auto& [name, tensor] : tensors) {
        (void)tensor;
        if (!u.used.count(name))
            throw std::runtime_error("weights: unexpected tensor " + name);
    }
    return w;
}

void save_weights(const std::string& path, const ModelWeights& w) {
    save_tensors(path, weights_to_tensors(w));
}

ModelWeights load_weights(const std::string& path) {
    return weights_from_tensors(load_tensors(path));
}

}  // namespace s4f

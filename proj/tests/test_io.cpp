#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "s4f/config.hpp"
#include "s4f/image_io.hpp"
#include "s4f/network.hpp"
#include "s4f/rng.hpp"
#include "s4f/weights_io.hpp"

using namespace s4f;

namespace {

std::string tmp_file(const std::string& name) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "s4f_io_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

FusionConfig small_config(std::uint64_t seed) {
    FusionConfig cfg;
    cfg.n_layers = 2;
    cfg.k_blocks = 1;
    cfg.vss_counts = {1, 1};
    cfg.channels = {2, 4};
    cfg.hidden = 2;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("pgm read scales bytes to [0,1]") {
    const std::string path = tmp_file("four.pgm");
    std::string file = "P5\n2 2\n255\n";
    file.push_back(static_cast<char>(0));
    file.push_back(static_cast<char>(255));
    file.push_back(static_cast<char>(128));
    file.push_back(static_cast<char>(64));
    atomic_write_file(path, file);
    const Image img = read_image(path);
    CHECK(img.colorspace == ColorSpace::gray);
    CHECK(img.y(0, 0) == 0.0);
    CHECK(img.y(0, 1) == 1.0);
    CHECK(img.y(1, 0) == 128.0 / 255.0);
    CHECK(img.y(1, 1) == 64.0 / 255.0);
}

TEST_CASE("pgm header comments are skipped") {
    const std::string path = tmp_file("comment.pgm");
    std::string file = "P5\n# a comment\n2 # inline\n1\n255\n";
    file.push_back(static_cast<char>(10));
    file.push_back(static_cast<char>(20));
    atomic_write_file(path, file);
    const Image img = read_image(path);
    CHECK(img.y.shape() == Shape{1, 2});
    CHECK(img.y(0, 1) == 20.0 / 255.0);
}

TEST_CASE("pgm writer quantizes round-half-up and clamps") {
    const std::string path = tmp_file("write.pgm");
    write_image(path, Tensor({1, 3}, {0.5, -0.5, 1.5}));
    const std::string file = read_file(path);
    const auto* bytes = reinterpret_cast<const unsigned char*>(file.data());
    const std::size_t off = file.size() - 3;
    CHECK(bytes[off] == 128);  // round(0.5 * 255 + 0.5)
    CHECK(bytes[off + 1] == 0);
    CHECK(bytes[off + 2] == 255);
}

TEST_CASE("pgm roundtrip is byte-identical") {
    const std::string path = tmp_file("rt.pgm");
    Rng rng(7);
    std::string file = "P5\n3 2\n255\n";
    for (int i = 0; i < 6; ++i) file.push_back(static_cast<char>(rng.index(256)));
    atomic_write_file(path, file);
    const std::string out = tmp_file("rt_out.pgm");
    write_image(out, read_image(path).y);
    CHECK(read_file(out) == file);
}

TEST_CASE("ppm gray pixels have neutral chroma and identity luminance") {
    const std::string path = tmp_file("gray.ppm");
    std::string file = "P6\n2 1\n255\n";
    for (const unsigned char g : {64, 200})
        for (int i = 0; i < 3; ++i) file.push_back(static_cast<char>(g));
    atomic_write_file(path, file);
    const Image img = read_image(path);
    CHECK(img.colorspace == ColorSpace::ycbcr);
    CHECK(img.y(0, 0) == doctest::Approx(64.0 / 255.0).epsilon(1e-12));
    CHECK(img.y(0, 1) == doctest::Approx(200.0 / 255.0).epsilon(1e-12));
    for (const Tensor* plane : {&img.cb, &img.cr})
        for (std::size_t i = 0; i < plane->size(); ++i)
            CHECK(plane->data()[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ppm roundtrip is byte-identical") {
    const std::string path = tmp_file("rt.ppm");
    Rng rng(11);
    std::string file = "P6\n4 3\n255\n";
    for (int i = 0; i < 36; ++i) file.push_back(static_cast<char>(rng.index(256)));
    atomic_write_file(path, file);
    const Image img = read_image(path);
    const std::string out = tmp_file("rt_out.ppm");
    write_image(out, img.y, &img.cb, &img.cr);
    CHECK(read_file(out) == file);
}

TEST_CASE("image reader rejects malformed input") {
    const std::string path = tmp_file("bad");
    atomic_write_file(path, "P3\n2 2\n255\n");
    CHECK_THROWS_AS(read_image(path), std::runtime_error);
    atomic_write_file(path, "P5\n2 2\n65535\n\0\0\0\0\0\0\0\0");
    CHECK_THROWS_AS(read_image(path), std::runtime_error);
    atomic_write_file(path, std::string("P5\n4 4\n255\n") + "ab");
    CHECK_THROWS_WITH_AS(read_image(path), doctest::Contains("truncated"),
                         std::runtime_error);
}

TEST_CASE("weight container layout for a single scalar") {
    const TensorMap tensors{{"a", Tensor({1}, {-3.75})}};
    const std::string bytes = encode_tensors(tensors);
    // 12B header, 4+1 name, 1 dtype, 4 rank, 8 dim, pad to 32, 8 payload, 4 crc
    CHECK(bytes.size() == 44);
    double value;
    std::memcpy(&value, bytes.data() + 32, sizeof value);
    CHECK(value == -3.75);
    const TensorMap back = decode_tensors(bytes, "scalar");
    CHECK(back.at("a")(0) == -3.75);
}

TEST_CASE("weight container detects corruption, bad magic and bad version") {
    const TensorMap tensors{{"a", Tensor({1}, {1.0})}, {"b", Tensor({2}, {2.0, 3.0})}};
    std::string bytes = encode_tensors(tensors);

    std::string corrupted = bytes;
    corrupted[corrupted.size() - 1] = static_cast<char>(corrupted.back() ^ 0x11);
    CHECK_THROWS_WITH_AS(decode_tensors(corrupted, "t"), doctest::Contains("crc"),
                         std::runtime_error);

    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_tensors(wrong_magic, "t"), doctest::Contains("magic"),
                         std::runtime_error);

    std::string wrong_version = bytes;
    wrong_version[4] = 2;
    const std::uint32_t crc = crc32(wrong_version.data(), wrong_version.size() - 4);
    for (int i = 0; i < 4; ++i)
        wrong_version[wrong_version.size() - 4 + i] =
            static_cast<char>((crc >> (8 * i)) & 0xFF);
    CHECK_THROWS_WITH_AS(decode_tensors(wrong_version, "t"),
                         doctest::Contains("version"), std::runtime_error);
}

TEST_CASE("weight container widens f32 records") {
    std::string bytes = "S4FW";
    put_u32(bytes, 1);  // version
    put_u32(bytes, 1);  // count
    put_u32(bytes, 1);  // name length
    bytes += "a";
    bytes.push_back(0);  // dtype f32
    put_u32(bytes, 1);   // rank
    put_u64(bytes, 2);   // dim
    while (bytes.size() % 8 != 0) bytes.push_back('\0');
    for (const float v : {1.5f, -2.25f}) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        put_u32(bytes, bits);
    }
    put_u32(bytes, crc32(bytes.data(), bytes.size()));
    const TensorMap back = decode_tensors(bytes, "f32");
    CHECK(back.at("a")(0) == 1.5);
    CHECK(back.at("a")(1) == -2.25);
}

TEST_CASE("model weights roundtrip and strict validation") {
    const FusionConfig cfg = small_config(23);
    const ModelWeights w = init_weights(cfg);
    const std::string path = tmp_file("model.s4fw");
    save_weights(path, w);
    const std::string first = read_file(path);
    save_weights(path, load_weights(path));
    CHECK(read_file(path) == first);

    SUBCASE("identical config and seed give an identical file") {
        const std::string again = tmp_file("model2.s4fw");
        save_weights(again, init_weights(small_config(23)));
        CHECK(read_file(again) == first);
        save_weights(again, init_weights(small_config(24)));
        CHECK(read_file(again) != first);
    }
    SUBCASE("extent mismatch is rejected") {
        TensorMap tensors = load_tensors(path);
        tensors["final/bias"] = Tensor({3});
        CHECK_THROWS_WITH_AS(weights_from_tensors(tensors),
                             doctest::Contains("extent mismatch"), std::runtime_error);
    }
    SUBCASE("missing tensors are rejected") {
        TensorMap tensors = load_tensors(path);
        tensors.erase("ope/ir/weight");
        CHECK_THROWS_WITH_AS(weights_from_tensors(tensors),
                             doctest::Contains("missing"), std::runtime_error);
    }
    SUBCASE("unexpected tensors are rejected") {
        TensorMap tensors = load_tensors(path);
        tensors["stray"] = Tensor({1}, {0.0});
        CHECK_THROWS_WITH_AS(weights_from_tensors(tensors),
                             doctest::Contains("unexpected"), std::runtime_error);
    }
}

TEST_CASE("run config JSON parsing") {
    SUBCASE("empty object gives the default architecture") {
        const RunConfig cfg = run_config_from_json("{}");
        CHECK(cfg.net.n_layers == 3);
        CHECK(cfg.net.channels == std::vector<std::size_t>{48, 96, 192});
        CHECK(cfg.net.vss_counts == std::vector<std::size_t>{1, 2, 1});
        CHECK(cfg.net.patch_size == 4);
        CHECK(cfg.net.overlap == 1);
        CHECK(cfg.chunk == 64);
    }
    SUBCASE("unknown keys are rejected") {
        CHECK_THROWS_WITH_AS(run_config_from_json("{\"layers\": 3}"),
                             doctest::Contains("unknown key"), std::invalid_argument);
    }
    SUBCASE("invalid enum values are rejected") {
        CHECK_THROWS_AS(run_config_from_json("{\"discretization\": \"exact\"}"),
                        std::invalid_argument);
        CHECK_THROWS_AS(run_config_from_json("{\"fusion_mode\": \"cat\"}"),
                        std::invalid_argument);
    }
    SUBCASE("architecture invariants are enforced at parse") {
        CHECK_THROWS_AS(run_config_from_json("{\"overlap\": 4}"), std::invalid_argument);
        CHECK_THROWS_AS(
            run_config_from_json("{\"n_layers\": 2, \"channels\": [4, 2]}"),
            std::invalid_argument);
    }
    SUBCASE("json roundtrip preserves all fields") {
        RunConfig cfg;
        cfg.net = small_config(77);
        cfg.net.mode = DiscretizeMode::zoh;
        cfg.net.fusion = FusionMode::add;
        cfg.chunk = 32;
        cfg.provider_seed = 9;
        const RunConfig back = run_config_from_json(run_config_to_json(cfg));
        CHECK(back.net.n_layers == cfg.net.n_layers);
        CHECK(back.net.channels == cfg.net.channels);
        CHECK(back.net.mode == DiscretizeMode::zoh);
        CHECK(back.net.fusion == FusionMode::add);
        CHECK(back.net.seed == 77);
        CHECK(back.chunk == 32);
        CHECK(back.provider_seed == 9);
    }
}

TEST_CASE("atomic writes leave no temp files behind") {
    const std::string path = tmp_file("atomic.bin");
    atomic_write_file(path, "payload");
    CHECK(read_file(path) == "payload");
    CHECK(!std::filesystem::exists(path + ".tmp"));
}

#include <doctest.h>

#include <cmath>

#include "s4f/scan_path.hpp"
#include "test_util.hpp"

using namespace s4f;

TEST_CASE("flatten conventions on a 2x2 grid") {
    // [[a,b],[c,d]] with C = 1
    const Tensor grid({2, 2, 1}, {1, 2, 3, 4});
    auto values = [](const DirectionalSequence& s) {
        return std::vector<double>(s.values.data(), s.values.data() + s.values.size());
    };
    CHECK(values(flatten_direction(grid, Direction::hf)) == std::vector<double>{1, 2, 3, 4});
    CHECK(values(flatten_direction(grid, Direction::vf)) == std::vector<double>{1, 3, 2, 4});
    CHECK(values(flatten_direction(grid, Direction::hb)) == std::vector<double>{4, 3, 2, 1});
    CHECK(values(flatten_direction(grid, Direction::vb)) == std::vector<double>{4, 2, 3, 1});
}

TEST_CASE("flatten/unflatten roundtrips exactly") {
    Rng rng(61);
    for (int trial = 0; trial < 12; ++trial) {
        const Tensor grid = test::random_tensor(
            rng, {1 + rng.index(9), 1 + rng.index(9), 1 + rng.index(5)});
        for (Direction d : kDirections)
            CHECK(max_abs_diff(unflatten_direction(flatten_direction(grid, d)), grid) == 0.0);
    }
}

TEST_CASE("direction orders are permutations and hb/vb reverse hf/vf") {
    const std::size_t h = 4, w = 6, len = h * w;
    for (Direction d : kDirections) {
        std::vector<bool> seen(len, false);
        for (std::size_t l = 0; l < len; ++l) {
            const std::size_t off = direction_offset(d, l, h, w);
            REQUIRE(off < len);
            CHECK(!seen[off]);
            seen[off] = true;
        }
    }
    for (std::size_t l = 0; l < len; ++l) {
        CHECK(direction_offset(Direction::hb, l, h, w) ==
              direction_offset(Direction::hf, len - 1 - l, h, w));
        CHECK(direction_offset(Direction::vb, l, h, w) ==
              direction_offset(Direction::vf, len - 1 - l, h, w));
    }
}

TEST_CASE("interleave is infrared-first and invertible") {
    const Tensor ir({2, 1}, {10, 20});
    const Tensor vi({2, 1}, {-1, -2});
    const Tensor both = interleave(ir, vi);
    CHECK(both(0, 0) == 10);
    CHECK(both(1, 0) == -1);
    CHECK(both(2, 0) == 20);
    CHECK(both(3, 0) == -2);

    auto [back_ir, back_vi] = deinterleave(both);
    CHECK(max_abs_diff(back_ir, ir) == 0.0);
    CHECK(max_abs_diff(back_vi, vi) == 0.0);

    const Tensor one_ir({1, 2}, {1, 2});
    const Tensor one_vi({1, 2}, {3, 4});
    const Tensor pair = interleave(one_ir, one_vi);
    CHECK(pair.extent(0) == 2);
    CHECK(pair(0, 0) == 1);
    CHECK(pair(1, 1) == 4);

    CHECK_THROWS_AS(interleave(ir, one_vi), std::invalid_argument);
}

TEST_CASE("recover sums the four directions") {
    Rng rng(67);
    SUBCASE("identity flattens of one grid give 4x the grid") {
        Tensor grid({3, 5, 2});
        for (std::size_t i = 0; i < grid.size(); ++i)
            grid.data()[i] =
                static_cast<double>(static_cast<std::int64_t>(rng.index(1 << 20)) -
                                    (1 << 19)) *
                0x1.0p-18;
        std::array<Tensor, 4> seqs;
        for (std::size_t di = 0; di < 4; ++di) {
            const Tensor f = flatten_direction(grid, kDirections[di]).values;
            seqs[di] = interleave(f, f);
        }
        auto [t_ir, t_vi] = recover(seqs[0], seqs[1], seqs[2], seqs[3], 3, 5);
        CHECK(max_abs_diff(t_ir, scale(grid, 4.0)) == 0.0);
        CHECK(max_abs_diff(t_vi, scale(grid, 4.0)) == 0.0);
    }
    SUBCASE("zero input gives zero grids") {
        const Tensor zero({2 * 12, 3});
        auto [t_ir, t_vi] = recover(zero, zero, zero, zero, 3, 4);
        CHECK(max_abs_diff(t_ir, Tensor({3, 4, 3})) == 0.0);
        CHECK(max_abs_diff(t_vi, Tensor({3, 4, 3})) == 0.0);
    }
    SUBCASE("single nonzero patch lands in exactly one cell") {
        const std::size_t h = 3, w = 4, len = h * w, l = 5;
        Tensor f_hf({2 * len, 1});
        f_hf(2 * l, 0) = 1.0;  // infrared slot of position l in the hf stream
        const Tensor zero({2 * len, 1});
        auto [t_ir, t_vi] = recover(f_hf, zero, zero, zero, h, w);
        const std::size_t off = direction_offset(Direction::hf, l, h, w);
        for (std::size_t cell = 0; cell < len; ++cell)
            CHECK(t_ir.data()[cell] == (cell == off ? 1.0 : 0.0));
        CHECK(max_abs_diff(t_vi, Tensor({h, w, 1})) == 0.0);
    }
}

TEST_CASE("ss2d_single degenerate and closed-form cases") {
    Rng rng(71);
    SUBCASE("zero C projection and zero skip give zero output") {
        SsmSingleParams p = test::random_single_params(rng, 3, 4);
        p.proj.to_c = LinearMap::zeros(4, 3);
        p.d_skip = Tensor({3});
        const Tensor grid = test::random_tensor(rng, {4, 5, 3});
        CHECK(max_abs_diff(ss2d_single(grid, p, DiscretizeMode::euler),
                           Tensor({4, 5, 3})) == 0.0);
    }
    SUBCASE("1x1 grid equals four identical single-step scans") {
        SsmSingleParams p = test::random_single_params(rng, 1, 1);
        const double v = 0.37;
        const Tensor grid({1, 1, 1}, {v});
        // hand recurrence for one step
        const double b = p.proj.to_b.weight(0, 0) * v + p.proj.to_b.bias(0);
        const double cs = p.proj.to_c.weight(0, 0) * v + p.proj.to_c.bias(0);
        const double pre = p.proj.to_delta.weight(0, 0) * v + p.proj.to_delta.bias(0) +
                           p.delta_bias(0);
        const double dt = softplus_scalar(pre);
        const double a = -std::exp(p.a_log(0, 0));
        const double h = dt * b * v;  // a_bar * 0 + b_bar * x, euler
        const double y = cs * h + p.d_skip(0) * v;
        (void)a;
        const Tensor out = ss2d_single(grid, p, DiscretizeMode::euler);
        CHECK(out(0, 0, 0) == doctest::Approx(4.0 * y).epsilon(1e-12));
    }
    SUBCASE("output shape equals input shape") {
        SsmSingleParams p = test::random_single_params(rng, 4, 3);
        const Tensor grid = test::random_tensor(rng, {5, 7, 4});
        const Tensor out = ss2d_single(grid, p, DiscretizeMode::euler);
        CHECK(out.shape() == grid.shape());
        CHECK(all_finite(out));
    }
}

TEST_CASE("ss2d_single on a constant grid is symmetric under 180-degree flips") {
    const std::size_t c = 1, hidden = 1;
    SsmSingleParams p;
    p.a_log = Tensor({c, hidden});  // A = -1
    p.proj.to_b = LinearMap(Tensor::full({hidden, c}, 1.0), Tensor({hidden}));
    p.proj.to_c = LinearMap(Tensor::full({hidden, c}, 1.0), Tensor({hidden}));
    p.proj.to_delta = LinearMap(Tensor::full({c, c}, 1.0), Tensor({c}));
    p.delta_bias = Tensor({c});
    p.d_skip = Tensor::full({c}, 1.0);
    const std::size_t h = 4, w = 5;
    const Tensor grid = Tensor::full({h, w, c}, 0.6);
    const Tensor out = ss2d_single(grid, p, DiscretizeMode::euler);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            CHECK(out(i, j, 0) ==
                  doctest::Approx(out(h - 1 - i, w - 1 - j, 0)).epsilon(1e-12));
}

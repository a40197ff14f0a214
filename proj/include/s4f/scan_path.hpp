// Scanning geometry: four-direction flatten/unflatten of [H,W,C] patch
// grids, modality interleaving and its inverse, the four-direction
// recover step, and the single-modality SS2D used inside VSS blocks.
//
// hf is row-major order, vf column-major; hb/vb are the exact reversals
// of hf/vf, so every flatten is a permutation and unflatten inverts it.
#pragma once

#include <array>
#include <cstddef>
#include <utility>

#include "s4f/ssm.hpp"
#include "s4f/tensor.hpp"

namespace s4f {

enum class Direction { hf, hb, vf, vb };

inline constexpr std::array<Direction, 4> kDirections{
    Direction::hf, Direction::hb, Direction::vf, Direction::vb};

const char* direction_name(Direction d);

// Row-major grid offset of sequence position l for direction d.
std::size_t direction_offset(Direction d, std::size_t l, std::size_t grid_h,
                             std::size_t grid_w);

struct DirectionalSequence {
    Direction direction;
    std::size_t grid_h;
    std::size_t grid_w;
    Tensor values;  // [L,C], L = grid_h * grid_w
};

DirectionalSequence flatten_direction(const Tensor& grid /*[H,W,C]*/, Direction d);
Tensor unflatten_direction(const DirectionalSequence& seq);  // -> [H,W,C]

// out[2i] = ir[i], out[2i+1] = vi[i]; infrared first.
Tensor interleave(const Tensor& seq_ir /*[L,C]*/, const Tensor& seq_vi);
std::pair<Tensor, Tensor> deinterleave(const Tensor& x /*[2L,C]*/);

// Deinterleaves each direction's [2L,C] sequence, unflattens along its own
// direction and sums the four grids per modality (fixed hf+hb+vf+vb order).
std::pair<Tensor, Tensor> recover(const Tensor& f_hf, const Tensor& f_hb,
                                  const Tensor& f_vf, const Tensor& f_vb,
                                  std::size_t grid_h, std::size_t grid_w);

// Plain SS2D: flatten in four directions, selective-scan each with the
// shared parameter set, unflatten and sum.
Tensor ss2d_single(const Tensor& grid, const SsmSingleParams& params,
                   DiscretizeMode mode);

}  // namespace s4f

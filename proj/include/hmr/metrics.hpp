#pragma once

#include "hmr/body.hpp"
#include "hmr/tensor.hpp"

namespace hmr {

// Subtracts the root joint's position from every joint of its frame.
Tensor root_align(const Tensor& seq, int J, int root_index = 0);

// Mean per-joint position error in millimeters over root-aligned [T*J, 3]
// sequences (alignment is the caller's contract).
double mpjpe(const Tensor& pred, const Tensor& gt);

// Per-frame similarity (Procrustes) alignment of pred onto gt, then MPJPE.
double pa_mpjpe(const Tensor& pred, const Tensor& gt, int J);

// Mean per-vertex error in millimeters after aligning both meshes by their
// regressed root joint.
double mpvpe(const Tensor& pred, const Tensor& gt, const MiniBody& body);

// Mean second-difference (acceleration) mismatch in mm/s^2.
double accel_error(const Tensor& pred, const Tensor& gt, int J, double fps = 25.0);

}  // namespace hmr

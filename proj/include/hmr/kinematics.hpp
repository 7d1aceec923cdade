#pragma once

#include <array>
#include <string>
#include <vector>

#include "hmr/tensor.hpp"

namespace hmr {

// Skeleton as a parent array; parent[root] = -1. bone_rest is each joint's
// rest offset from its parent in meters (root entry is its offset from the
// origin).
struct KinematicTree {
    std::vector<int> parent;
    std::vector<std::array<double, 3>> bone_rest;
    std::vector<std::string> names;

    int joints() const { return static_cast<int>(parent.size()); }
    int root() const;
    // exactly one root, indices in range, every joint reaches the root
    void validate() const;
    // per-joint children, ascending index
    std::vector<std::vector<int>> children() const;
};

// A token permutation plus the segment boundaries (in permuted space) at
// which scans and causal convolutions reset their state.
struct ScanOrder {
    std::vector<int> perm;     // position -> token
    std::vector<int> inverse;  // token -> position
    std::vector<int> segments;  // {0, ..., L}

    int length() const { return static_cast<int>(perm.size()); }
    static ScanOrder from_perm(std::vector<int> perm, std::vector<int> segments = {});
    void validate() const;
};

// Depth-first traversal from the root, descending each limb fully before the
// next sibling (ascending joint index); one segment.
ScanOrder kinematic_scan_order(const KinematicTree& tree);

// Root-to-leaf chains in kinematic order, each chain's joints emitted for
// t = 0..T-1 frame-major; shared joints belong to the first chain containing
// them. Tokens are flat (t, j) slots t*J + j; one segment per chain.
ScanOrder temporal_chain_order(const KinematicTree& tree, int T);

// The chain decomposition used by temporal_chain_order: consecutive runs of
// the DFS preorder split after each leaf.
std::vector<std::vector<int>> kinematic_chains(const KinematicTree& tree);

// Tiles a per-frame joint order to T frames: position (t, k) holds token
// t*J + order.perm[k]; segments at frame boundaries.
ScanOrder tile_per_frame(const ScanOrder& joint_order, int T);

// angles [T*J, 3] axis-angle per joint -> absolute joint positions [T*J, 3],
// root at bone_rest[root], rotations composed down the tree.
Tensor forward_kinematics(const KinematicTree& tree, const Tensor& angles);

// Per-joint global rotations/positions for one frame, used by skinning.
struct FrameTransforms {
    std::vector<std::array<double, 9>> rot;  // row-major 3x3
    std::vector<std::array<double, 3>> pos;
};
FrameTransforms frame_transforms(const KinematicTree& tree, const double* angles_j3);

// (x, y) = scale * (X, Y) + center, z dropped. p3d [n, 3] -> [n, 2].
Tensor project_orthographic(const Tensor& p3d, double scale, std::array<double, 2> center);

// 17-joint Human3.6M-style skeleton in a T-pose, meters.
KinematicTree h36m_tree();

}  // namespace hmr

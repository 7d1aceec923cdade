#pragma once

#include <array>
#include <string>
#include <vector>

#include "hmr/kinematics.hpp"
#include "hmr/tensor.hpp"

namespace hmr {

// Procedural SMPL surrogate: one watertight capsule of ring vertices per
// bone, linear blend skinning weights on the bone's two joints, and a joint
// regressor that reads each joint off the ring centered on it.
struct MiniBody {
    static constexpr int kVertices = 602;
    static constexpr int kFormatVersion = 1;

    KinematicTree tree;
    Tensor template_vertices;  // [N_v, 3], meters
    Tensor skin_weights;       // [N_v, J], rows sum to 1, <= 4 nonzeros
    Tensor joint_regressor;    // [J, N_v], rows sum to 1
    std::vector<std::array<int, 3>> faces;

    int vertices() const { return template_vertices.rows(); }
    void validate() const;
};

// Deterministic construction over h36m_tree(); always yields kVertices
// vertices (ring counts are apportioned by bone length and adjusted to the
// fixed budget).
MiniBody make_minibody();

// Linear blend skinning. angles [T*J, 3] axis-angle -> vertices [T*N_v, 3]:
// v' = sum_j w_vj (R_j (v - rest_j) + p_j) per frame.
Tensor skin_mesh(const MiniBody& body, const Tensor& angles);

// joint_regressor applied per frame: verts [T*N_v, 3] -> joints [T*J, 3].
Tensor regress_joints(const MiniBody& body, const Tensor& verts);

// Canonical JSON fixture (sorted keys, exact double round-trip) with a
// format-version field; content hash of this string is pinned by the tests.
std::string minibody_to_json(const MiniBody& body);
MiniBody minibody_from_json(const std::string& text);

}  // namespace hmr

#pragma once

#include <array>
#include <vector>

#include "hmr/body.hpp"
#include "hmr/tape.hpp"

namespace hmr {

struct PoseLossWeights {
    double lambda_t = 0.5;
    double lambda_m = 20.0;
    double lambda_2d = 0.5;
};

struct MeshLossWeights {
    double lambda_mesh = 1.0;
    double lambda_joint = 1.0;
    double lambda_normal = 0.1;
    double lambda_edge = 20.0;
};

struct PoseLossTerms {
    Value total;
    Value l3d;   // mean per-joint position error
    Value lt;    // mean second-difference (acceleration) mismatch, 0 if T < 3
    Value lm;    // mean first-difference (velocity) mismatch, 0 if T < 2
    Value l2d;   // mean reprojection error
};

struct MeshLossTerms {
    Value total;
    Value lmesh;    // mean per-vertex L1
    Value ljoint;   // mean error of regressed joints
    Value lnormal;  // mean (1 - cos) of per-face unit normals
    Value ledge;    // mean absolute edge-length difference
    int degenerate_faces = 0;  // zero-area faces skipped by the normal term
};

// pred3d/gt3d [T*J, 3]; pred2d/gt2d [T*J, 2].
PoseLossTerms loss_pose(Value pred3d, Value gt3d, Value pred2d, Value gt2d, int T, int J,
                        const PoseLossWeights& w = {});

// pred/gt [T*Nv, 3] with Nv and topology taken from `body`.
MeshLossTerms loss_mesh(Value pred, Value gt, const MiniBody& body, int T,
                        const MeshLossWeights& w = {});

// Unique undirected edges of the body's faces, each as (lo, hi), sorted.
std::vector<std::array<int, 2>> mesh_edges(const MiniBody& body);

}  // namespace hmr

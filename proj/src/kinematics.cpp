#include "hmr/kinematics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace hmr {

int KinematicTree::root() const {
    int r = -1;
    for (int j = 0; j < joints(); ++j)
        if (parent[j] < 0) {
            if (r >= 0) throw StructureError("tree: multiple roots");
            r = j;
        }
    if (r < 0) throw StructureError("tree: no root");
    return r;
}

void KinematicTree::validate() const {
    if (parent.empty()) throw StructureError("tree: empty");
    if (bone_rest.size() != parent.size())
        throw StructureError("tree: bone_rest size mismatch");
    int r = root();
    for (int j = 0; j < joints(); ++j) {
        if (parent[j] >= joints()) throw StructureError("tree: parent index out of range");
        int cur = j, steps = 0;
        while (cur != r) {
            cur = parent[cur];
            if (cur < 0 || ++steps > joints())
                throw StructureError("tree: joint " + std::to_string(j) +
                                     " does not reach the root (cycle or bad parent)");
        }
    }
}

std::vector<std::vector<int>> KinematicTree::children() const {
    std::vector<std::vector<int>> ch(joints());
    for (int j = 0; j < joints(); ++j)
        if (parent[j] >= 0) ch[parent[j]].push_back(j);
    return ch;  // ascending by construction
}

ScanOrder ScanOrder::from_perm(std::vector<int> perm, std::vector<int> segments) {
    ScanOrder o;
    o.perm = std::move(perm);
    o.segments = segments.empty() ? std::vector<int>{0, static_cast<int>(o.perm.size())}
                                  : std::move(segments);
    o.inverse.assign(o.perm.size(), -1);
    for (size_t i = 0; i < o.perm.size(); ++i) {
        int p = o.perm[i];
        if (p < 0 || p >= static_cast<int>(o.perm.size()) || o.inverse[p] != -1)
            throw StructureError("scan order: perm is not a bijection");
        o.inverse[p] = static_cast<int>(i);
    }
    o.validate();
    return o;
}

void ScanOrder::validate() const {
    if (perm.size() != inverse.size()) throw StructureError("scan order: size mismatch");
    for (size_t i = 0; i < perm.size(); ++i)
        if (inverse[perm[i]] != static_cast<int>(i))
            throw StructureError("scan order: inverse[perm[i]] != i");
    if (segments.empty() || segments.front() != 0 || segments.back() != length())
        throw StructureError("scan order: segments must span [0, L]");
    for (size_t i = 0; i + 1 < segments.size(); ++i)
        if (segments[i] >= segments[i + 1])
            throw StructureError("scan order: segments must be strictly increasing");
}

ScanOrder kinematic_scan_order(const KinematicTree& tree) {
    tree.validate();
    auto ch = tree.children();
    std::vector<int> perm;
    perm.reserve(tree.joints());
    std::vector<int> stack{tree.root()};
    while (!stack.empty()) {
        int j = stack.back();
        stack.pop_back();
        perm.push_back(j);
        for (auto it = ch[j].rbegin(); it != ch[j].rend(); ++it) stack.push_back(*it);
    }
    return ScanOrder::from_perm(std::move(perm));
}

std::vector<std::vector<int>> kinematic_chains(const KinematicTree& tree) {
    ScanOrder dfs = kinematic_scan_order(tree);
    auto ch = tree.children();
    std::vector<std::vector<int>> chains;
    std::vector<int> cur;
    for (int j : dfs.perm) {
        cur.push_back(j);
        if (ch[j].empty()) {  // leaf closes the chain
            chains.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) chains.push_back(cur);
    return chains;
}

ScanOrder temporal_chain_order(const KinematicTree& tree, int T) {
    if (T < 1) throw ContractError("temporal_chain_order: T must be >= 1");
    int J = tree.joints();
    auto chains = kinematic_chains(tree);
    std::vector<int> perm, seg{0};
    perm.reserve(static_cast<size_t>(T) * J);
    for (const auto& chain : chains) {
        for (int t = 0; t < T; ++t)
            for (int j : chain) perm.push_back(t * J + j);
        seg.push_back(static_cast<int>(perm.size()));
    }
    return ScanOrder::from_perm(std::move(perm), std::move(seg));
}

ScanOrder tile_per_frame(const ScanOrder& joint_order, int T) {
    int J = joint_order.length();
    std::vector<int> perm, seg{0};
    perm.reserve(static_cast<size_t>(T) * J);
    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < J; ++k) perm.push_back(t * J + joint_order.perm[k]);
        seg.push_back((t + 1) * J);
    }
    return ScanOrder::from_perm(std::move(perm), std::move(seg));
}

namespace {

Eigen::Matrix3d rodrigues(const double* aa) {
    Eigen::Vector3d v(aa[0], aa[1], aa[2]);
    double angle = v.norm();
    if (angle < 1e-12) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

}  // namespace

FrameTransforms frame_transforms(const KinematicTree& tree, const double* angles_j3) {
    int J = tree.joints();
    FrameTransforms ft;
    ft.rot.resize(J);
    ft.pos.resize(J);
    ScanOrder order = kinematic_scan_order(tree);
    std::vector<Eigen::Matrix3d> R(J);
    std::vector<Eigen::Vector3d> p(J);
    for (int j : order.perm) {
        Eigen::Matrix3d local = rodrigues(angles_j3 + static_cast<size_t>(j) * 3);
        Eigen::Vector3d rest(tree.bone_rest[j][0], tree.bone_rest[j][1], tree.bone_rest[j][2]);
        if (tree.parent[j] < 0) {
            R[j] = local;
            p[j] = rest;
        } else {
            int pa = tree.parent[j];
            R[j] = R[pa] * local;
            p[j] = p[pa] + R[pa] * rest;
        }
        Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(ft.rot[j].data()) = R[j];
        for (int k = 0; k < 3; ++k) ft.pos[j][k] = p[j][k];
    }
    return ft;
}

Tensor forward_kinematics(const KinematicTree& tree, const Tensor& angles) {
    tree.validate();
    int J = tree.joints();
    if (angles.ndim() != 2 || angles.cols() != 3 || angles.rows() % J != 0)
        throw ShapeError("forward_kinematics: angles must be [T*J, 3], got " +
                         Tensor::shape_str(angles.shape));
    if (!all_finite(angles.data)) throw NumericError("forward_kinematics: non-finite angles");
    int T = angles.rows() / J;
    Tensor out({T * J, 3});
    for (int t = 0; t < T; ++t) {
        FrameTransforms ft =
            frame_transforms(tree, angles.data.data() + static_cast<size_t>(t) * J * 3);
        for (int j = 0; j < J; ++j)
            for (int k = 0; k < 3; ++k) out.at(t * J + j, k) = ft.pos[j][k];
    }
    return out;
}

Tensor project_orthographic(const Tensor& p3d, double scale, std::array<double, 2> center) {
    if (!(scale > 0.0)) throw ContractError("project_orthographic: scale must be > 0");
    if (p3d.ndim() != 2 || p3d.cols() != 3)
        throw ShapeError("project_orthographic: expects [n, 3]");
    Tensor out({p3d.rows(), 2});
    for (int i = 0; i < p3d.rows(); ++i) {
        out.at(i, 0) = scale * p3d.at(i, 0) + center[0];
        out.at(i, 1) = scale * p3d.at(i, 1) + center[1];
    }
    return out;
}

KinematicTree h36m_tree() {
    KinematicTree t;
    t.names = {"pelvis",     "right_hip",   "right_knee",     "right_ankle", "left_hip",
               "left_knee",  "left_ankle",  "spine",          "thorax",      "neck",
               "head",       "left_shoulder", "left_elbow",   "left_wrist",
               "right_shoulder", "right_elbow", "right_wrist"};
    t.parent = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    t.bone_rest = {
        {0.00, 0.00, 0.00},    // pelvis
        {-0.13, -0.04, 0.00},  // right_hip
        {0.00, -0.45, 0.00},   // right_knee
        {0.00, -0.42, 0.00},   // right_ankle
        {0.13, -0.04, 0.00},   // left_hip
        {0.00, -0.45, 0.00},   // left_knee
        {0.00, -0.42, 0.00},   // left_ankle
        {0.00, 0.25, 0.00},    // spine
        {0.00, 0.25, 0.00},    // thorax
        {0.00, 0.12, 0.00},    // neck
        {0.00, 0.12, 0.00},    // head
        {0.18, 0.02, 0.00},    // left_shoulder
        {0.28, 0.00, 0.00},    // left_elbow
        {0.25, 0.00, 0.00},    // left_wrist
        {-0.18, 0.02, 0.00},   // right_shoulder
        {-0.28, 0.00, 0.00},   // right_elbow
        {-0.25, 0.00, 0.00},   // right_wrist
    };
    t.validate();
    return t;
}

}  // namespace hmr

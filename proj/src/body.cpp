#include "hmr/body.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

namespace hmr {

namespace {

constexpr int kRingVerts = 6;

struct Vec3 {
    double x = 0, y = 0, z = 0;
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct Bone {
    int joint;   // distal joint (the bone runs parent[joint] -> joint)
    double len;
    int rings;
};

// Ring counts per bone: proportional to length, >= 2, iteratively adjusted
// to the exact budget so the vertex count is always kVertices.
std::vector<Bone> apportion_rings(const KinematicTree& tree, int ring_budget) {
    std::vector<Bone> bones;
    double total = 0.0;
    for (int j = 0; j < tree.joints(); ++j) {
        if (tree.parent[j] < 0) continue;
        Vec3 r{tree.bone_rest[j][0], tree.bone_rest[j][1], tree.bone_rest[j][2]};
        double len = r.norm();
        if (len <= 0.0) throw StructureError("minibody: zero-length bone at joint " +
                                             std::to_string(j));
        bones.push_back({j, len, 0});
        total += len;
    }
    int sum = 0;
    for (Bone& b : bones) {
        b.rings = std::max(2, static_cast<int>(std::lround(ring_budget * b.len / total)));
        sum += b.rings;
    }
    while (sum != ring_budget) {
        // grow the most under-resolved bone / shrink the most over-resolved one
        int pick = -1;
        double best = 0.0;
        for (size_t i = 0; i < bones.size(); ++i) {
            double density = bones[i].rings / bones[i].len;
            if (sum < ring_budget) {
                if (pick < 0 || density < best) {
                    best = density;
                    pick = static_cast<int>(i);
                }
            } else if (bones[i].rings > 2 && (pick < 0 || density > best)) {
                best = density;
                pick = static_cast<int>(i);
            }
        }
        bones[pick].rings += sum < ring_budget ? 1 : -1;
        sum += sum < ring_budget ? 1 : -1;
    }
    return bones;
}

void frame_axes(const Vec3& u, Vec3& e1, Vec3& e2) {
    Vec3 pick = std::abs(u.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    e1 = cross(u, pick);
    e1 = e1 * (1.0 / e1.norm());
    e2 = cross(u, e1);
}

}  // namespace

MiniBody make_minibody() {
    MiniBody body;
    body.tree = h36m_tree();
    const KinematicTree& tree = body.tree;
    int J = tree.joints();

    int ring_budget = (MiniBody::kVertices - 2 * (J - 1)) / kRingVerts;
    std::vector<Bone> bones = apportion_rings(tree, ring_budget);

    Tensor rest = forward_kinematics(tree, Tensor({J, 3}, 0.0));
    auto jpos = [&](int j) { return Vec3{rest.at(j, 0), rest.at(j, 1), rest.at(j, 2)}; };

    body.template_vertices = Tensor({MiniBody::kVertices, 3});
    body.skin_weights = Tensor({MiniBody::kVertices, J});
    body.joint_regressor = Tensor({J, MiniBody::kVertices});

    auto ch = tree.children();
    int v = 0;
    for (const Bone& b : bones) {
        int j = b.joint, p = tree.parent[j];
        Vec3 a = jpos(p), c = jpos(j);
        Vec3 axis = c - a;
        Vec3 u = axis * (1.0 / b.len);
        Vec3 e1, e2;
        frame_axes(u, e1, e2);
        double radius = std::min(0.045, 0.3 * b.len);
        double cap = 0.8 * radius;

        auto put = [&](const Vec3& pos, double s) {
            body.template_vertices.at(v, 0) = pos.x;
            body.template_vertices.at(v, 1) = pos.y;
            body.template_vertices.at(v, 2) = pos.z;
            double wj = std::max(0.0, s - 0.5);  // distal blend, 0.5 at the joint
            body.skin_weights.at(v, j) = wj;
            body.skin_weights.at(v, p) = 1.0 - wj;
            ++v;
        };

        int base = v;
        put(a - u * cap, 0.0);  // proximal pole
        for (int r = 0; r < b.rings; ++r) {
            double s = b.rings == 1 ? 1.0 : static_cast<double>(r) / (b.rings - 1);
            Vec3 center = a + axis * s;
            for (int k = 0; k < kRingVerts; ++k) {
                double th = 2.0 * M_PI * k / kRingVerts;
                put(center + (e1 * std::cos(th) + e2 * std::sin(th)) * radius, s);
            }
        }
        put(c + u * cap, 1.0);  // distal pole

        // regressor: distal ring owns joint j; the root is read off the
        // proximal ring of its first child's bone
        int last_ring = base + 1 + (b.rings - 1) * kRingVerts;
        for (int k = 0; k < kRingVerts; ++k)
            body.joint_regressor.at(j, last_ring + k) = 1.0 / kRingVerts;
        if (p == tree.root() && ch[p].front() == j)
            for (int k = 0; k < kRingVerts; ++k)
                body.joint_regressor.at(p, base + 1 + k) = 1.0 / kRingVerts;

        // faces: quads between rings split into triangles, fans at the poles
        int pole0 = base, pole1 = base + 1 + b.rings * kRingVerts;
        auto rv = [&](int r, int k) { return base + 1 + r * kRingVerts + (k % kRingVerts); };
        for (int k = 0; k < kRingVerts; ++k)
            body.faces.push_back({pole0, rv(0, k + 1), rv(0, k)});
        for (int r = 0; r + 1 < b.rings; ++r)
            for (int k = 0; k < kRingVerts; ++k) {
                int q0 = rv(r, k), q1 = rv(r, k + 1), q2 = rv(r + 1, k + 1), q3 = rv(r + 1, k);
                body.faces.push_back({q0, q1, q2});
                body.faces.push_back({q0, q2, q3});
            }
        for (int k = 0; k < kRingVerts; ++k)
            body.faces.push_back({pole1, rv(b.rings - 1, k), rv(b.rings - 1, k + 1)});
    }
    if (v != MiniBody::kVertices)
        throw StructureError("minibody: built " + std::to_string(v) + " vertices, expected " +
                             std::to_string(MiniBody::kVertices));
    body.validate();
    return body;
}

void MiniBody::validate() const {
    tree.validate();
    int J = tree.joints(), N = vertices();
    if (skin_weights.rows() != N || skin_weights.cols() != J)
        throw StructureError("minibody: skin_weights shape");
    if (joint_regressor.rows() != J || joint_regressor.cols() != N)
        throw StructureError("minibody: joint_regressor shape");
    for (int i = 0; i < N; ++i) {
        double s = 0;
        int nz = 0;
        for (int j = 0; j < J; ++j) {
            double w = skin_weights.at(i, j);
            if (w < 0) throw StructureError("minibody: negative skin weight");
            if (w > 0) ++nz;
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw StructureError("minibody: skin weight row " + std::to_string(i) +
                                 " sums to " + std::to_string(s));
        if (nz > 4) throw StructureError("minibody: more than 4 weights on a vertex");
    }
    for (int j = 0; j < J; ++j) {
        double s = 0;
        for (int i = 0; i < N; ++i) s += joint_regressor.at(j, i);
        if (std::abs(s - 1.0) > 1e-9)
            throw StructureError("minibody: regressor row " + std::to_string(j) + " sums to " +
                                 std::to_string(s));
    }
    for (const auto& f : faces)
        for (int k = 0; k < 3; ++k)
            if (f[k] < 0 || f[k] >= N) throw StructureError("minibody: face index out of range");
}

Tensor skin_mesh(const MiniBody& body, const Tensor& angles) {
    const KinematicTree& tree = body.tree;
    int J = tree.joints(), N = body.vertices();
    if (angles.ndim() != 2 || angles.cols() != 3 || angles.rows() % J != 0)
        throw ShapeError("skin_mesh: angles must be [T*J, 3]");
    int T = angles.rows() / J;
    Tensor rest = forward_kinematics(tree, Tensor({J, 3}, 0.0));
    Tensor out({T * N, 3});
    for (int t = 0; t < T; ++t) {
        FrameTransforms ft =
            frame_transforms(tree, angles.data.data() + static_cast<size_t>(t) * J * 3);
        for (int i = 0; i < N; ++i) {
            double vx = body.template_vertices.at(i, 0);
            double vy = body.template_vertices.at(i, 1);
            double vz = body.template_vertices.at(i, 2);
            double ox = 0, oy = 0, oz = 0;
            for (int j = 0; j < J; ++j) {
                double w = body.skin_weights.at(i, j);
                if (w == 0.0) continue;
                double dx = vx - rest.at(j, 0), dy = vy - rest.at(j, 1), dz = vz - rest.at(j, 2);
                const auto& R = ft.rot[j];
                ox += w * (R[0] * dx + R[1] * dy + R[2] * dz + ft.pos[j][0]);
                oy += w * (R[3] * dx + R[4] * dy + R[5] * dz + ft.pos[j][1]);
                oz += w * (R[6] * dx + R[7] * dy + R[8] * dz + ft.pos[j][2]);
            }
            out.at(t * N + i, 0) = ox;
            out.at(t * N + i, 1) = oy;
            out.at(t * N + i, 2) = oz;
        }
    }
    return out;
}

Tensor regress_joints(const MiniBody& body, const Tensor& verts) {
    int J = body.tree.joints(), N = body.vertices();
    if (verts.ndim() != 2 || verts.cols() != 3 || verts.rows() % N != 0)
        throw ShapeError("regress_joints: verts must be [T*N_v, 3]");
    int T = verts.rows() / N;
    Tensor out({T * J, 3});
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j)
            for (int i = 0; i < N; ++i) {
                double w = body.joint_regressor.at(j, i);
                if (w == 0.0) continue;
                for (int k = 0; k < 3; ++k)
                    out.at(t * J + j, k) += w * verts.at(t * N + i, k);
            }
    return out;
}

std::string minibody_to_json(const MiniBody& body) {
    nlohmann::json j;
    j["format_version"] = MiniBody::kFormatVersion;
    j["parents"] = body.tree.parent;
    j["names"] = body.tree.names;
    for (const auto& b : body.tree.bone_rest) j["bone_rest"].push_back({b[0], b[1], b[2]});
    j["template_vertices"] = body.template_vertices.data;
    j["skin_weights"] = body.skin_weights.data;
    j["joint_regressor"] = body.joint_regressor.data;
    for (const auto& f : body.faces) j["faces"].push_back({f[0], f[1], f[2]});
    return j.dump();
}

MiniBody minibody_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != MiniBody::kFormatVersion)
        throw IoError("minibody fixture: unsupported format_version");
    MiniBody body;
    body.tree.parent = j.at("parents").get<std::vector<int>>();
    body.tree.names = j.at("names").get<std::vector<std::string>>();
    for (const auto& b : j.at("bone_rest"))
        body.tree.bone_rest.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>()});
    int J = body.tree.joints();
    body.template_vertices =
        Tensor::from({MiniBody::kVertices, 3}, j.at("template_vertices").get<std::vector<double>>());
    body.skin_weights =
        Tensor::from({MiniBody::kVertices, J}, j.at("skin_weights").get<std::vector<double>>());
    body.joint_regressor =
        Tensor::from({J, MiniBody::kVertices}, j.at("joint_regressor").get<std::vector<double>>());
    for (const auto& f : j.at("faces"))
        body.faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
    body.validate();
    return body;
}

}  // namespace hmr

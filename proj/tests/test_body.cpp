#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "hmr/body.hpp"

using namespace hmr;

namespace {
const MiniBody& body() {
    static MiniBody b = make_minibody();
    return b;
}
}  // namespace

TEST_CASE("minibody construction invariants") {
    const MiniBody& b = body();
    CHECK(b.vertices() == 602);
    CHECK(b.tree.joints() == 17);
    b.validate();  // weight rows, regressor rows, face indices
    CHECK(all_finite(b.template_vertices.data));
}

TEST_CASE("regressor reproduces rest joints") {
    const MiniBody& b = body();
    Tensor rest = forward_kinematics(b.tree, Tensor({17, 3}, 0.0));
    Tensor reg = regress_joints(b, b.template_vertices);
    for (int j = 0; j < 17; ++j)
        for (int k = 0; k < 3; ++k) CHECK(std::abs(reg.at(j, k) - rest.at(j, k)) < 1e-6);
}

TEST_CASE("zero pose skins to the template exactly") {
    const MiniBody& b = body();
    Tensor v = skin_mesh(b, Tensor({17, 3}, 0.0));
    for (int64_t i = 0; i < v.numel(); ++i)
        CHECK(v.data[i] == doctest::Approx(b.template_vertices.data[i]).epsilon(1e-13));
}

TEST_CASE("regressed joints track forward kinematics under pose") {
    const MiniBody& b = body();
    Rng rng(33);
    for (int it = 0; it < 5; ++it) {
        int T = 2;
        Tensor ang({T * 17, 3});
        for (double& v : ang.data) v = rng.uniform(-0.8, 0.8);
        Tensor verts = skin_mesh(b, ang);
        Tensor reg = regress_joints(b, verts);
        Tensor fk = forward_kinematics(b.tree, ang);
        double worst = 0;
        for (int64_t i = 0; i < fk.numel(); ++i)
            worst = std::max(worst, std::abs(reg.data[i] - fk.data[i]));
        CHECK(worst < 0.05);   // the surrogate's contract
        CHECK(worst < 1e-9);   // construction places a ring centered on every joint
    }
}

TEST_CASE("single-joint rotation moves exactly the supported vertices") {
    const MiniBody& b = body();
    int elbow = -1;
    for (int j = 0; j < 17; ++j)
        if (b.tree.names[j] == "left_elbow") elbow = j;
    REQUIRE(elbow >= 0);
    // support = joints whose global transform changes = elbow's subtree
    std::vector<bool> affected(17, false);
    affected[elbow] = true;
    bool grew = true;
    while (grew) {
        grew = false;
        for (int j = 0; j < 17; ++j)
            if (!affected[j] && b.tree.parent[j] >= 0 && affected[b.tree.parent[j]]) {
                affected[j] = true;
                grew = true;
            }
    }
    // generic axis so no ring vertex sits exactly on the rotation axis
    Tensor ang({17, 3}, 0.0);
    ang.at(elbow, 0) = 0.4;
    ang.at(elbow, 1) = 0.5;
    ang.at(elbow, 2) = 0.6;
    Tensor v = skin_mesh(b, ang);
    Tensor v0 = skin_mesh(b, Tensor({17, 3}, 0.0));
    for (int i = 0; i < b.vertices(); ++i) {
        double support = 0;
        for (int j = 0; j < 17; ++j)
            if (affected[j]) support += b.skin_weights.at(i, j);
        bool moved = false;
        for (int k = 0; k < 3; ++k)
            if (v.at(i, k) != v0.at(i, k)) moved = true;
        if (support == 0.0) CHECK_FALSE(moved);
        if (support > 0.3) CHECK(moved);
    }
}

TEST_CASE("mesh is watertight with consistent orientation") {
    const MiniBody& b = body();
    // every directed edge appears exactly once and its reverse exactly once
    std::map<std::pair<int, int>, int> count;
    for (const auto& f : b.faces)
        for (int k = 0; k < 3; ++k) {
            int u = f[k], w = f[(k + 1) % 3];
            CHECK(u != w);
            count[{u, w}] += 1;
        }
    for (const auto& [e, c] : count) {
        CHECK(c == 1);
        auto rev = count.find({e.second, e.first});
        CHECK(rev != count.end());
    }
    // Euler characteristic: 16 closed genus-0 capsules
    int V = b.vertices(), F = static_cast<int>(b.faces.size());
    int E = static_cast<int>(count.size()) / 2;
    CHECK(V - E + F == 2 * 16);
}

TEST_CASE("fixture json round-trip is exact and hash-stable") {
    const MiniBody& b = body();
    std::string s1 = minibody_to_json(b);
    MiniBody c = minibody_from_json(s1);
    std::string s2 = minibody_to_json(c);
    CHECK(s1 == s2);
    CHECK(c.vertices() == b.vertices());
    CHECK(c.skin_weights.data == b.skin_weights.data);
    // pinned content hash of the canonical fixture; regenerating the body on
    // any platform must reproduce it bit-for-bit
    CHECK(hex64(fnv1a64(s1)) == "e96a75b9b4f3f340");
}

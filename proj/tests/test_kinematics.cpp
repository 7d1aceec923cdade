#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "hmr/kinematics.hpp"

using namespace hmr;

namespace {

KinematicTree chain3() {
    KinematicTree t;
    t.parent = {-1, 0, 1};
    t.bone_rest = {{0, 0, 0}, {1, 0, 0}, {1, 0, 0}};
    t.names = {"a", "b", "c"};
    return t;
}

// reference DFS, written recursively and independently of the library
void dfs_oracle(const std::vector<std::vector<int>>& ch, int j, std::vector<int>& out) {
    out.push_back(j);
    for (int c : ch[j]) dfs_oracle(ch, c, out);
}

// random tree with arbitrary label order: parents drawn topologically then
// relabeled by a random permutation
KinematicTree random_tree(Rng& rng, int J) {
    std::vector<int> topo_parent(J);
    topo_parent[0] = -1;
    for (int j = 1; j < J; ++j) topo_parent[j] = rng.index(j);
    std::vector<int> label(J);
    for (int i = 0; i < J; ++i) label[i] = i;
    for (int i = J - 1; i > 0; --i) std::swap(label[i], label[rng.index(i + 1)]);
    KinematicTree t;
    t.parent.assign(J, -1);
    t.bone_rest.assign(J, {0, 0, 0});
    t.names.assign(J, "");
    for (int j = 0; j < J; ++j) {
        t.parent[label[j]] = topo_parent[j] < 0 ? -1 : label[topo_parent[j]];
        t.bone_rest[label[j]] = {rng.uniform(0.1, 0.5), rng.uniform(-0.3, 0.3),
                                 rng.uniform(-0.3, 0.3)};
        t.names[label[j]] = "j" + std::to_string(label[j]);
    }
    t.bone_rest[label[0]] = {0, 0, 0};
    return t;
}

int name_pos(const KinematicTree& t, const ScanOrder& o, const std::string& n) {
    for (int j = 0; j < t.joints(); ++j)
        if (t.names[j] == n) return o.inverse[j];
    throw std::runtime_error("no joint named " + n);
}

}  // namespace

TEST_CASE("dfs order on toy trees") {
    CHECK(kinematic_scan_order(chain3()).perm == std::vector<int>{0, 1, 2});

    KinematicTree star;
    star.parent = {-1, 0, 0, 0};
    star.bone_rest = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    star.names = {"r", "a", "b", "c"};
    CHECK(kinematic_scan_order(star).perm == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("dfs order on the 17-joint tree") {
    KinematicTree t = h36m_tree();
    ScanOrder o = kinematic_scan_order(t);
    CHECK(o.length() == 17);
    CHECK(name_pos(t, o, "pelvis") < name_pos(t, o, "spine"));
    CHECK(name_pos(t, o, "spine") < name_pos(t, o, "neck"));
    for (std::string side : {"left", "right"}) {
        CHECK(name_pos(t, o, side + "_shoulder") < name_pos(t, o, side + "_elbow"));
        CHECK(name_pos(t, o, side + "_elbow") < name_pos(t, o, side + "_wrist"));
    }
    // exact match against the recursive oracle
    std::vector<int> ref;
    dfs_oracle(t.children(), t.root(), ref);
    CHECK(o.perm == ref);
}

TEST_CASE("scan order bijection and parent-before-child on random trees") {
    Rng rng(42);
    for (int it = 0; it < 100; ++it) {
        KinematicTree t = random_tree(rng, 2 + rng.index(31));
        ScanOrder o = kinematic_scan_order(t);
        for (int i = 0; i < o.length(); ++i) CHECK(o.inverse[o.perm[i]] == i);
        for (int j = 0; j < t.joints(); ++j)
            if (t.parent[j] >= 0) CHECK(o.inverse[t.parent[j]] < o.inverse[j]);
        std::vector<int> ref;
        dfs_oracle(t.children(), t.root(), ref);
        CHECK(o.perm == ref);
    }
}

TEST_CASE("malformed trees are rejected") {
    KinematicTree two_roots;
    two_roots.parent = {-1, -1};
    two_roots.bone_rest = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(kinematic_scan_order(two_roots), StructureError);

    KinematicTree cyc;
    cyc.parent = {-1, 2, 1};
    cyc.bone_rest = {{0, 0, 0}, {1, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(kinematic_scan_order(cyc), StructureError);

    KinematicTree rootless;
    rootless.parent = {1, 0};
    rootless.bone_rest = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(kinematic_scan_order(rootless), StructureError);
}

TEST_CASE("temporal chain order") {
    KinematicTree t = h36m_tree();
    ScanOrder k = kinematic_scan_order(t);

    SUBCASE("T=1 reduces to the kinematic order") {
        CHECK(temporal_chain_order(t, 1).perm == k.perm);
    }

    SUBCASE("single chain of 2 joints, T=2") {
        KinematicTree c;
        c.parent = {-1, 0};
        c.bone_rest = {{0, 0, 0}, {1, 0, 0}};
        CHECK(temporal_chain_order(c, 2).perm == std::vector<int>{0, 1, 2, 3});
    }

    SUBCASE("bijection over T*J slots with chain segments") {
        ScanOrder o = temporal_chain_order(t, 4);
        CHECK(o.length() == 68);
        for (int i = 0; i < 68; ++i) CHECK(o.inverse[o.perm[i]] == i);
        auto chains = kinematic_chains(t);
        CHECK(o.segments.size() == chains.size() + 1);
        // each chain block is frame-major: within it, (t, j) slots appear as
        // all of frame t's chain joints before frame t+1's
        int off = 0;
        for (const auto& chain : chains) {
            for (int f = 0; f < 4; ++f)
                for (size_t c = 0; c < chain.size(); ++c)
                    CHECK(o.perm[off + f * chain.size() + c] ==
                          f * 17 + chain[static_cast<int>(c)]);
            off += 4 * static_cast<int>(chain.size());
        }
    }

    SUBCASE("chains cover each joint exactly once") {
        auto chains = kinematic_chains(t);
        std::set<int> seen;
        for (const auto& chain : chains)
            for (int j : chain) CHECK(seen.insert(j).second);
        CHECK(static_cast<int>(seen.size()) == 17);
        // descending paths: each chain element's parent precedes it in the chain
        // or was emitted by an earlier chain
        std::set<int> owned;
        for (const auto& chain : chains) {
            for (size_t i = 0; i < chain.size(); ++i) {
                int pa = t.parent[chain[i]];
                if (pa >= 0) CHECK((owned.count(pa) || (i > 0 && chain[i - 1] == pa)));
            }
            for (int j : chain) owned.insert(j);
        }
    }
}

TEST_CASE("forward kinematics") {
    KinematicTree t = h36m_tree();
    int J = t.joints();

    SUBCASE("zero pose gives cumulative rest offsets") {
        Tensor p = forward_kinematics(t, Tensor({J, 3}, 0.0));
        for (int j = 0; j < J; ++j) {
            double ex = t.bone_rest[j][0], ey = t.bone_rest[j][1], ez = t.bone_rest[j][2];
            int pa = t.parent[j];
            while (pa >= 0) {
                ex += t.bone_rest[pa][0];
                ey += t.bone_rest[pa][1];
                ez += t.bone_rest[pa][2];
                pa = t.parent[pa];
            }
            CHECK(p.at(j, 0) == doctest::Approx(ex).epsilon(1e-12));
            CHECK(p.at(j, 1) == doctest::Approx(ey).epsilon(1e-12));
            CHECK(p.at(j, 2) == doctest::Approx(ez).epsilon(1e-12));
        }
    }

    SUBCASE("root yaw pi mirrors an x chain") {
        KinematicTree c = chain3();
        Tensor ang({3, 3}, 0.0);
        ang.at(0, 1) = M_PI;  // yaw about +y
        Tensor p = forward_kinematics(c, ang);
        CHECK(std::abs(p.at(1, 0) + 1.0) < 1e-9);
        CHECK(std::abs(p.at(2, 0) + 2.0) < 1e-9);
        CHECK(std::abs(p.at(2, 2)) < 1e-9);
    }

    SUBCASE("random poses preserve bone lengths") {
        Rng rng(9);
        for (int it = 0; it < 10; ++it) {
            int T = 3;
            Tensor ang({T * J, 3});
            for (double& v : ang.data) v = rng.uniform(-1.5, 1.5);
            Tensor p = forward_kinematics(t, ang);
            for (int f = 0; f < T; ++f)
                for (int j = 0; j < J; ++j) {
                    int pa = t.parent[j];
                    if (pa < 0) continue;
                    double dx = p.at(f * J + j, 0) - p.at(f * J + pa, 0);
                    double dy = p.at(f * J + j, 1) - p.at(f * J + pa, 1);
                    double dz = p.at(f * J + j, 2) - p.at(f * J + pa, 2);
                    double rest = std::sqrt(t.bone_rest[j][0] * t.bone_rest[j][0] +
                                            t.bone_rest[j][1] * t.bone_rest[j][1] +
                                            t.bone_rest[j][2] * t.bone_rest[j][2]);
                    CHECK(std::abs(std::sqrt(dx * dx + dy * dy + dz * dz) - rest) < 1e-9);
                }
        }
    }
}

TEST_CASE("orthographic projection") {
    Tensor p = Tensor::from({2, 3}, {0.3, -0.2, 5.0, 0.0, 0.0, -2.0});
    Tensor q = project_orthographic(p, 1.0, {0, 0});
    CHECK(q.at(0, 0) == doctest::Approx(0.3));
    CHECK(q.at(0, 1) == doctest::Approx(-0.2));
    CHECK(q.at(1, 0) == 0.0);
    CHECK(q.at(1, 1) == 0.0);

    Tensor r = project_orthographic(p, 0.5, {0.1, -0.1});
    CHECK(r.at(0, 0) == doctest::Approx(0.25));
    CHECK(r.at(0, 1) == doctest::Approx(-0.2));
    CHECK_THROWS_AS(project_orthographic(p, 0.0, {0, 0}), ContractError);
}

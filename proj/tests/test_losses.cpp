#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hmr/gradcheck.hpp"
#include "hmr/losses.hpp"
#include "oracles.hpp"

using namespace hmr;

namespace {

Tensor rand_t(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Tetrahedron plus four floating vertices; enough topology for every mesh
// loss term without the full body.
MiniBody small_body(Rng& rng) {
    MiniBody b;
    b.tree.parent = {-1, 0};
    b.tree.bone_rest = {{0, 0, 0}, {0, 0.5, 0}};
    b.tree.names = {"root", "child"};
    b.template_vertices = rand_t(rng, {8, 3});
    b.skin_weights = Tensor({8, 2}, 0.5);
    b.joint_regressor = Tensor({2, 8}, 0.0);
    for (int j = 0; j < 2; ++j) {
        double s = 0.0;
        for (int v = 0; v < 8; ++v) s += (b.joint_regressor.at(j, v) = rng.uniform(0.1, 1.0));
        for (int v = 0; v < 8; ++v) b.joint_regressor.at(j, v) /= s;
    }
    b.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    return b;
}

std::vector<int> flat_faces(const MiniBody& b) {
    std::vector<int> f;
    for (const auto& face : b.faces) f.insert(f.end(), face.begin(), face.end());
    return f;
}

std::vector<int> flat_edges(const MiniBody& b) {
    std::vector<int> e;
    for (const auto& edge : mesh_edges(b)) e.insert(e.end(), edge.begin(), edge.end());
    return e;
}

}  // namespace

TEST_CASE("loss_pose: zero at pred == gt, exactly") {
    const int T = 3, J = 4;
    Rng rng(101);
    Tensor g3 = rand_t(rng, {T * J, 3});
    Tensor g2 = rand_t(rng, {T * J, 2});
    Tape t;
    Value gv3 = t.constant(g3), gv2 = t.constant(g2);
    PoseLossTerms lt = loss_pose(t.constant(g3), gv3, t.constant(g2), gv2, T, J);
    CHECK(t.val(lt.total).data[0] == 0.0);
    CHECK(t.val(lt.l3d).data[0] == 0.0);
    CHECK(t.val(lt.lt).data[0] == 0.0);
    CHECK(t.val(lt.lm).data[0] == 0.0);
    CHECK(t.val(lt.l2d).data[0] == 0.0);
}

TEST_CASE("loss_pose: constant offset moves only the position terms") {
    const int T = 4, J = 3;
    std::array<double, 3> d = {0.03, -0.04, 0.12};  // |d| = 0.13
    Rng rng(102);
    Tensor g3 = rand_t(rng, {T * J, 3});
    Tensor p3 = g3;
    for (int r = 0; r < T * J; ++r)
        for (int c = 0; c < 3; ++c) p3.at(r, c) += d[c];
    Tensor g2 = rand_t(rng, {T * J, 2});
    Tape t;
    PoseLossTerms lt =
        loss_pose(t.constant(p3), t.constant(g3), t.constant(g2), t.constant(g2), T, J);
    CHECK(t.val(lt.l3d).data[0] == doctest::Approx(0.13).epsilon(1e-12));
    CHECK(t.val(lt.lm).data[0] < 1e-12);
    CHECK(t.val(lt.lt).data[0] < 1e-12);
    CHECK(t.val(lt.l2d).data[0] == 0.0);
}

TEST_CASE("loss_pose: matches the naive oracle") {
    PoseLossWeights w;
    for (uint64_t seed : {201, 202, 203}) {
        Rng rng(seed);
        for (int T : {2, 4, 7}) {
            const int J = 5;
            Tensor p3 = rand_t(rng, {T * J, 3});
            Tensor g3 = rand_t(rng, {T * J, 3});
            Tensor p2 = rand_t(rng, {T * J, 2});
            Tensor g2 = rand_t(rng, {T * J, 2});
            Tape t;
            PoseLossTerms lt = loss_pose(t.constant(p3), t.constant(g3), t.constant(p2),
                                         t.constant(g2), T, J, w);
            oracle::PoseLossParts want = oracle::pose_loss_naive(
                p3.data, g3.data, p2.data, g2.data, T, J, w.lambda_t, w.lambda_m, w.lambda_2d);
            CHECK(t.val(lt.l3d).data[0] == doctest::Approx(want.l3d).epsilon(1e-12));
            CHECK(t.val(lt.lm).data[0] == doctest::Approx(want.lm).epsilon(1e-12));
            CHECK(t.val(lt.lt).data[0] == doctest::Approx(want.lt).epsilon(1e-12));
            CHECK(t.val(lt.l2d).data[0] == doctest::Approx(want.l2d).epsilon(1e-12));
            CHECK(t.val(lt.total).data[0] == doctest::Approx(want.total).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss_pose: shape mismatch and gradient") {
    const int T = 3, J = 4;
    Rng rng(103);
    Tensor p3 = rand_t(rng, {T * J, 3});
    Tensor g3 = rand_t(rng, {T * J, 3});
    Tensor p2 = rand_t(rng, {T * J, 2});
    Tensor g2 = rand_t(rng, {T * J, 2});

    {
        Tape t;
        Value bad = t.constant(rand_t(rng, {T * J - 1, 3}));
        CHECK_THROWS_AS(
            loss_pose(bad, t.constant(g3), t.constant(p2), t.constant(g2), T, J),
            ContractError);
    }

    GradFn fn = [&](Tape& t, const std::vector<Value>& in) {
        return loss_pose(in[0], t.constant(g3), in[1], t.constant(g2), T, J).total;
    };
    GradCheckReport rep = grad_check(fn, {p3, p2});
    INFO("coord " << rep.coord << " analytic " << rep.analytic << " numeric " << rep.numeric);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("mesh_edges: tetrahedron has six unique edges") {
    Rng rng(104);
    MiniBody b = small_body(rng);
    auto edges = mesh_edges(b);
    CHECK(edges.size() == 6);
    for (size_t i = 1; i < edges.size(); ++i) CHECK(edges[i - 1] < edges[i]);
}

TEST_CASE("loss_mesh: zero at pred == gt, exactly") {
    const int T = 2;
    Rng rng(105);
    MiniBody b = small_body(rng);
    Tensor g = rand_t(rng, {T * 8, 3});
    Tape t;
    MeshLossTerms lt = loss_mesh(t.constant(g), t.constant(g), b, T);
    CHECK(t.val(lt.total).data[0] == 0.0);
    CHECK(t.val(lt.lmesh).data[0] == 0.0);
    CHECK(t.val(lt.ljoint).data[0] == 0.0);
    CHECK(t.val(lt.lnormal).data[0] == 0.0);
    CHECK(t.val(lt.ledge).data[0] == 0.0);
    CHECK(lt.degenerate_faces == 0);
}

TEST_CASE("loss_mesh: uniform scaling") {
    const int T = 2;
    const double s = 1.3;
    Rng rng(106);
    MiniBody b = small_body(rng);
    Tensor g = rand_t(rng, {T * 8, 3});
    Tensor p = g;
    for (double& v : p.data) v *= s;
    Tape t;
    MeshLossTerms lt = loss_mesh(t.constant(p), t.constant(g), b, T);
    CHECK(t.val(lt.lnormal).data[0] < 1e-12);

    double mean_len = 0.0;
    auto edges = mesh_edges(b);
    for (int tf = 0; tf < T; ++tf)
        for (const auto& e : edges) {
            double q = 0.0;
            for (int c = 0; c < 3; ++c) {
                double d = g.at(tf * 8 + e[0], c) - g.at(tf * 8 + e[1], c);
                q += d * d;
            }
            mean_len += std::sqrt(q);
        }
    mean_len /= T * edges.size();
    CHECK(t.val(lt.ledge).data[0] ==
          doctest::Approx((s - 1.0) * mean_len).epsilon(1e-10));
}

TEST_CASE("loss_mesh: matches the brute-force oracle") {
    MeshLossWeights w;
    for (uint64_t seed : {301, 302, 303}) {
        Rng rng(seed);
        MiniBody b = small_body(rng);
        const int T = 3;
        Tensor p = rand_t(rng, {T * 8, 3});
        Tensor g = rand_t(rng, {T * 8, 3});
        Tape t;
        MeshLossTerms lt = loss_mesh(t.constant(p), t.constant(g), b, T, w);
        oracle::MeshLossParts want = oracle::mesh_loss_naive(
            p.data, g.data, flat_faces(b), flat_edges(b), b.joint_regressor.data, T, 8, 2,
            w.lambda_mesh, w.lambda_joint, w.lambda_normal, w.lambda_edge);
        CHECK(lt.degenerate_faces == want.skipped);
        CHECK(t.val(lt.lmesh).data[0] == doctest::Approx(want.lmesh).epsilon(1e-12));
        CHECK(t.val(lt.ljoint).data[0] == doctest::Approx(want.ljoint).epsilon(1e-12));
        CHECK(t.val(lt.lnormal).data[0] == doctest::Approx(want.lnormal).epsilon(1e-10));
        CHECK(t.val(lt.ledge).data[0] == doctest::Approx(want.ledge).epsilon(1e-12));
        CHECK(t.val(lt.total).data[0] == doctest::Approx(want.total).epsilon(1e-10));
    }
}

TEST_CASE("loss_mesh: degenerate pred face is skipped and counted") {
    const int T = 2;
    Rng rng(107);
    MiniBody b = small_body(rng);
    Tensor g = rand_t(rng, {T * 8, 3});
    Tensor p = rand_t(rng, {T * 8, 3});
    // make face 0 of frame 0 collinear; its vertices are shared with other
    // faces, which stay generic
    for (int c = 0; c < 3; ++c)
        p.at(b.faces[0][2], c) =
            p.at(b.faces[0][0], c) + 2.0 * (p.at(b.faces[0][1], c) - p.at(b.faces[0][0], c));
    Tape t;
    MeshLossTerms lt = loss_mesh(t.constant(p), t.constant(g), b, T);
    CHECK(lt.degenerate_faces == 1);
    CHECK(std::isfinite(t.val(lt.lnormal).data[0]));
    CHECK(std::isfinite(t.val(lt.total).data[0]));

    oracle::MeshLossParts want = oracle::mesh_loss_naive(
        p.data, g.data, flat_faces(b), flat_edges(b), b.joint_regressor.data, T, 8, 2, 1.0,
        1.0, 0.1, 20.0);
    CHECK(want.skipped == 1);
    CHECK(t.val(lt.lnormal).data[0] == doctest::Approx(want.lnormal).epsilon(1e-10));
}

TEST_CASE("loss_mesh: gradient at a generic point") {
    const int T = 2;
    Rng rng(108);
    MiniBody b = small_body(rng);
    Tensor g = rand_t(rng, {T * 8, 3});
    Tensor p = rand_t(rng, {T * 8, 3});
    GradFn fn = [&](Tape& t, const std::vector<Value>& in) {
        return loss_mesh(in[0], t.constant(g), b, T).total;
    };
    GradCheckReport rep = grad_check(fn, {p});
    INFO("coord " << rep.coord << " analytic " << rep.analytic << " numeric " << rep.numeric);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("loss_mesh: full-body smoke with the procedural body") {
    MiniBody body = make_minibody();
    const int T = 1;
    Rng rng(109);
    Tensor angles({body.tree.joints(), 3}, 0.0);
    angles.at(2, 0) = 0.4;
    angles.at(11, 2) = -0.3;
    Tensor posed = skin_mesh(body, angles);
    Tensor rest = skin_mesh(body, Tensor({body.tree.joints(), 3}, 0.0));
    Tape t;
    MeshLossTerms lt = loss_mesh(t.constant(posed), t.constant(rest), body, T);
    CHECK(lt.degenerate_faces == 0);
    CHECK(t.val(lt.total).data[0] > 0.0);
    CHECK(std::isfinite(t.val(lt.total).data[0]));
}

#include "hmr/verify.hpp"

#include <Eigen/Geometry>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "hmr/blocks.hpp"
#include "hmr/body.hpp"
#include "hmr/gradcheck.hpp"
#include "hmr/losses.hpp"
#include "hmr/metrics.hpp"
#include "hmr/ssm.hpp"

namespace hmr {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

Tensor rand_t(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// ---- scan equivalence -------------------------------------------------------

SuiteResult suite_scan_equivalence(const std::string& inject) {
    SuiteResult r{"scan-equivalence", "ssm"};
    Rng rng(1001);
    double worst = 0.0;
    const int instances = 1000;
    for (int it = 0; it < instances; ++it) {
        int n = 1 + static_cast<int>(rng.next_u64() % 16);
        int L = 2 + static_cast<int>(rng.next_u64() % 63);
        SsmParams p;
        p.delta = rng.uniform(0.01, 0.5);
        for (int i = 0; i < n; ++i) {
            p.A.push_back(rng.uniform(-2.0, -0.05));
            p.B.push_back(rng.uniform(-1.0, 1.0));
            p.C.push_back(rng.uniform(-1.0, 1.0));
        }
        std::vector<double> x(static_cast<size_t>(L));
        for (double& v : x) v = rng.uniform(-1.0, 1.0);

        DiscreteSsm d = discretize_zoh(p);
        DiscreteSsm d_rec = d;
        if (inject == "ssm-sign")
            for (double& a : d_rec.A_bar) a = -a;
        std::vector<double> y_rec = scan_recurrent(d_rec, p.C, x);
        std::vector<double> y_conv = scan_convolutional(build_conv_kernel(d, p.C, L), x);
        for (int t = 0; t < L; ++t)
            worst = std::max(worst, std::abs(y_rec[static_cast<size_t>(t)] -
                                             y_conv[static_cast<size_t>(t)]));
    }
    r.passed = worst < 1e-10;
    r.detail = std::to_string(instances) + " instances, max |recurrent - conv| = " + fmt(worst);
    return r;
}

// ---- ZOH limits -------------------------------------------------------------

double bbar_series(double a, double b, double delta) {
    double sum = 0.0, term = 1.0;
    for (int k = 0; k < 60; ++k) {
        sum += term / (k + 1.0);
        term *= delta * a / (k + 1.0);
        if (std::abs(term) < 1e-20) break;
    }
    return delta * b * sum;
}

SuiteResult suite_zoh_limit() {
    SuiteResult r{"zoh-limit", "ssm"};
    double worst = 0.0;

    SsmParams z{{0.0, 0.0}, {1.0, 0.5}, {1.0, 1.0}, 0.3};
    DiscreteSsm dz = discretize_zoh(z);
    for (int i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(dz.A_bar[static_cast<size_t>(i)] - 1.0));
        worst = std::max(worst,
                         std::abs(dz.B_bar[static_cast<size_t>(i)] - 0.3 * z.B[static_cast<size_t>(i)]));
    }

    SsmParams h{{-1.0}, {0.8}, {1.0}, std::log(2.0)};
    DiscreteSsm dh = discretize_zoh(h);
    worst = std::max(worst, std::abs(dh.A_bar[0] - 0.5));
    worst = std::max(worst, std::abs(dh.B_bar[0] - 0.5 * 0.8));

    Rng rng(1002);
    for (int it = 0; it < 200; ++it) {
        double a = rng.uniform(0.1, 3.0) * (rng.bernoulli(0.5) ? -1.0 : 1.0);
        double b = rng.uniform(-2.0, 2.0);
        double delta = rng.uniform(0.01, 1.0);
        DiscreteSsm d = discretize_zoh({{a}, {b}, {1.0}, delta});
        worst = std::max(worst, std::abs(d.A_bar[0] - std::exp(delta * a)));
        worst = std::max(worst, std::abs(d.B_bar[0] - bbar_series(a, b, delta)));
    }

    for (int it = 0; it < 50; ++it) {
        double a = rng.uniform(-2.0, 2.0);
        double b = rng.uniform(-2.0, 2.0);
        double delta = 1e-8;
        DiscreteSsm d = discretize_zoh({{a}, {b}, {1.0}, delta});
        worst = std::max(worst, std::abs(d.A_bar[0] - (1.0 + delta * a)));
        worst = std::max(worst, std::abs(d.B_bar[0] - delta * b));
    }

    r.passed = worst < 1e-12;
    r.detail = "closed-form, series, and small-delta checks, max err = " + fmt(worst);
    return r;
}

// ---- gradient suite ---------------------------------------------------------

// leaves for params selected by `as_leaf`, constants for the rest, then the
// extra inputs; output reduced through a fixed random projection
double fd_block(const Params& p, const std::function<bool(const std::string&)>& as_leaf,
                const std::vector<Tensor>& extras, uint64_t seed,
                const std::function<Value(Tape&, const Bind&, const std::vector<Value>&)>& build,
                bool project = true) {
    std::vector<std::string> leaf_names;
    std::vector<Tensor> inputs;
    for (const std::string& n : p.names())
        if (as_leaf(n)) {
            leaf_names.push_back(n);
            inputs.push_back(p.at(n));
        }
    size_t np = inputs.size();
    for (const Tensor& t : extras) inputs.push_back(t);
    Rng projrng(seed);
    std::vector<double> proj;
    GradFn fn = [&](Tape& t, const std::vector<Value>& leaves) {
        std::vector<std::string> names;
        std::vector<Value> vals;
        size_t li = 0;
        for (const std::string& n : p.names()) {
            names.push_back(n);
            vals.push_back(as_leaf(n) ? leaves[li++] : t.constant(p.at(n)));
        }
        Bind w(t, names, vals);
        std::vector<Value> ex(leaves.begin() + static_cast<int64_t>(np), leaves.end());
        Value out = build(t, w, ex);
        if (!project) return out;
        const Tensor& ov = t.val(out);
        if (proj.empty())
            for (int64_t i = 0; i < ov.numel(); ++i) proj.push_back(projrng.uniform(0.5, 1.5));
        return reduce_sum(mul(out, t.constant(Tensor::from(ov.shape, proj))));
    };
    return grad_check(fn, inputs).max_rel_err;
}

bool leaf_all(const std::string&) { return true; }

MiniBody tiny_body(Rng& rng) {
    MiniBody b;
    b.tree.parent = {-1, 0};
    b.tree.bone_rest = {{0.0, 0.0, 0.0}, {0.0, 0.3, 0.0}};
    b.tree.names = {"root", "child"};
    b.template_vertices = rand_t(rng, {8, 3}, -0.4, 0.4);
    b.skin_weights = Tensor({8, 2});
    for (int v = 0; v < 8; ++v) {
        double w0 = rng.uniform(0.0, 1.0);
        b.skin_weights.at(v, 0) = w0;
        b.skin_weights.at(v, 1) = 1.0 - w0;
    }
    b.joint_regressor = Tensor({2, 8});
    for (int j = 0; j < 2; ++j) {
        double sum = 0.0;
        for (int v = 0; v < 8; ++v) sum += (b.joint_regressor.at(j, v) = rng.uniform(0.1, 1.0));
        for (int v = 0; v < 8; ++v) b.joint_regressor.at(j, v) /= sum;
    }
    b.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    return b;
}

struct BlockErr {
    std::string name;
    double err;
    double tol;
};

SuiteResult suite_gradient_check(int instances) {
    SuiteResult r{"gradient-check", "blocks"};
    std::vector<BlockErr> blocks;

    {  // dual-scan block
        double worst = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2000 + static_cast<uint64_t>(it));
            const int L = 6;
            DualScanConfig cfg;
            cfg.dim = 4;
            cfg.n_state = 2;
            cfg.scan_order = ScanOrder::from_perm({2, 0, 1, 5, 3, 4}, {0, 3, 6});
            cfg.global_segments = {0, L};
            Params p;
            dual_scan_block_params(p, rng, "blk", cfg);
            Tensor x = rand_t(rng, {L, cfg.dim});
            worst = std::max(
                worst, fd_block(p, leaf_all, {x}, 3000 + static_cast<uint64_t>(it),
                                [&](Tape&, const Bind& w, const std::vector<Value>& ex) {
                                    return dual_scan_block(w, "blk", ex[0], cfg);
                                }));
        }
        blocks.push_back({"dual-scan", worst, 1e-4});
    }

    {  // deformable attention: full parameter set at the offsets tolerance,
       // then the smooth path alone at the strict one
        double worst_all = 0.0, worst_smooth = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2100 + static_cast<uint64_t>(it));
            const int T = 2, J = 2, dim = 4;
            DeformConfig cfg{1, 2, 3, 3};
            Params p;
            deformable_attention_params(p, rng, "da", dim, cfg);
            Tensor fx = rand_t(rng, {T * J, dim});
            Tensor grid = rand_t(rng, {T, 4, 4, cfg.grid_c});
            Tensor p2d = rand_t(rng, {T * J, 2}, -0.55, 0.55);
            auto build = [&](Tape& t, const Bind& w, const std::vector<Value>& ex) {
                FeatureSeq f{ex[0], FeatureSeq::Layout::JointToken, T, J};
                return deformable_attention(w, "da", f, ex[1], t.constant(p2d), cfg).values;
            };
            worst_all = std::max(worst_all, fd_block(p, leaf_all, {fx, grid},
                                                     3100 + static_cast<uint64_t>(it), build));
            auto no_off = [](const std::string& n) {
                return n.find(".off") == std::string::npos;
            };
            worst_smooth = std::max(worst_smooth,
                                    fd_block(p, no_off, {fx, grid},
                                             3150 + static_cast<uint64_t>(it), build));
        }
        blocks.push_back({"deformable-offsets", worst_all, 1e-3});
        blocks.push_back({"deformable-smooth", worst_smooth, 1e-4});
    }

    {  // motion-aware attention
        double worst = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2200 + static_cast<uint64_t>(it));
            const int T = 3, J = 2, q_dim = 4, imp = 3, d_k = 3;
            Params p;
            motion_aware_attention_params(p, rng, "ma", q_dim, imp, J, d_k);
            Tensor f = rand_t(rng, {T, q_dim});
            Tensor me = rand_t(rng, {T * J, 3});
            Tensor mi = rand_t(rng, {T, imp});
            worst = std::max(
                worst,
                fd_block(p, leaf_all, {f, me, mi}, 3200 + static_cast<uint64_t>(it),
                         [&](Tape&, const Bind& w, const std::vector<Value>& ex) {
                             FeatureSeq fs{ex[0], FeatureSeq::Layout::FrameToken, T, J};
                             return motion_aware_attention(w, "ma", fs, ex[1], ex[2], J, d_k)
                                 .values;
                         }));
        }
        blocks.push_back({"motion-attention", worst, 1e-4});
    }

    {  // lifting head
        double worst = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2300 + static_cast<uint64_t>(it));
            const int T = 2, J = 3, dim = 4, hidden = 5;
            Params p;
            lifting_head_params(p, rng, "lh", dim, hidden);
            Tensor x = rand_t(rng, {T * J, dim});
            worst = std::max(
                worst, fd_block(p, leaf_all, {x}, 3300 + static_cast<uint64_t>(it),
                                [&](Tape&, const Bind& w, const std::vector<Value>& ex) {
                                    FeatureSeq f{ex[0], FeatureSeq::Layout::JointToken, T, J};
                                    return lifting_head(w, "lh", f, hidden);
                                }));
        }
        blocks.push_back({"lifting-head", worst, 1e-4});
    }

    {  // mesh head
        double worst = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2400 + static_cast<uint64_t>(it));
            const int T = 2, J = 2, dim = 4, hidden = 5, nv = 6;
            Params p;
            mesh_head_params(p, rng, "mh", dim, J, hidden, nv);
            Tensor f = rand_t(rng, {T, dim});
            Tensor p3d = rand_t(rng, {T * J, 3});
            Tensor tmpl = rand_t(rng, {nv, 3});
            worst = std::max(
                worst, fd_block(p, leaf_all, {f, p3d}, 3400 + static_cast<uint64_t>(it),
                                [&](Tape&, const Bind& w, const std::vector<Value>& ex) {
                                    FeatureSeq fs{ex[0], FeatureSeq::Layout::FrameToken, T, J};
                                    return mesh_head(w, "mh", fs, ex[1], tmpl, hidden);
                                }));
        }
        blocks.push_back({"mesh-head", worst, 1e-4});
    }

    {  // pose loss wrt predictions
        double worst = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2500 + static_cast<uint64_t>(it));
            const int T = 3, J = 2;
            Params p;
            Tensor pred3 = rand_t(rng, {T * J, 3});
            Tensor pred2 = rand_t(rng, {T * J, 2});
            Tensor gt3 = rand_t(rng, {T * J, 3});
            Tensor gt2 = rand_t(rng, {T * J, 2});
            worst = std::max(
                worst, fd_block(p, leaf_all, {pred3, pred2}, 3500 + static_cast<uint64_t>(it),
                                [&](Tape& t, const Bind&, const std::vector<Value>& ex) {
                                    return loss_pose(ex[0], t.constant(gt3), ex[1],
                                                     t.constant(gt2), T, J)
                                        .total;
                                },
                                false));
        }
        blocks.push_back({"loss-pose", worst, 1e-4});
    }

    {  // mesh loss wrt predictions
        double worst = 0.0;
        for (int it = 0; it < instances; ++it) {
            Rng rng(2600 + static_cast<uint64_t>(it));
            const int T = 2;
            MiniBody b = tiny_body(rng);
            Params p;
            Tensor pred = rand_t(rng, {T * 8, 3});
            Tensor gt = rand_t(rng, {T * 8, 3});
            worst = std::max(
                worst, fd_block(p, leaf_all, {pred}, 3600 + static_cast<uint64_t>(it),
                                [&](Tape& t, const Bind&, const std::vector<Value>& ex) {
                                    return loss_mesh(ex[0], t.constant(gt), b, T).total;
                                },
                                false));
        }
        blocks.push_back({"loss-mesh", worst, 1e-4});
    }

    r.passed = true;
    double worst_margin = 0.0;
    std::string worst_name;
    for (const BlockErr& b : blocks) {
        if (b.err >= b.tol) r.passed = false;
        if (b.err / b.tol >= worst_margin) {
            worst_margin = b.err / b.tol;
            worst_name = b.name + " rel err " + fmt(b.err) + " (tol " + fmt(b.tol) + ")";
        }
    }
    r.detail = std::to_string(blocks.size()) + " blocks x " + std::to_string(instances) +
               " instances, worst: " + worst_name;
    return r;
}

// ---- kinematic permutations -------------------------------------------------

KinematicTree random_tree(Rng& rng) {
    int J = 1 + static_cast<int>(rng.next_u64() % 32);
    KinematicTree t;
    t.parent.resize(static_cast<size_t>(J));
    t.parent[0] = -1;
    for (int j = 1; j < J; ++j)
        t.parent[static_cast<size_t>(j)] = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(j));
    for (int j = 0; j < J; ++j) {
        t.bone_rest.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                               rng.uniform(-0.3, 0.3)});
        t.names.push_back("j" + std::to_string(j));
    }
    return t;
}

bool check_orders(const KinematicTree& tree, std::string& why) {
    const int J = tree.joints();
    ScanOrder so = kinematic_scan_order(tree);
    so.validate();
    std::vector<int> seen(static_cast<size_t>(J), 0);
    for (int tk : so.perm) {
        if (tk < 0 || tk >= J || seen[static_cast<size_t>(tk)]++) {
            why = "kinematic order is not a bijection";
            return false;
        }
    }
    for (int j = 0; j < J; ++j) {
        int par = tree.parent[static_cast<size_t>(j)];
        if (par >= 0 && so.inverse[static_cast<size_t>(par)] >= so.inverse[static_cast<size_t>(j)]) {
            why = "parent of joint " + std::to_string(j) + " scans after it";
            return false;
        }
    }
    const int T = 4;
    ScanOrder to = temporal_chain_order(tree, T);
    to.validate();
    std::vector<int> seen2(static_cast<size_t>(T) * J, 0);
    for (int tk : to.perm) {
        if (tk < 0 || tk >= T * J || seen2[static_cast<size_t>(tk)]++) {
            why = "temporal chain order is not a bijection over T*J slots";
            return false;
        }
    }
    return true;
}

SuiteResult suite_permutation() {
    SuiteResult r{"permutation", "kinematics"};
    std::string why;
    if (!check_orders(h36m_tree(), why)) {
        r.detail = "MiniBody tree: " + why;
        return r;
    }
    Rng rng(1004);
    for (int it = 0; it < 100; ++it) {
        KinematicTree t = random_tree(rng);
        if (!check_orders(t, why)) {
            r.detail = "random tree " + std::to_string(it) + " (J=" + std::to_string(t.joints()) +
                       "): " + why;
            return r;
        }
    }
    r.passed = true;
    r.detail = "MiniBody + 100 random trees (J <= 32): bijective, parent-before-child";
    return r;
}

// ---- Procrustes / metric oracles ---------------------------------------------

SuiteResult suite_procrustes() {
    SuiteResult r{"procrustes-oracle", "metrics"};
    Rng rng(1005);
    const int J = 17;
    auto rand_rot = [&rng]() {
        Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        q.normalize();
        return q.toRotationMatrix();
    };

    double worst_recovery = 0.0;
    for (int it = 0; it < 200; ++it) {
        Tensor g = rand_t(rng, {J, 3});
        Eigen::Matrix3d R = rand_rot();
        double s = rng.uniform(0.5, 2.0);
        Eigen::Vector3d tr(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        Tensor p({J, 3});
        for (int j = 0; j < J; ++j) {
            Eigen::Vector3d v(g.at(j, 0), g.at(j, 1), g.at(j, 2));
            Eigen::Vector3d w = s * (R * v) + tr;
            for (int c = 0; c < 3; ++c) p.at(j, c) = w[c];
        }
        worst_recovery = std::max(worst_recovery, pa_mpjpe(p, g, J));
    }
    if (worst_recovery >= 1e-9) {
        r.detail = "similarity recovery failed: residual " + fmt(worst_recovery) + " mm";
        return r;
    }

    int violations = 0;
    double worst_gap = 0.0;
    for (int it = 0; it < 1000; ++it) {
        Tensor g = rand_t(rng, {J, 3});
        Eigen::Matrix3d R = rand_rot();
        double s = 0.7 + 0.6 * rng.uniform();
        Eigen::Vector3d tr(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        Tensor p({J, 3});
        for (int j = 0; j < J; ++j) {
            Eigen::Vector3d v(g.at(j, 0) + 0.05 * rng.normal(), g.at(j, 1) + 0.05 * rng.normal(),
                              g.at(j, 2) + 0.05 * rng.normal());
            Eigen::Vector3d w = s * (R * v) + tr;
            for (int c = 0; c < 3; ++c) p.at(j, c) = w[c];
        }
        double gap = pa_mpjpe(p, g, J) - mpjpe(p, g);
        worst_gap = std::max(worst_gap, gap);
        if (gap > 1e-9) ++violations;
    }
    if (violations > 0) {
        r.detail = "PA-MPJPE exceeded MPJPE on " + std::to_string(violations) +
                   "/1000 cases (worst gap " + fmt(worst_gap) + " mm)";
        return r;
    }

    // Accel of linear motion is exactly zero (dyadic steps keep fp sums exact)
    const int T = 9, Jl = 3;
    Tensor lin({T * Jl, 3});
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < Jl; ++j)
            for (int c = 0; c < 3; ++c)
                lin.at(t * Jl + j, c) = 1.5 + 0.25 * t * (j + 1) + 0.125 * c;
    Tensor lin2 = lin;
    for (double& v : lin2.data) v += 0.5;
    double acc = accel_error(lin, lin2, Jl);
    if (acc != 0.0) {
        r.detail = "Accel of linear motion = " + fmt(acc) + ", want exact 0";
        return r;
    }

    // all metrics zero at pred == gt
    Tensor g = rand_t(rng, {4 * J, 3});
    MiniBody body = make_minibody();
    Tensor mesh = rand_t(rng, {2 * body.vertices(), 3});
    double m1 = mpjpe(g, g);
    double m2 = pa_mpjpe(g, g, J);
    double m3 = mpvpe(mesh, mesh, body);
    double m4 = accel_error(g, g, J);
    if (m1 != 0.0 || m3 != 0.0 || m4 != 0.0 || m2 >= 1e-9) {
        r.detail = "metrics at pred == gt: " + fmt(m1) + ", " + fmt(m2) + ", " + fmt(m3) + ", " +
                   fmt(m4);
        return r;
    }

    r.passed = true;
    r.detail = "recovery < 1e-9, PA <= MPJPE on 1000 cases (worst gap " + fmt(worst_gap) +
               "), linear accel and pred==gt exact";
    return r;
}

// ---- loss zeros and weighting -------------------------------------------------

SuiteResult suite_loss_zero() {
    SuiteResult r{"loss-zero", "losses"};
    Rng rng(1006);
    const int T = 4, J = 5;
    Tensor p3 = rand_t(rng, {T * J, 3});
    Tensor p2 = rand_t(rng, {T * J, 2});
    Tape t;
    PoseLossTerms pt = loss_pose(t.constant(p3), t.constant(p3), t.constant(p2), t.constant(p2),
                                 T, J);
    double pose_total = t.val(pt.total).data[0];

    MiniBody b = tiny_body(rng);
    Tensor mesh = rand_t(rng, {2 * 8, 3});
    MeshLossTerms mt = loss_mesh(t.constant(mesh), t.constant(mesh), b, 2);
    double mesh_total = t.val(mt.total).data[0];

    if (pose_total != 0.0 || mesh_total != 0.0) {
        r.detail = "losses at pred == gt: pose " + fmt(pose_total) + ", mesh " + fmt(mesh_total);
        return r;
    }
    r.passed = true;
    r.detail = "pose and mesh losses exactly 0 at pred == gt";
    return r;
}

SuiteResult suite_loss_weighting() {
    SuiteResult r{"loss-weighting", "losses"};
    double worst = 0.0;
    for (uint64_t seed = 1; seed <= 3; ++seed) {
        Rng rng(1700 + seed);
        const int T = 4, J = 3;
        Tape t;
        Tensor a3 = rand_t(rng, {T * J, 3}), b3 = rand_t(rng, {T * J, 3});
        Tensor a2 = rand_t(rng, {T * J, 2}), b2 = rand_t(rng, {T * J, 2});
        PoseLossTerms pt = loss_pose(t.constant(a3), t.constant(b3), t.constant(a2),
                                     t.constant(b2), T, J);
        double hand = t.val(pt.l3d).data[0] + 0.5 * t.val(pt.lt).data[0] +
                      20.0 * t.val(pt.lm).data[0] + 0.5 * t.val(pt.l2d).data[0];
        worst = std::max(worst, std::abs(hand - t.val(pt.total).data[0]));

        MiniBody b = tiny_body(rng);
        Tensor am = rand_t(rng, {2 * 8, 3}), bm = rand_t(rng, {2 * 8, 3});
        MeshLossTerms mt = loss_mesh(t.constant(am), t.constant(bm), b, 2);
        double handm = 1.0 * t.val(mt.lmesh).data[0] + 1.0 * t.val(mt.ljoint).data[0] +
                       0.1 * t.val(mt.lnormal).data[0] + 20.0 * t.val(mt.ledge).data[0];
        worst = std::max(worst, std::abs(handm - t.val(mt.total).data[0]));
    }
    r.passed = worst < 1e-12;
    r.detail = "hand-weighted sums vs totals on 3 fixtures, max |diff| = " + fmt(worst);
    return r;
}

}  // namespace

std::vector<SuiteResult> run_verify(const VerifyOptions& opt) {
    std::vector<SuiteResult> out;
    auto want = [&](const SuiteResult& probe) {
        return opt.only.empty() || opt.only == probe.name || opt.only == probe.module;
    };
    auto push = [&](SuiteResult (*mk)(), const char* name, const char* module) {
        SuiteResult probe{name, module};
        if (!want(probe)) return;
        auto t0 = std::chrono::steady_clock::now();
        SuiteResult r = mk();
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    };

    if (want({"scan-equivalence", "ssm"})) {
        auto t0 = std::chrono::steady_clock::now();
        SuiteResult r = suite_scan_equivalence(opt.inject_fault);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
    push(&suite_zoh_limit, "zoh-limit", "ssm");
    if (want({"gradient-check", "blocks"})) {
        auto t0 = std::chrono::steady_clock::now();
        SuiteResult r = suite_gradient_check(opt.gradient_instances);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(r));
    }
    push(&suite_permutation, "permutation", "kinematics");
    push(&suite_procrustes, "procrustes-oracle", "metrics");
    push(&suite_loss_zero, "loss-zero", "losses");
    push(&suite_loss_weighting, "loss-weighting", "losses");
    return out;
}

bool all_passed(const std::vector<SuiteResult>& results) {
    for (const SuiteResult& r : results)
        if (!r.passed) return false;
    return !results.empty();
}

}  // namespace hmr

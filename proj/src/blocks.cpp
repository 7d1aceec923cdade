#include "hmr/blocks.hpp"

#include <cmath>

namespace hmr {

void FeatureSeq::check() const {
    const Tensor& v = values.tape->val(values);
    if (v.ndim() != 2) throw ShapeError("feature seq: expects 2-D values");
    int rows = layout == Layout::JointToken ? T * J : T;
    if (v.rows() != rows)
        throw ShapeError("feature seq: layout tag says " + std::to_string(rows) +
                         " rows, tensor has " + std::to_string(v.rows()));
}

void DualScanConfig::validate(int tokens) const {
    if (dim < 1 || n_state < 1) throw ContractError("dual scan: dim and n_state must be >= 1");
    if (conv_kernel < 1) throw ContractError("dual scan: conv_kernel must be >= 1");
    if (scan_order.length() != tokens)
        throw ContractError("dual scan: scan order length " +
                            std::to_string(scan_order.length()) + " vs token count " +
                            std::to_string(tokens));
}

// ---- dual-scan block ---------------------------------------------------------

void ssm_branch_params(Params& p, Rng& rng, const std::string& prefix, int dim, int n_state,
                       int conv_kernel) {
    double cs = std::sqrt(1.0 / conv_kernel);
    p.add(prefix + ".conv", uniform_tensor(rng, {conv_kernel, dim}, -cs, cs));
    init_linear(p, rng, prefix + ".dt", dim, dim);
    // Seed the dt bias so softplus(bias) spans [1e-3, 1e-1] log-uniformly.
    // With a zero bias every state decays within a token or two and the scan
    // cannot carry information across the sequence.
    Tensor& dt_b = p.at(prefix + ".dt.b");
    for (int d = 0; d < dim; ++d) {
        double delta = std::exp(std::log(1e-3) + rng.uniform() * (std::log(1e-1) - std::log(1e-3)));
        dt_b.data[d] = std::log(std::expm1(delta));
    }
    init_linear(p, rng, prefix + ".B", dim, n_state);
    init_linear(p, rng, prefix + ".C", dim, n_state);
    Tensor A({dim, n_state});
    for (int d = 0; d < dim; ++d)
        for (int n = 0; n < n_state; ++n) A.at(d, n) = -(n + 1.0);
    p.add(prefix + ".A", A);
    p.add(prefix + ".D", Tensor({dim}, 1.0));
}

Value ssm_branch(const Bind& w, const std::string& prefix, Value x,
                 const std::vector<int>& segments) {
    Value u = silu(conv1d_depthwise(x, w[prefix + ".conv"], segments));
    Value dt = vsoftplus(apply_linear(w, prefix + ".dt", u));
    Value B = apply_linear(w, prefix + ".B", u);
    Value C = apply_linear(w, prefix + ".C", u);
    Value y = selective_scan(u, dt, w[prefix + ".A"], B, C, segments);
    // per-channel skip: keeps the branch output at input scale so the fused
    // gate neither vanishes nor starves the scan path of gradient
    return add(y, mul(u, w[prefix + ".D"]));
}

namespace {

std::vector<int> reverse_within_segments(const std::vector<int>& segments, int L) {
    std::vector<int> perm(L);
    std::vector<int> seg = segments.empty() ? std::vector<int>{0, L} : segments;
    for (size_t s = 0; s + 1 < seg.size(); ++s)
        for (int i = seg[s]; i < seg[s + 1]; ++i) perm[i] = seg[s] + seg[s + 1] - 1 - i;
    return perm;
}

// per-token RMS normalization with a learned gain; keeps branch inputs at
// unit scale so the SiLU gate starts half-open instead of pinned near zero
Value rms_norm(const Bind& w, const std::string& gain, Value x) {
    Tape& t = *x.tape;
    const Tensor& xv = t.val(x);
    int L = xv.rows(), D = xv.cols();
    Value rms = scale(row_l2_norm(x), 1.0 / std::sqrt(static_cast<double>(D)));
    Value inv = div_(t.constant(Tensor({L, 1}, 1.0)), add(rms, t.constant(Tensor({L, 1}, 1e-6))));
    return mul(scale_rows(x, inv), w[gain]);
}

}  // namespace

void dual_scan_block_params(Params& p, Rng& rng, const std::string& prefix,
                            const DualScanConfig& cfg) {
    p.add(prefix + ".norm", Tensor({cfg.dim}, 1.0));
    ssm_branch_params(p, rng, prefix + ".g", cfg.dim, cfg.n_state, cfg.conv_kernel);
    ssm_branch_params(p, rng, prefix + ".l", cfg.dim, cfg.n_state, cfg.conv_kernel);
    double cs = std::sqrt(1.0 / cfg.conv_kernel);
    p.add(prefix + ".fuse", uniform_tensor(rng, {cfg.conv_kernel, cfg.dim}, -cs, cs));
    if (cfg.bidirectional_global)
        ssm_branch_params(p, rng, prefix + ".gr", cfg.dim, cfg.n_state, cfg.conv_kernel);
}

Value dual_scan_block(const Bind& w, const std::string& prefix, Value x,
                      const DualScanConfig& cfg) {
    int L = w.tape().val(x).rows();
    cfg.validate(L);

    Value xn = rms_norm(w, prefix + ".norm", x);
    Value o_global = ssm_branch(w, prefix + ".g", xn, cfg.global_segments);
    if (cfg.bidirectional_global) {
        std::vector<int> rev = reverse_within_segments(cfg.global_segments, L);
        Value xr = gather_rows(xn, rev);
        Value yr = ssm_branch(w, prefix + ".gr", xr, cfg.global_segments);
        o_global = add(o_global, scatter_rows(yr, rev, L));
    }

    Value xg = gather_rows(xn, cfg.scan_order.perm);
    Value yl = ssm_branch(w, prefix + ".l", xg, cfg.scan_order.segments);
    Value o_local = scatter_rows(yl, cfg.scan_order.perm, L);

    Value gate = silu(conv1d_depthwise(o_global, w[prefix + ".fuse"], cfg.global_segments));
    Value fused = mul(gate, o_local);
    return cfg.residual ? add(fused, x) : fused;
}

// ---- encoder -------------------------------------------------------------------

void encoder_params(Params& p, Rng& rng, const std::string& prefix, int img_dim, int dim,
                    int J) {
    init_linear(p, rng, prefix + ".xy", 2, dim);
    init_linear(p, rng, prefix + ".frame", img_dim, dim);
    p.add(prefix + ".jpos", uniform_tensor(rng, {J, dim}, -0.1, 0.1));
}

FeatureSeq encoder(const Bind& w, const std::string& prefix, Value p2d, Value f_img, int T,
                   int J, int dim) {
    const Tensor& pv = w.tape().val(p2d);
    const Tensor& fv = w.tape().val(f_img);
    if (pv.rows() != T * J || pv.cols() != 2)
        throw ShapeError("encoder: p2d must be [T*J, 2]");
    if (fv.rows() != T) throw ContractError("encoder: f_img frame count " +
                                            std::to_string(fv.rows()) + " vs T " +
                                            std::to_string(T));
    Value e = apply_linear(w, prefix + ".xy", p2d);
    Value fp = apply_linear(w, prefix + ".frame", f_img);
    std::vector<int> frame_of(T * J), joint_of(T * J);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) {
            frame_of[t * J + j] = t;
            joint_of[t * J + j] = j;
        }
    Value jp = gather_rows(w[prefix + ".jpos"], joint_of);
    Value out = silu(add(add(e, gather_rows(fp, frame_of)), jp));
    if (w.tape().val(out).cols() != dim) throw ShapeError("encoder: registered dim mismatch");
    return FeatureSeq{out, FeatureSeq::Layout::JointToken, T, J};
}

// ---- mamba stacks ---------------------------------------------------------------

void mamba_stack_params(Params& p, Rng& rng, const std::string& prefix,
                        const MambaStackConfig& cfg) {
    DualScanConfig block;
    block.dim = cfg.dim;
    block.n_state = cfg.n_state;
    block.conv_kernel = cfg.conv_kernel;
    block.bidirectional_global = cfg.bidirectional;
    for (int i = 0; i < cfg.layers; ++i)
        dual_scan_block_params(p, rng, prefix + "." + std::to_string(i), block);
}

namespace {

FeatureSeq run_stack(const Bind& w, const std::string& prefix, FeatureSeq f,
                     const MambaStackConfig& cfg, const ScanOrder& local,
                     std::vector<int> global_segments) {
    f.check();
    DualScanConfig block;
    block.dim = cfg.dim;
    block.n_state = cfg.n_state;
    block.conv_kernel = cfg.conv_kernel;
    block.scan_order = local;
    block.global_segments = std::move(global_segments);
    block.bidirectional_global = cfg.bidirectional;
    Value x = f.values;
    for (int i = 0; i < cfg.layers; ++i)
        x = dual_scan_block(w, prefix + "." + std::to_string(i), x, block);
    f.values = x;
    return f;
}

}  // namespace

FeatureSeq spatial_mamba(const Bind& w, const std::string& prefix, FeatureSeq f,
                         const KinematicTree& tree, const MambaStackConfig& cfg) {
    if (f.layout != FeatureSeq::Layout::JointToken)
        throw ContractError("spatial_mamba: joint-token layout required");
    ScanOrder local = tile_per_frame(kinematic_scan_order(tree), f.T);
    // frames are independent: both branches reset at frame boundaries
    return run_stack(w, prefix, f, cfg, local, local.segments);
}

FeatureSeq temporal_mamba(const Bind& w, const std::string& prefix, FeatureSeq f,
                          const KinematicTree& tree, const MambaStackConfig& cfg) {
    if (f.layout != FeatureSeq::Layout::JointToken)
        throw ContractError("temporal_mamba: joint-token layout required");
    ScanOrder local = temporal_chain_order(tree, f.T);
    return run_stack(w, prefix, f, cfg, local, {0, f.T * f.J});
}

// ---- deformable attention --------------------------------------------------------

void deformable_attention_params(Params& p, Rng& rng, const std::string& prefix, int dim,
                                 const DeformConfig& cfg) {
    if (cfg.heads < 1 || cfg.points < 1)
        throw ContractError("deformable attention: heads and points must be >= 1");
    for (int m = 0; m < cfg.heads; ++m) {
        std::string hp = prefix + "." + std::to_string(m);
        init_linear(p, rng, hp + ".off", dim, 2 * cfg.points);
        // spread the initial sampling points around the reference
        Tensor& ob = p.at(hp + ".off.b");
        for (int k = 0; k < cfg.points; ++k) {
            double th = 2.0 * M_PI * (k + 0.13 * (m + 1)) / cfg.points;
            ob.data[2 * k] = 0.05 * std::cos(th);
            ob.data[2 * k + 1] = 0.05 * std::sin(th);
        }
        init_linear(p, rng, hp + ".att", dim, cfg.points);
        double vs = std::sqrt(1.0 / cfg.grid_c);
        p.add(hp + ".wv", uniform_tensor(rng, {cfg.grid_c, cfg.d_head}, -vs, vs));
        double os = std::sqrt(1.0 / cfg.d_head);
        p.add(hp + ".wo", uniform_tensor(rng, {cfg.d_head, dim}, -os, os));
    }
}

FeatureSeq deformable_attention(const Bind& w, const std::string& prefix, FeatureSeq f,
                                Value grid, Value p2d, const DeformConfig& cfg) {
    f.check();
    const Tensor& gv = w.tape().val(grid);
    if (gv.ndim() != 4) throw ShapeError("deformable attention: grid must be [T, H, W, C]");
    int T = f.T, J = f.J, K = cfg.points;
    if (gv.shape[0] != T) throw ContractError("deformable attention: grid frames vs f.T");
    int H = gv.shape[1], W = gv.shape[2], C = gv.shape[3];
    if (C != cfg.grid_c) throw ShapeError("deformable attention: grid channels");

    std::vector<int> rep(T * J * K);  // token of each (token, point) slot
    for (int i = 0; i < T * J; ++i)
        for (int k = 0; k < K; ++k) rep[i * K + k] = i;
    Value ref = gather_rows(p2d, rep);  // [T*J*K, 2]

    Value out;
    for (int m = 0; m < cfg.heads; ++m) {
        std::string hp = prefix + "." + std::to_string(m);
        Value off = reshape(apply_linear(w, hp + ".off", f.values), {T * J * K, 2});
        Value coords = add(ref, off);
        Value attn = softmax_lastdim(apply_linear(w, hp + ".att", f.values));  // [T*J, K]
        Value attn_flat = reshape(attn, {T * J * K, 1});

        std::vector<Value> parts;
        for (int t = 0; t < T; ++t) {
            Value g = reshape(slice(grid, 0, t, t + 1), {H, W, C});
            Value c = slice(coords, 0, t * J * K, (t + 1) * J * K);
            parts.push_back(bilinear_sample_2d(g, c));
        }
        Value sampled = concat(parts, 0);                      // [T*J*K, C]
        Value v = matmul(sampled, w[hp + ".wv"]);              // [T*J*K, d_head]
        Value head = scatter_rows(scale_rows(v, attn_flat), rep, T * J);
        Value proj = matmul(head, w[hp + ".wo"]);              // [T*J, dim]
        out = (m == 0) ? proj : add(out, proj);
    }
    return FeatureSeq{out, FeatureSeq::Layout::JointToken, T, J};
}

// ---- heads and motion ops --------------------------------------------------------

void lifting_head_params(Params& p, Rng& rng, const std::string& prefix, int dim, int hidden) {
    init_linear(p, rng, prefix + ".h", dim, hidden);
    init_linear(p, rng, prefix + ".out", hidden, 3);
}

Value lifting_head(const Bind& w, const std::string& prefix, FeatureSeq f, int hidden) {
    f.check();
    (void)hidden;
    Value h = silu(apply_linear(w, prefix + ".h", f.values));
    return apply_linear(w, prefix + ".out", h);
}

Value explicit_motion(Value p3d, int T, int J) {
    const Tensor& pv = p3d.tape->val(p3d);
    if (pv.rows() != T * J || pv.cols() != 3)
        throw ShapeError("explicit_motion: p3d must be [T*J, 3]");
    std::vector<int> prev(T * J);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) prev[t * J + j] = std::max(t - 1, 0) * J + j;
    return sub(p3d, gather_rows(p3d, prev));
}

void implicit_motion_params(Params& p, Rng& rng, const std::string& prefix, int J, int img_dim,
                            int hidden) {
    init_linear(p, rng, prefix + ".emb", J * 3, hidden);
    init_linear(p, rng, prefix + ".g1", hidden, img_dim);
    init_linear(p, rng, prefix + ".g2", hidden, img_dim);
}

Value implicit_motion(const Bind& w, const std::string& prefix, Value p3d, Value f_img, int T,
                      int J, int hidden) {
    (void)hidden;
    Value pose = reshape(p3d, {T, J * 3});
    Value g = silu(apply_linear(w, prefix + ".emb", pose));
    Value g1 = apply_linear(w, prefix + ".g1", g);
    Value g2 = apply_linear(w, prefix + ".g2", g);
    return add(mul(vsigmoid(g1), f_img), g2);
}

void motion_aware_attention_params(Params& p, Rng& rng, const std::string& prefix, int q_dim,
                                   int imp_dim, int J, int d_k) {
    if (d_k < 1) throw ContractError("motion attention: d_k must be >= 1");
    int motion_dim = J * 3 + imp_dim;
    init_linear(p, rng, prefix + ".q", q_dim, d_k);
    init_linear(p, rng, prefix + ".k", motion_dim, d_k);
    init_linear(p, rng, prefix + ".v", motion_dim, q_dim);
}

FeatureSeq motion_aware_attention(const Bind& w, const std::string& prefix, FeatureSeq f_img,
                                  Value m_exp, Value m_imp, int J, int d_k) {
    if (f_img.layout != FeatureSeq::Layout::FrameToken)
        throw ContractError("motion attention: frame-token layout required");
    f_img.check();
    int T = f_img.T;
    Value exp_flat = reshape(m_exp, {T, J * 3});
    Value motion = concat(std::vector<Value>{exp_flat, m_imp}, 1);
    Value q = apply_linear(w, prefix + ".q", f_img.values);
    Value k = apply_linear(w, prefix + ".k", motion);
    Value v = apply_linear(w, prefix + ".v", motion);
    Value logits = scale(matmul(q, transpose2d(k)), 1.0 / std::sqrt(static_cast<double>(d_k)));
    Value attn = softmax_lastdim(logits);
    return FeatureSeq{matmul(attn, v), FeatureSeq::Layout::FrameToken, T, 1};
}

void mesh_head_params(Params& p, Rng& rng, const std::string& prefix, int dim, int J, int hidden,
                      int n_vertices) {
    init_linear(p, rng, prefix + ".h", dim + J * 3, hidden);
    init_linear(p, rng, prefix + ".out", hidden, n_vertices * 3);
}

Value mesh_head(const Bind& w, const std::string& prefix, FeatureSeq f, Value p3d,
                const Tensor& template_vertices, int hidden) {
    (void)hidden;
    f.check();
    if (f.layout != FeatureSeq::Layout::FrameToken)
        throw ContractError("mesh head: frame-token layout required");
    int T = f.T;
    int J = w.tape().val(p3d).rows() / T;
    int Nv = template_vertices.rows();
    Value anchor = reshape(p3d, {T, J * 3});
    Value h = silu(apply_linear(w, prefix + ".h",
                                concat(std::vector<Value>{f.values, anchor}, 1)));
    Value offsets = apply_linear(w, prefix + ".out", h);  // [T, Nv*3]
    Tensor tmpl({Nv * 3});
    tmpl.data = template_vertices.data;
    Value verts = add(offsets, w.tape().constant(std::move(tmpl)));
    return reshape(verts, {T * Nv, 3});
}

// ---- pipeline -------------------------------------------------------------------

bool is_stage2_param(const std::string& name) { return name.rfind("recon.", 0) == 0; }

namespace {

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    auto tag = [&](const char* what) { return std::string("pipeline/") + name + ": " + what; };
    try {
        return fn();
    } catch (const ShapeError& e) {
        throw ShapeError(tag(e.what()));
    } catch (const ContractError& e) {
        throw ContractError(tag(e.what()));
    } catch (const NumericError& e) {
        throw NumericError(tag(e.what()));
    } catch (const StructureError& e) {
        throw StructureError(tag(e.what()));
    }
}

}  // namespace

void pipeline_params(Params& p, Rng& rng, const PipelineConfig& cfg, const KinematicTree& tree) {
    (void)tree;
    init_linear(p, rng, "lift.fimg", cfg.deform.grid_c, cfg.img_dim);
    encoder_params(p, rng, "lift.enc", cfg.img_dim, cfg.lift_dim, cfg.J);
    MambaStackConfig stack{cfg.lift_layers, cfg.lift_dim, cfg.n_state, cfg.conv_kernel};
    stack.bidirectional = cfg.bidirectional_spatial;
    mamba_stack_params(p, rng, "lift.spatial", stack);
    if (cfg.use_ga) deformable_attention_params(p, rng, "lift.deform", cfg.lift_dim, cfg.deform);
    MambaStackConfig tstack = stack;
    tstack.bidirectional = cfg.bidirectional_temporal;
    mamba_stack_params(p, rng, "lift.temporal", tstack);
    lifting_head_params(p, rng, "lift.head", cfg.lift_dim, cfg.lift_hidden);
    Tensor skip({2, 3}, 0.0);
    skip.at(0, 0) = 2.0;
    skip.at(1, 1) = 2.0;
    p.add("lift.skip", skip);

    init_linear(p, rng, "recon.inproj", cfg.img_dim, cfg.recon_dim);
    if (cfg.use_im) implicit_motion_params(p, rng, "recon.imp", cfg.J, cfg.img_dim, cfg.imp_hidden);
    for (int i = 0; i < cfg.recon_layers; ++i) {
        std::string lp = "recon." + std::to_string(i);
        motion_aware_attention_params(p, rng, lp + ".att", cfg.recon_dim, cfg.img_dim, cfg.J,
                                      cfg.d_k);
        init_linear(p, rng, lp + ".ffn.h", cfg.recon_dim, cfg.recon_hidden);
        init_linear(p, rng, lp + ".ffn.out", cfg.recon_hidden, cfg.recon_dim);
    }
    mesh_head_params(p, rng, "recon.head", cfg.recon_dim, cfg.J, cfg.recon_hidden,
                     cfg.n_vertices);
}

PipelineOut pipeline_forward(const Bind& w, const PipelineConfig& cfg, const KinematicTree& tree,
                             const Tensor& template_vertices, Value p2d, Value grid) {
    Tape& tape = w.tape();
    const Tensor& gv = tape.val(grid);
    if (gv.ndim() != 4 || gv.shape[0] != cfg.T)
        throw ShapeError("pipeline: grid must be [T, H, W, C]");
    int T = cfg.T, J = cfg.J, H = gv.shape[1], W = gv.shape[2], C = gv.shape[3];
    if (tape.val(p2d).rows() != T * J) throw ContractError("pipeline: p2d rows vs T*J");

    // frame features: average-pool the grid, then a learned projection
    std::vector<int> to_frame(static_cast<size_t>(T) * H * W);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < H * W; ++i) to_frame[static_cast<size_t>(t) * H * W + i] = t;
    Value pooled = scale(scatter_rows(reshape(grid, {T * H * W, C}), to_frame, T),
                         1.0 / (H * W));
    Value f_img_v = apply_linear(w, "lift.fimg", pooled);
    FeatureSeq f_img{f_img_v, FeatureSeq::Layout::FrameToken, T, 1};

    FeatureSeq enc = stage("encoder", [&] {
        return encoder(w, "lift.enc", p2d, f_img_v, T, J, cfg.lift_dim);
    });
    MambaStackConfig stack{cfg.lift_layers, cfg.lift_dim, cfg.n_state, cfg.conv_kernel};
    stack.bidirectional = cfg.bidirectional_spatial;
    FeatureSeq f_sp = stage("spatial", [&] {
        return spatial_mamba(w, "lift.spatial", enc, tree, stack);
    });
    if (cfg.use_ga) {
        FeatureSeq att = stage("deform", [&] {
            return deformable_attention(w, "lift.deform", f_sp, grid, p2d, cfg.deform);
        });
        f_sp.values = add(f_sp.values, att.values);
    }
    MambaStackConfig tstack = stack;
    tstack.bidirectional = cfg.bidirectional_temporal;
    FeatureSeq f_tm = stage("temporal", [&] {
        return temporal_mamba(w, "lift.temporal", f_sp, tree, tstack);
    });
    Value p3d = stage("lifting", [&] { return lifting_head(w, "lift.head", f_tm, cfg.lift_hidden); });
    // the 2D observation is a scaled orthographic view of x/y; a learned skip
    // hands those coordinates to the head so training spends on depth
    p3d = add(p3d, matmul(p2d, w["lift.skip"]));
    // targets are pelvis-centered, so report every joint relative to the
    // predicted root within its own frame
    std::vector<int> root_of(static_cast<size_t>(T) * J);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) root_of[static_cast<size_t>(t) * J + j] = t * J + tree.root();
    p3d = sub(p3d, gather_rows(p3d, root_of));

    Value m_exp = stage("motion", [&] {
        return cfg.use_em ? explicit_motion(p3d, T, J) : tape.constant(Tensor({T * J, 3}, 0.0));
    });
    Value m_imp = stage("motion", [&] {
        return cfg.use_im ? implicit_motion(w, "recon.imp", p3d, f_img_v, T, J, cfg.imp_hidden)
                          : tape.constant(Tensor({T, cfg.img_dim}, 0.0));
    });

    FeatureSeq f{apply_linear(w, "recon.inproj", f_img_v), FeatureSeq::Layout::FrameToken, T, 1};
    for (int i = 0; i < cfg.recon_layers; ++i) {
        std::string lp = "recon." + std::to_string(i);
        FeatureSeq att = stage("attention", [&] {
            return motion_aware_attention(w, lp + ".att", f, m_exp, m_imp, J, cfg.d_k);
        });
        f.values = add(f.values, att.values);
        Value ffn = apply_linear(w, lp + ".ffn.out",
                                 silu(apply_linear(w, lp + ".ffn.h", f.values)));
        f.values = add(f.values, ffn);
    }
    Value mesh = stage("mesh", [&] {
        return mesh_head(w, "recon.head", f, p3d, template_vertices, cfg.recon_hidden);
    });
    return PipelineOut{p3d, mesh, f_img};
}

}  // namespace hmr

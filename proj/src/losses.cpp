#include "hmr/losses.hpp"

#include <algorithm>
#include <cmath>

namespace hmr {

namespace {

Value mean_row_norm(Value diff) { return reduce_mean(row_l2_norm(diff)); }

// rows t*J+j -> rows (t-1)*J+j (frame 0 maps to itself)
std::vector<int> prev_frame_rows(int T, int J) {
    std::vector<int> idx(static_cast<size_t>(T) * J);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) idx[t * J + j] = std::max(t - 1, 0) * J + j;
    return idx;
}

std::vector<int> next_frame_rows(int T, int J) {
    std::vector<int> idx(static_cast<size_t>(T) * J);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) idx[t * J + j] = std::min(t + 1, T - 1) * J + j;
    return idx;
}

void check_rows(const Tensor& t, int rows, int cols, const char* what) {
    if (t.ndim() != 2 || t.rows() != rows || t.cols() != cols)
        throw ContractError(std::string(what) + ": expected [" + std::to_string(rows) + ", " +
                            std::to_string(cols) + "], got " + Tensor::shape_str(t.shape));
}

}  // namespace

PoseLossTerms loss_pose(Value pred3d, Value gt3d, Value pred2d, Value gt2d, int T, int J,
                        const PoseLossWeights& w) {
    Tape& tape = *pred3d.tape;
    check_rows(tape.val(pred3d), T * J, 3, "loss_pose pred3d");
    check_rows(tape.val(gt3d), T * J, 3, "loss_pose gt3d");
    check_rows(tape.val(pred2d), T * J, 2, "loss_pose pred2d");
    check_rows(tape.val(gt2d), T * J, 2, "loss_pose gt2d");

    PoseLossTerms out;
    Value d = sub(pred3d, gt3d);
    out.l3d = mean_row_norm(d);
    out.l2d = mean_row_norm(sub(pred2d, gt2d));

    Value zero = tape.constant(Tensor({1}, 0.0));
    if (T >= 2) {
        Value vel = slice(sub(d, gather_rows(d, prev_frame_rows(T, J))), 0, J, T * J);
        out.lm = mean_row_norm(vel);
    } else {
        out.lm = zero;
    }
    if (T >= 3) {
        Value acc = add(sub(gather_rows(d, next_frame_rows(T, J)), scale(d, 2.0)),
                        gather_rows(d, prev_frame_rows(T, J)));
        out.lt = mean_row_norm(slice(acc, 0, J, (T - 1) * J));
    } else {
        out.lt = zero;
    }
    out.total = add(add(out.l3d, scale(out.lt, w.lambda_t)),
                    add(scale(out.lm, w.lambda_m), scale(out.l2d, w.lambda_2d)));
    return out;
}

std::vector<std::array<int, 2>> mesh_edges(const MiniBody& body) {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(body.faces.size() * 3);
    for (const auto& f : body.faces)
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            edges.push_back({std::min(a, b), std::max(a, b)});
        }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

MeshLossTerms loss_mesh(Value pred, Value gt, const MiniBody& body, int T,
                        const MeshLossWeights& w) {
    Tape& tape = *pred.tape;
    const int nv = body.template_vertices.rows();
    const int j_count = body.tree.joints();
    check_rows(tape.val(pred), T * nv, 3, "loss_mesh pred");
    check_rows(tape.val(gt), T * nv, 3, "loss_mesh gt");

    MeshLossTerms out;
    Value d = sub(pred, gt);
    out.lmesh = scale(reduce_mean(vabs(d)), 3.0);  // mean per-vertex L1 norm

    // regressed joints, per frame
    Value reg = tape.constant(body.joint_regressor);
    std::vector<Value> jp, jg;
    for (int t = 0; t < T; ++t) {
        jp.push_back(matmul(reg, slice(pred, 0, t * nv, (t + 1) * nv)));
        jg.push_back(matmul(reg, slice(gt, 0, t * nv, (t + 1) * nv)));
    }
    out.ljoint = mean_row_norm(sub(concat(jp, 0), concat(jg, 0)));

    // edge lengths
    std::vector<std::array<int, 2>> edges = mesh_edges(body);
    std::vector<int> ea, eb;
    for (int t = 0; t < T; ++t)
        for (const auto& e : edges) {
            ea.push_back(t * nv + e[0]);
            eb.push_back(t * nv + e[1]);
        }
    Value len_p = row_l2_norm(sub(gather_rows(pred, ea), gather_rows(pred, eb)));
    Value len_g = row_l2_norm(sub(gather_rows(gt, ea), gather_rows(gt, eb)));
    out.ledge = reduce_mean(vabs(sub(len_p, len_g)));

    // face normals: keep faces whose pred and gt triangles are non-degenerate
    const Tensor& pv = tape.val(pred);
    const Tensor& gv = tape.val(gt);
    auto cross_norm = [](const Tensor& m, int a, int b, int c, double* unit) {
        double e1[3], e2[3];
        for (int k = 0; k < 3; ++k) {
            e1[k] = m.at(b, k) - m.at(a, k);
            e2[k] = m.at(c, k) - m.at(a, k);
        }
        double cx = e1[1] * e2[2] - e1[2] * e2[1];
        double cy = e1[2] * e2[0] - e1[0] * e2[2];
        double cz = e1[0] * e2[1] - e1[1] * e2[0];
        double n = std::sqrt(cx * cx + cy * cy + cz * cz);
        if (unit != nullptr && n >= 1e-12) {
            unit[0] = cx / n;
            unit[1] = cy / n;
            unit[2] = cz / n;
        }
        return n;
    };
    std::vector<int> fa, fb, fc;
    std::vector<double> gt_units;
    for (int t = 0; t < T; ++t)
        for (const auto& f : body.faces) {
            int a = t * nv + f[0], b = t * nv + f[1], c = t * nv + f[2];
            double up[3], ug[3];
            if (cross_norm(pv, a, b, c, up) < 1e-12 || cross_norm(gv, a, b, c, ug) < 1e-12) {
                ++out.degenerate_faces;
                continue;
            }
            fa.push_back(a);
            fb.push_back(b);
            fc.push_back(c);
            gt_units.insert(gt_units.end(), {ug[0], ug[1], ug[2]});
        }
    if (fa.empty()) {
        out.lnormal = tape.constant(Tensor({1}, 0.0));
    } else {
        int m = static_cast<int>(fa.size());
        Value a = gather_rows(pred, fa);
        Value e1 = sub(gather_rows(pred, fb), a);
        Value e2 = sub(gather_rows(pred, fc), a);
        auto col = [&](Value v, int c) { return slice(v, 1, c, c + 1); };
        Value cx = sub(mul(col(e1, 1), col(e2, 2)), mul(col(e1, 2), col(e2, 1)));
        Value cy = sub(mul(col(e1, 2), col(e2, 0)), mul(col(e1, 0), col(e2, 2)));
        Value cz = sub(mul(col(e1, 0), col(e2, 1)), mul(col(e1, 1), col(e2, 0)));
        Value n = vsqrt(add(add(mul(cx, cx), mul(cy, cy)), mul(cz, cz)));
        Value unit = concat(std::vector<Value>{div_(cx, n), div_(cy, n), div_(cz, n)}, 1);
        // 1 - cos via the algebraically equal 0.5*|u_pred - u_gt|^2; this form
        // is exactly zero when pred == gt
        Value diff = sub(unit, tape.constant(Tensor::from({m, 3}, gt_units)));
        Value sq = mul(diff, diff);
        out.lnormal =
            scale(reduce_mean(matmul(sq, tape.constant(Tensor({3, 1}, 1.0)))), 0.5);
    }

    out.total = add(add(scale(out.lmesh, w.lambda_mesh), scale(out.ljoint, w.lambda_joint)),
                    add(scale(out.lnormal, w.lambda_normal), scale(out.ledge, w.lambda_edge)));
    return out;
}

}  // namespace hmr

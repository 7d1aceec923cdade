#pragma once

// Independent oracles the tests compare against. These are written from the
// math directly and deliberately share no code with the library: Taylor
// series for the ZOH factor, explicit matrix powers for the conv kernel,
// naive loops for losses and metrics.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// (e^z - 1)/z as a 30-term Taylor sum; exact to f64 for |z| <= 1.
inline double phi_taylor(double z) {
    double term = 1.0, sum = 1.0;
    for (int k = 2; k <= 30; ++k) {
        term *= z / k;
        sum += term;
    }
    return sum;
}

// exp by squaring-free direct power, used for kernel entries K[t] = C A^t B.
inline double pow_direct(double a, int t) {
    double r = 1.0;
    for (int i = 0; i < t; ++i) r *= a;
    return r;
}

inline std::vector<double> conv_kernel_power(const std::vector<double>& A_bar,
                                             const std::vector<double>& B_bar,
                                             const std::vector<double>& C, int L) {
    std::vector<double> k(L, 0.0);
    for (int t = 0; t < L; ++t)
        for (size_t i = 0; i < A_bar.size(); ++i)
            k[t] += C[i] * pow_direct(A_bar[i], t) * B_bar[i];
    return k;
}

// Plain O(L^2) causal convolution.
inline std::vector<double> conv_naive(const std::vector<double>& k,
                                      const std::vector<double>& x) {
    std::vector<double> y(x.size(), 0.0);
    for (size_t t = 0; t < x.size(); ++t)
        for (size_t j = 0; j <= t; ++j) y[t] += k[j] * x[t - j];
    return y;
}

// ---- losses / metrics ----------------------------------------------------
// Everything below works on flat row-major [rows, 3] (or [rows, 2]) arrays.

inline double dist_row(const std::vector<double>& a, const std::vector<double>& b, int row,
                       int cols) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) {
        double d = a[row * cols + c] - b[row * cols + c];
        s += d * d;
    }
    return std::sqrt(s);
}

struct PoseLossParts {
    double l3d = 0, lt = 0, lm = 0, l2d = 0, total = 0;
};

inline PoseLossParts pose_loss_naive(const std::vector<double>& p3, const std::vector<double>& g3,
                                     const std::vector<double>& p2, const std::vector<double>& g2,
                                     int T, int J, double lam_t, double lam_m, double lam_2d) {
    PoseLossParts r;
    for (int i = 0; i < T * J; ++i) r.l3d += dist_row(p3, g3, i, 3);
    r.l3d /= T * J;
    for (int i = 0; i < T * J; ++i) r.l2d += dist_row(p2, g2, i, 2);
    r.l2d /= T * J;
    if (T >= 2) {
        for (int t = 1; t < T; ++t)
            for (int j = 0; j < J; ++j) {
                double s = 0.0;
                for (int c = 0; c < 3; ++c) {
                    int i = (t * J + j) * 3 + c, ip = ((t - 1) * J + j) * 3 + c;
                    double vp = p3[i] - p3[ip], vg = g3[i] - g3[ip];
                    s += (vp - vg) * (vp - vg);
                }
                r.lm += std::sqrt(s);
            }
        r.lm /= (T - 1) * J;
    }
    if (T >= 3) {
        for (int t = 1; t < T - 1; ++t)
            for (int j = 0; j < J; ++j) {
                double s = 0.0;
                for (int c = 0; c < 3; ++c) {
                    int i = (t * J + j) * 3 + c;
                    int ip = ((t - 1) * J + j) * 3 + c, in = ((t + 1) * J + j) * 3 + c;
                    double ap = p3[in] - 2 * p3[i] + p3[ip];
                    double ag = g3[in] - 2 * g3[i] + g3[ip];
                    s += (ap - ag) * (ap - ag);
                }
                r.lt += std::sqrt(s);
            }
        r.lt /= (T - 2) * J;
    }
    r.total = r.l3d + lam_t * r.lt + lam_m * r.lm + lam_2d * r.l2d;
    return r;
}

struct MeshLossParts {
    double lmesh = 0, ljoint = 0, lnormal = 0, ledge = 0, total = 0;
    int skipped = 0;
};

inline void cross3(const double* u, const double* v, double* out) {
    out[0] = u[1] * v[2] - u[2] * v[1];
    out[1] = u[2] * v[0] - u[0] * v[2];
    out[2] = u[0] * v[1] - u[1] * v[0];
}

// faces: flat triples of vertex ids; edges: flat pairs; reg: [J, Nv] row-major.
inline MeshLossParts mesh_loss_naive(const std::vector<double>& pred,
                                     const std::vector<double>& gt,
                                     const std::vector<int>& faces,
                                     const std::vector<int>& edges,
                                     const std::vector<double>& reg, int T, int Nv, int J,
                                     double lam_mesh, double lam_joint, double lam_normal,
                                     double lam_edge) {
    MeshLossParts r;
    for (int i = 0; i < T * Nv; ++i)
        for (int c = 0; c < 3; ++c) r.lmesh += std::abs(pred[i * 3 + c] - gt[i * 3 + c]);
    r.lmesh /= T * Nv;

    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) {
                double jp = 0.0, jg = 0.0;
                for (int v = 0; v < Nv; ++v) {
                    jp += reg[j * Nv + v] * pred[(t * Nv + v) * 3 + c];
                    jg += reg[j * Nv + v] * gt[(t * Nv + v) * 3 + c];
                }
                s += (jp - jg) * (jp - jg);
            }
            r.ljoint += std::sqrt(s);
        }
    r.ljoint /= T * J;

    int f_count = static_cast<int>(faces.size()) / 3;
    int kept = 0;
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < f_count; ++f) {
            const double* pa = &pred[(t * Nv + faces[3 * f]) * 3];
            const double* pb = &pred[(t * Nv + faces[3 * f + 1]) * 3];
            const double* pc = &pred[(t * Nv + faces[3 * f + 2]) * 3];
            const double* ga = &gt[(t * Nv + faces[3 * f]) * 3];
            const double* gb = &gt[(t * Nv + faces[3 * f + 1]) * 3];
            const double* gc = &gt[(t * Nv + faces[3 * f + 2]) * 3];
            double e1p[3], e2p[3], e1g[3], e2g[3], cp[3], cg[3];
            for (int c = 0; c < 3; ++c) {
                e1p[c] = pb[c] - pa[c];
                e2p[c] = pc[c] - pa[c];
                e1g[c] = gb[c] - ga[c];
                e2g[c] = gc[c] - ga[c];
            }
            cross3(e1p, e2p, cp);
            cross3(e1g, e2g, cg);
            double np = std::sqrt(cp[0] * cp[0] + cp[1] * cp[1] + cp[2] * cp[2]);
            double ng = std::sqrt(cg[0] * cg[0] + cg[1] * cg[1] + cg[2] * cg[2]);
            if (np < 1e-12 || ng < 1e-12) {
                ++r.skipped;
                continue;
            }
            double dot = 0.0;
            for (int c = 0; c < 3; ++c) dot += (cp[c] / np) * (cg[c] / ng);
            r.lnormal += 1.0 - dot;
            ++kept;
        }
    if (kept > 0) r.lnormal /= kept;

    int e_count = static_cast<int>(edges.size()) / 2;
    for (int t = 0; t < T; ++t)
        for (int e = 0; e < e_count; ++e) {
            double lp = 0.0, lg = 0.0;
            for (int c = 0; c < 3; ++c) {
                double dp = pred[(t * Nv + edges[2 * e]) * 3 + c] -
                            pred[(t * Nv + edges[2 * e + 1]) * 3 + c];
                double dg = gt[(t * Nv + edges[2 * e]) * 3 + c] -
                            gt[(t * Nv + edges[2 * e + 1]) * 3 + c];
                lp += dp * dp;
                lg += dg * dg;
            }
            r.ledge += std::abs(std::sqrt(lp) - std::sqrt(lg));
        }
    r.ledge /= T * e_count;

    r.total = lam_mesh * r.lmesh + lam_joint * r.ljoint + lam_normal * r.lnormal +
              lam_edge * r.ledge;
    return r;
}

inline double mpjpe_naive(const std::vector<double>& pred, const std::vector<double>& gt,
                          int rows) {
    double s = 0.0;
    for (int i = 0; i < rows; ++i) s += dist_row(pred, gt, i, 3);
    return s / rows * 1000.0;
}

inline double accel_naive(const std::vector<double>& pred, const std::vector<double>& gt, int T,
                          int J, double fps) {
    double s = 0.0;
    for (int t = 1; t < T - 1; ++t)
        for (int j = 0; j < J; ++j) {
            double q = 0.0;
            for (int c = 0; c < 3; ++c) {
                int i = (t * J + j) * 3 + c;
                int ip = ((t - 1) * J + j) * 3 + c, in = ((t + 1) * J + j) * 3 + c;
                double ap = (pred[in] - 2 * pred[i] + pred[ip]) * fps * fps;
                double ag = (gt[in] - 2 * gt[i] + gt[ip]) * fps * fps;
                q += (ap - ag) * (ap - ag);
            }
            s += std::sqrt(q);
        }
    return s / ((T - 2) * J) * 1000.0;
}

}  // namespace oracle

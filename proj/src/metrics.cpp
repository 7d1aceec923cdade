#include "hmr/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

namespace hmr {

namespace {

void check_pair(const Tensor& a, const Tensor& b, const char* what) {
    if (a.ndim() != 2 || a.cols() != 3) throw ContractError(std::string(what) + ": expects [n, 3]");
    if (!same_shape(a, b)) throw ContractError(std::string(what) + ": shape mismatch " +
                                               Tensor::shape_str(a.shape) + " vs " +
                                               Tensor::shape_str(b.shape));
}

double mean_dist(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (int r = 0; r < a.rows(); ++r) {
        double q = 0.0;
        for (int c = 0; c < 3; ++c) {
            double d = a.at(r, c) - b.at(r, c);
            q += d * d;
        }
        s += std::sqrt(q);
    }
    return s / a.rows();
}

}  // namespace

Tensor root_align(const Tensor& seq, int J, int root_index) {
    if (seq.ndim() != 2 || seq.cols() != 3 || seq.rows() % J != 0)
        throw ContractError("root_align: expects [T*J, 3]");
    if (root_index < 0 || root_index >= J) throw ContractError("root_align: bad root index");
    Tensor out = seq;
    int T = seq.rows() / J;
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c)
                out.at(t * J + j, c) -= seq.at(t * J + root_index, c);
    return out;
}

double mpjpe(const Tensor& pred, const Tensor& gt) {
    check_pair(pred, gt, "mpjpe");
    return mean_dist(pred, gt) * 1000.0;
}

double pa_mpjpe(const Tensor& pred, const Tensor& gt, int J) {
    check_pair(pred, gt, "pa_mpjpe");
    if (J < 3 || pred.rows() % J != 0) throw ContractError("pa_mpjpe: expects [T*J, 3], J >= 3");
    int T = pred.rows() / J;
    double s = 0.0;
    for (int t = 0; t < T; ++t) {
        Eigen::Matrix3Xd x(3, J), y(3, J);
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c) {
                x(c, j) = pred.at(t * J + j, c);
                y(c, j) = gt.at(t * J + j, c);
            }
        Eigen::Vector3d xm = x.rowwise().mean();
        if ((x.colwise() - xm).squaredNorm() < 1e-18)
            throw NumericError("pa_mpjpe: degenerate frame " + std::to_string(t) +
                               " (all joints coincident)");
        Eigen::Matrix4d m = Eigen::umeyama(x, y, true);
        Eigen::Matrix3Xd ax = (m.topLeftCorner<3, 3>() * x).colwise() +
                              Eigen::Vector3d(m.topRightCorner<3, 1>());
        s += (ax - y).colwise().norm().sum() / J;
    }
    return s / T * 1000.0;
}

double mpvpe(const Tensor& pred, const Tensor& gt, const MiniBody& body) {
    check_pair(pred, gt, "mpvpe");
    int nv = body.template_vertices.rows();
    if (pred.rows() % nv != 0) throw ContractError("mpvpe: rows not a multiple of the vertex count");
    int T = pred.rows() / nv;
    int root = body.tree.root();
    auto aligned = [&](const Tensor& mesh) {
        Tensor out = mesh;
        for (int t = 0; t < T; ++t) {
            double rootpos[3] = {0, 0, 0};
            for (int c = 0; c < 3; ++c)
                for (int v = 0; v < nv; ++v)
                    rootpos[c] += body.joint_regressor.at(root, v) * mesh.at(t * nv + v, c);
            for (int v = 0; v < nv; ++v)
                for (int c = 0; c < 3; ++c) out.at(t * nv + v, c) -= rootpos[c];
        }
        return out;
    };
    return mean_dist(aligned(pred), aligned(gt)) * 1000.0;
}

double accel_error(const Tensor& pred, const Tensor& gt, int J, double fps) {
    check_pair(pred, gt, "accel_error");
    if (pred.rows() % J != 0) throw ContractError("accel_error: expects [T*J, 3]");
    int T = pred.rows() / J;
    if (T < 3) throw ContractError("accel_error: undefined for T < 3");
    double f2 = fps * fps;
    double s = 0.0;
    for (int t = 1; t < T - 1; ++t)
        for (int j = 0; j < J; ++j) {
            double q = 0.0;
            for (int c = 0; c < 3; ++c) {
                double ap = (pred.at((t + 1) * J + j, c) - 2.0 * pred.at(t * J + j, c) +
                             pred.at((t - 1) * J + j, c)) * f2;
                double ag = (gt.at((t + 1) * J + j, c) - 2.0 * gt.at(t * J + j, c) +
                             gt.at((t - 1) * J + j, c)) * f2;
                double d = ap - ag;
                q += d * d;
            }
            s += std::sqrt(q);
        }
    return s / ((T - 2) * J) * 1000.0;
}

}  // namespace hmr

#include "hmr/synth.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "hmr/common.hpp"
#include "hmr/io.hpp"
#include "hmr/kinematics.hpp"

namespace hmr {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;
constexpr double kBumpSigma = 0.12;      // normalized image units
constexpr double kBackgroundNoise = 0.05;

// Fixed joint-to-channel response profile, identical for every sample so the
// grid's channel structure is learnable across a split.
double channel_gain(int j, int c) { return 0.5 + 0.5 * std::sin(1.7 * j + 2.3 * c); }

}  // namespace

void MotionSpec::validate() const {
    if (T < 1) throw ContractError("motion spec: T must be >= 1, got " + std::to_string(T));
    if (!(amplitude >= 0.0 && amplitude <= std::numbers::pi))
        throw ContractError("motion spec: amplitude must lie in [0, pi], got " +
                            std::to_string(amplitude));
    if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0))
        throw ContractError("motion spec: occlusion_rate must lie in [0, 1), got " +
                            std::to_string(occlusion_rate));
    if (n_harmonics < 0) throw ContractError("motion spec: n_harmonics must be >= 0");
    if (keypoint_noise_sigma < 0.0)
        throw ContractError("motion spec: keypoint_noise_sigma must be >= 0");
    if (grid_h < 1 || grid_w < 1 || grid_c < 1)
        throw ContractError("motion spec: grid dims must be positive");
}

Sample generate_motion(const MotionSpec& spec, const MiniBody& body) {
    spec.validate();
    const KinematicTree& tree = body.tree;
    const int T = spec.T, J = tree.joints();
    Rng rng(spec.seed);

    // Angle trajectories: random-phase harmonics, normalized by the sum of
    // |coefficients| so the excursion stays within +-amplitude.
    Tensor angles({T * J, 3});
    for (int j = 0; j < J; ++j)
        for (int a = 0; a < 3; ++a) {
            std::vector<double> coef(spec.n_harmonics), phase(spec.n_harmonics);
            double norm = 0.0;
            for (int h = 0; h < spec.n_harmonics; ++h) {
                coef[h] = rng.uniform(-1.0, 1.0);
                phase[h] = rng.uniform(0.0, kTau);
                norm += std::abs(coef[h]);
            }
            double gain = norm > 0.0 ? spec.amplitude / norm : 0.0;
            for (int t = 0; t < T; ++t) {
                double th = 0.0;
                for (int h = 0; h < spec.n_harmonics; ++h)
                    th += coef[h] * std::sin(kTau * (h + 1) * t / T + phase[h]);
                angles.at(t * J + j, a) = gain * th;
            }
        }

    Sample s;
    s.angles_gt = angles;
    s.p3d_gt = forward_kinematics(tree, angles);
    s.mesh_gt = skin_mesh(body, angles);

    Tensor proj = project_orthographic(s.p3d_gt, spec.proj_scale, spec.proj_center);
    s.p2d_noisy = proj;
    for (int i = 0; i < T * J; ++i)
        for (int c = 0; c < 2; ++c) {
            double n = rng.normal();
            if (spec.keypoint_noise_sigma != 0.0)
                s.p2d_noisy.at(i, c) += spec.keypoint_noise_sigma * n;
        }

    s.visibility.assign(static_cast<size_t>(T) * J, 1);
    for (int i = 0; i < T * J; ++i)
        if (rng.bernoulli(spec.occlusion_rate)) {
            s.visibility[static_cast<size_t>(i)] = 0;
            s.p2d_noisy.at(i, 0) = 0.0;
            s.p2d_noisy.at(i, 1) = 0.0;
        }

    const int H = spec.grid_h, W = spec.grid_w, C = spec.grid_c;
    s.grid = Tensor({T, H, W, C});
    for (double& v : s.grid.data) v = kBackgroundNoise * rng.uniform(-1.0, 1.0);
    std::vector<double> spatial(static_cast<size_t>(H) * W);
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) {
            if (!s.visibility[static_cast<size_t>(t) * J + j]) continue;
            double px = proj.at(t * J + j, 0), py = proj.at(t * J + j, 1);
            for (int h = 0; h < H; ++h) {
                double yh = -1.0 + 2.0 * (h + 0.5) / H;
                for (int w = 0; w < W; ++w) {
                    double xw = -1.0 + 2.0 * (w + 0.5) / W;
                    double d2 = (xw - px) * (xw - px) + (yh - py) * (yh - py);
                    spatial[static_cast<size_t>(h) * W + w] =
                        std::exp(-d2 / (2.0 * kBumpSigma * kBumpSigma));
                }
            }
            double* frame = s.grid.data.data() + static_cast<size_t>(t) * H * W * C;
            for (int hw = 0; hw < H * W; ++hw)
                for (int c = 0; c < C; ++c)
                    frame[static_cast<size_t>(hw) * C + c] +=
                        channel_gain(j, c) * spatial[static_cast<size_t>(hw)];
        }
    return s;
}

SplitManifest make_split(uint64_t seed, int n_train, int n_eval, const MotionSpec& spec) {
    if (n_train < 1 || n_eval < 1)
        throw ContractError("make_split: n_train and n_eval must be >= 1");
    spec.validate();
    SplitManifest m;
    m.spec = spec;
    for (int i = 0; i < n_train; ++i) m.train_seeds.push_back(seed + 1 + static_cast<uint64_t>(i));
    for (int i = 0; i < n_eval; ++i)
        m.eval_seeds.push_back(seed + 1 + static_cast<uint64_t>(n_train + i));
    return m;
}

static nlohmann::json spec_to_json(const MotionSpec& s) {
    nlohmann::json j;
    j["seed"] = s.seed;
    j["T"] = s.T;
    j["amplitude"] = s.amplitude;
    j["n_harmonics"] = s.n_harmonics;
    j["occlusion_rate"] = s.occlusion_rate;
    j["keypoint_noise_sigma"] = s.keypoint_noise_sigma;
    j["grid_h"] = s.grid_h;
    j["grid_w"] = s.grid_w;
    j["grid_c"] = s.grid_c;
    j["proj_scale"] = s.proj_scale;
    j["proj_center"] = {s.proj_center[0], s.proj_center[1]};
    return j;
}

static MotionSpec spec_from_json(const nlohmann::json& j) {
    MotionSpec s;
    s.seed = j.at("seed").get<uint64_t>();
    s.T = j.at("T").get<int>();
    s.amplitude = j.at("amplitude").get<double>();
    s.n_harmonics = j.at("n_harmonics").get<int>();
    s.occlusion_rate = j.at("occlusion_rate").get<double>();
    s.keypoint_noise_sigma = j.at("keypoint_noise_sigma").get<double>();
    s.grid_h = j.at("grid_h").get<int>();
    s.grid_w = j.at("grid_w").get<int>();
    s.grid_c = j.at("grid_c").get<int>();
    s.proj_scale = j.at("proj_scale").get<double>();
    s.proj_center = {j.at("proj_center")[0].get<double>(), j.at("proj_center")[1].get<double>()};
    return s;
}

std::string split_manifest_to_json(const SplitManifest& m) {
    nlohmann::json j;
    j["format_version"] = SplitManifest::kFormatVersion;
    j["spec"] = spec_to_json(m.spec);
    j["train_seeds"] = m.train_seeds;
    j["eval_seeds"] = m.eval_seeds;
    return j.dump();
}

SplitManifest split_manifest_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != SplitManifest::kFormatVersion)
        throw IoError("split manifest: unsupported format version " +
                      j.at("format_version").dump());
    SplitManifest m;
    m.spec = spec_from_json(j.at("spec"));
    m.train_seeds = j.at("train_seeds").get<std::vector<uint64_t>>();
    m.eval_seeds = j.at("eval_seeds").get<std::vector<uint64_t>>();
    return m;
}

std::vector<Sample> generate_split(const SplitManifest& m, const MiniBody& body) {
    std::vector<Sample> out;
    out.reserve(m.train_seeds.size() + m.eval_seeds.size());
    for (uint64_t sd : m.train_seeds) {
        MotionSpec sp = m.spec;
        sp.seed = sd;
        out.push_back(generate_motion(sp, body));
    }
    for (uint64_t sd : m.eval_seeds) {
        MotionSpec sp = m.spec;
        sp.seed = sd;
        out.push_back(generate_motion(sp, body));
    }
    return out;
}

void save_dataset(const std::string& path, const SplitManifest& m,
                  const std::vector<Sample>& samples) {
    Container c;
    c.magic = kDatasetMagic;
    c.version = SplitManifest::kFormatVersion;
    c.manifest_json = split_manifest_to_json(m);
    for (size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        std::string p = "s" + std::to_string(i) + ".";
        Tensor vis({static_cast<int>(s.visibility.size())});
        for (size_t k = 0; k < s.visibility.size(); ++k) vis.data[k] = s.visibility[k];
        c.entries.push_back({p + "p2d", s.p2d_noisy});
        c.entries.push_back({p + "p3d", s.p3d_gt});
        c.entries.push_back({p + "mesh", s.mesh_gt});
        c.entries.push_back({p + "grid", s.grid});
        c.entries.push_back({p + "vis", vis});
        c.entries.push_back({p + "angles", s.angles_gt});
    }
    write_container(path, c);
}

Dataset load_dataset(const std::string& path) {
    Container c = read_container(path, kDatasetMagic);
    Dataset d;
    d.manifest = split_manifest_from_json(c.manifest_json);
    if (c.entries.size() % 6 != 0)
        throw IoError("dataset: entry count " + std::to_string(c.entries.size()) +
                      " is not a multiple of 6");
    size_t n = c.entries.size() / 6;
    size_t expected = d.manifest.train_seeds.size() + d.manifest.eval_seeds.size();
    if (n != expected)
        throw IoError("dataset: manifest names " + std::to_string(expected) +
                      " samples, file holds " + std::to_string(n));
    const int T = d.manifest.spec.T;
    for (size_t i = 0; i < n; ++i) {
        Sample s;
        s.p2d_noisy = c.entries[6 * i + 0].tensor;
        s.p3d_gt = c.entries[6 * i + 1].tensor;
        s.mesh_gt = c.entries[6 * i + 2].tensor;
        s.grid = c.entries[6 * i + 3].tensor;
        const Tensor& vis = c.entries[6 * i + 4].tensor;
        s.visibility.assign(vis.data.size(), 0);
        for (size_t k = 0; k < vis.data.size(); ++k)
            s.visibility[k] = vis.data[k] != 0.0 ? 1 : 0;
        s.angles_gt = c.entries[6 * i + 5].tensor;
        int TJ = s.p3d_gt.rows();
        if (TJ % T != 0 || s.p2d_noisy.rows() != TJ || s.angles_gt.rows() != TJ ||
            static_cast<int>(s.visibility.size()) != TJ || s.grid.dim(0) != T ||
            s.mesh_gt.rows() % T != 0)
            throw IoError("dataset: sample " + std::to_string(i) + " has inconsistent shapes");
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace hmr

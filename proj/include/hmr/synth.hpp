#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hmr/body.hpp"
#include "hmr/tensor.hpp"

namespace hmr {

// Recipe for one synthetic sequence. Everything downstream of the seed is
// deterministic, so a spec + seed IS the sample.
struct MotionSpec {
    uint64_t seed = 1;
    int T = 16;
    double amplitude = 0.6;  // radians, peak joint-angle excursion
    int n_harmonics = 3;
    double occlusion_rate = 0.0;
    double keypoint_noise_sigma = 0.0;  // normalized image units

    int grid_h = 16, grid_w = 16, grid_c = 8;
    double proj_scale = 0.5;
    std::array<double, 2> proj_center{0.0, 0.0};

    // T >= 1, amplitude in [0, pi], occlusion_rate in [0, 1), n_harmonics >= 0
    void validate() const;
};

struct Sample {
    Tensor p2d_noisy;  // [T*J, 2], occluded joints zeroed
    Tensor p3d_gt;     // [T*J, 3]
    Tensor mesh_gt;    // [T*N_v, 3]
    Tensor grid;       // [T, H, W, C]
    std::vector<uint8_t> visibility;  // T*J, 1 = visible
    Tensor angles_gt;  // [T*J, 3] axis-angle driving the sequence
};

// Smooth random motion: per joint-axis angle trajectories are sums of
// n_harmonics random-phase sinusoids, normalized so the excursion never
// exceeds `amplitude`. FK gives joints, LBS the mesh, orthographic projection
// plus Gaussian noise the keypoints; occluded joints are zeroed but kept in
// the visibility mask. The feature grid holds Gaussian bumps at the exact
// projections of visible joints over low-level background noise.
Sample generate_motion(const MotionSpec& spec, const MiniBody& body);

struct SplitManifest {
    static constexpr int kFormatVersion = 1;
    MotionSpec spec;
    std::vector<uint64_t> train_seeds;
    std::vector<uint64_t> eval_seeds;
};

// Disjoint consecutive seed ranges starting at seed + 1.
SplitManifest make_split(uint64_t seed, int n_train, int n_eval, const MotionSpec& spec);

// Canonical JSON (sorted keys, exact double round-trip).
std::string split_manifest_to_json(const SplitManifest& m);
SplitManifest split_manifest_from_json(const std::string& text);

// Single-file dataset container: manifest header + every sample's tensors,
// raw little-endian f64. Loader re-validates shape consistency.
void save_dataset(const std::string& path, const SplitManifest& m,
                  const std::vector<Sample>& samples);
struct Dataset {
    SplitManifest manifest;
    std::vector<Sample> samples;  // train split first, then eval
};
Dataset load_dataset(const std::string& path);

// Generates every sample named by the manifest (train then eval).
std::vector<Sample> generate_split(const SplitManifest& m, const MiniBody& body);

}  // namespace hmr

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "hmr/blocks.hpp"
#include "hmr/io.hpp"
#include "hmr/losses.hpp"
#include "hmr/synth.hpp"
#include "hmr/tape.hpp"

using namespace hmr;

namespace {

const MiniBody& body() {
    static MiniBody b = make_minibody();
    return b;
}

bool same_bits(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    for (size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

double mean_bone_length(const Tensor& p3d, const KinematicTree& tree, int T) {
    const int J = tree.joints();
    double sum = 0.0;
    int n = 0;
    for (int t = 0; t < T; ++t)
        for (int j = 0; j < J; ++j) {
            if (tree.parent[j] < 0) continue;
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                double e = p3d.at(t * J + j, c) - p3d.at(t * J + tree.parent[j], c);
                d += e * e;
            }
            sum += std::sqrt(d);
            ++n;
        }
    return sum / n;
}

}  // namespace

TEST_CASE("spec validation rejects out-of-range fields") {
    MotionSpec s;
    s.T = 0;
    CHECK_THROWS_AS(s.validate(), ContractError);
    s = MotionSpec{};
    s.amplitude = 3.5;
    CHECK_THROWS_AS(s.validate(), ContractError);
    s = MotionSpec{};
    s.occlusion_rate = 1.0;
    CHECK_THROWS_AS(s.validate(), ContractError);
    s = MotionSpec{};
    s.n_harmonics = -1;
    CHECK_THROWS_AS(s.validate(), ContractError);
    CHECK_NOTHROW(MotionSpec{}.validate());
}

TEST_CASE("amplitude zero gives a static rest pose with zero explicit motion") {
    MotionSpec spec;
    spec.seed = 11;
    spec.T = 5;
    spec.amplitude = 0.0;
    Sample s = generate_motion(spec, body());
    const int J = body().tree.joints();
    for (double v : s.angles_gt.data) CHECK(v == 0.0);
    for (int t = 1; t < spec.T; ++t)
        for (int j = 0; j < J; ++j)
            for (int c = 0; c < 3; ++c)
                CHECK(s.p3d_gt.at(t * J + j, c) == s.p3d_gt.at(j, c));

    Tape tape;
    Value m = explicit_motion(tape.constant(s.p3d_gt), spec.T, J);
    for (double v : tape.val(m).data) CHECK(v == 0.0);
}

TEST_CASE("no noise and no occlusion reproduce the exact projection") {
    MotionSpec spec;
    spec.seed = 12;
    spec.T = 4;
    Sample s = generate_motion(spec, body());
    Tensor proj = project_orthographic(s.p3d_gt, spec.proj_scale, spec.proj_center);
    CHECK(same_bits(s.p2d_noisy, proj));
    for (uint8_t v : s.visibility) CHECK(v == 1);

    // Lifting-stage 2D loss of ground truth against itself is exactly zero.
    const int J = body().tree.joints();
    Tape tape;
    PoseLossTerms terms =
        loss_pose(tape.constant(s.p3d_gt), tape.constant(s.p3d_gt), tape.constant(proj),
                  tape.constant(s.p2d_noisy), spec.T, J);
    CHECK(tape.val(terms.total).data[0] == 0.0);
}

TEST_CASE("same seed twice is bit-identical") {
    MotionSpec spec;
    spec.seed = 77;
    spec.T = 6;
    spec.keypoint_noise_sigma = 0.03;
    spec.occlusion_rate = 0.2;
    Sample a = generate_motion(spec, body());
    Sample b = generate_motion(spec, body());
    CHECK(same_bits(a.p2d_noisy, b.p2d_noisy));
    CHECK(same_bits(a.p3d_gt, b.p3d_gt));
    CHECK(same_bits(a.mesh_gt, b.mesh_gt));
    CHECK(same_bits(a.grid, b.grid));
    CHECK(same_bits(a.angles_gt, b.angles_gt));
    CHECK(a.visibility == b.visibility);

    Sample c = generate_motion([&] {
        MotionSpec s2 = spec;
        s2.seed = 78;
        return s2;
    }(), body());
    CHECK_FALSE(same_bits(a.p3d_gt, c.p3d_gt));
}

TEST_CASE("bone lengths are constant over time") {
    MotionSpec spec;
    spec.seed = 13;
    spec.T = 8;
    spec.amplitude = 1.1;
    Sample s = generate_motion(spec, body());
    const KinematicTree& tree = body().tree;
    const int J = tree.joints();
    for (int j = 0; j < J; ++j) {
        if (tree.parent[j] < 0) continue;
        double ref = 0.0;
        for (int t = 0; t < spec.T; ++t) {
            double d = 0.0;
            for (int c = 0; c < 3; ++c) {
                double e = s.p3d_gt.at(t * J + j, c) - s.p3d_gt.at(t * J + tree.parent[j], c);
                d += e * e;
            }
            d = std::sqrt(d);
            if (t == 0)
                ref = d;
            else
                CHECK(std::abs(d - ref) < 1e-12);
        }
    }
}

TEST_CASE("occlusion zeroes keypoints and hits its marginal rate") {
    MotionSpec spec;
    spec.T = 16;
    spec.occlusion_rate = 0.25;
    spec.keypoint_noise_sigma = 0.05;
    const int J = body().tree.joints();
    int slots = 0, occluded = 0;
    for (uint64_t seed = 500; seed < 540; ++seed) {
        spec.seed = seed;
        Sample s = generate_motion(spec, body());
        for (int i = 0; i < spec.T * J; ++i) {
            ++slots;
            if (!s.visibility[static_cast<size_t>(i)]) {
                ++occluded;
                CHECK(s.p2d_noisy.at(i, 0) == 0.0);
                CHECK(s.p2d_noisy.at(i, 1) == 0.0);
            }
        }
    }
    REQUIRE(slots >= 10000);
    double rate = static_cast<double>(occluded) / slots;
    CHECK(std::abs(rate - spec.occlusion_rate) < 0.02);
}

TEST_CASE("grid bumps sit on visible projected joints") {
    MotionSpec spec;
    spec.seed = 21;
    spec.T = 3;
    Sample s = generate_motion(spec, body());
    const int J = body().tree.joints();
    const int H = spec.grid_h, W = spec.grid_w, C = spec.grid_c;
    for (int t = 0; t < spec.T; ++t) {
        // strongest channel-summed cell must lie near some projected joint
        double best = -1e300;
        int bh = 0, bw = 0;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c)
                    acc += s.grid.data[((static_cast<size_t>(t) * H + h) * W + w) * C + c];
                if (acc > best) {
                    best = acc;
                    bh = h;
                    bw = w;
                }
            }
        double cx = -1.0 + 2.0 * (bw + 0.5) / W;
        double cy = -1.0 + 2.0 * (bh + 0.5) / H;
        double nearest = 1e300;
        for (int j = 0; j < J; ++j) {
            double dx = s.p2d_noisy.at(t * J + j, 0) - cx;
            double dy = s.p2d_noisy.at(t * J + j, 1) - cy;
            nearest = std::min(nearest, std::sqrt(dx * dx + dy * dy));
        }
        CHECK(nearest < 2.0 * 2.0 / W);
    }
}

TEST_CASE("make_split yields disjoint seeds and a round-trippable manifest") {
    MotionSpec spec;
    SplitManifest m = make_split(100, 8, 2, spec);
    CHECK(m.train_seeds.size() == 8);
    CHECK(m.eval_seeds.size() == 2);
    std::vector<uint64_t> all = m.train_seeds;
    all.insert(all.end(), m.eval_seeds.begin(), m.eval_seeds.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());

    std::string j1 = split_manifest_to_json(m);
    SplitManifest m2 = split_manifest_from_json(j1);
    std::string j2 = split_manifest_to_json(m2);
    CHECK(j1 == j2);
    CHECK(m2.train_seeds == m.train_seeds);
    CHECK(m2.eval_seeds == m.eval_seeds);
    CHECK(m2.spec.T == m.spec.T);

    CHECK_THROWS_AS(make_split(1, 0, 1, spec), ContractError);
}

TEST_CASE("train and eval statistics agree") {
    MotionSpec spec;
    spec.T = 8;
    SplitManifest m = make_split(900, 8, 2, spec);
    std::vector<Sample> samples = generate_split(m, body());
    REQUIRE(samples.size() == 10);
    double train = 0.0, eval = 0.0;
    for (size_t i = 0; i < 8; ++i)
        train += mean_bone_length(samples[i].p3d_gt, body().tree, spec.T) / 8.0;
    for (size_t i = 8; i < 10; ++i)
        eval += mean_bone_length(samples[i].p3d_gt, body().tree, spec.T) / 2.0;
    CHECK(std::abs(train - eval) / train < 0.05);
}

TEST_CASE("dataset container round-trips bit-exactly") {
    MotionSpec spec;
    spec.T = 3;
    spec.keypoint_noise_sigma = 0.02;
    spec.occlusion_rate = 0.1;
    SplitManifest m = make_split(300, 2, 1, spec);
    std::vector<Sample> samples = generate_split(m, body());

    const std::string path = "synth_roundtrip.hmrd";
    save_dataset(path, m, samples);
    uint64_t h1 = file_fnv1a(path);
    save_dataset(path, m, samples);
    CHECK(file_fnv1a(path) == h1);

    Dataset d = load_dataset(path);
    CHECK(split_manifest_to_json(d.manifest) == split_manifest_to_json(m));
    REQUIRE(d.samples.size() == samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(same_bits(d.samples[i].p2d_noisy, samples[i].p2d_noisy));
        CHECK(same_bits(d.samples[i].p3d_gt, samples[i].p3d_gt));
        CHECK(same_bits(d.samples[i].mesh_gt, samples[i].mesh_gt));
        CHECK(same_bits(d.samples[i].grid, samples[i].grid));
        CHECK(same_bits(d.samples[i].angles_gt, samples[i].angles_gt));
        CHECK(d.samples[i].visibility == samples[i].visibility);
    }

    CHECK_THROWS_AS(read_container(path, kCheckpointMagic), IoError);
    CHECK_THROWS_AS(load_dataset("no_such_file.hmrd"), IoError);
    std::remove(path.c_str());
}

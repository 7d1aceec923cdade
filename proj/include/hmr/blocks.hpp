#pragma once

#include <string>
#include <vector>

#include "hmr/kinematics.hpp"
#include "hmr/params.hpp"
#include "hmr/ssm.hpp"

namespace hmr {

// Token sequence with an explicit layout tag. Joint-token: [T*J, dim] rows
// frame-major; frame-token: [T, dim].
struct FeatureSeq {
    enum class Layout { JointToken, FrameToken };
    Value values;
    Layout layout;
    int T = 0;
    int J = 1;

    void check() const;
};

struct DualScanConfig {
    int dim = 0;
    int n_state = 0;
    int conv_kernel = 3;  // odd
    ScanOrder scan_order;               // local branch: permutation + reset segments
    std::vector<int> global_segments;   // reset segments of the linear-order branch
    bool residual = true;
    // adds a reversed global scan (own weights) on top of the forward one
    bool bidirectional_global = false;

    void validate(int tokens) const;
};

// ---- registration + forward pairs. Prefixes namespace the weights. --------

// One scan branch: depthwise Conv1D -> SiLU -> input-dependent selective scan,
// with state resets at `segments`. Both halves of the dual-scan block are
// instances of this.
void ssm_branch_params(Params& p, Rng& rng, const std::string& prefix, int dim, int n_state,
                       int conv_kernel);
Value ssm_branch(const Bind& w, const std::string& prefix, Value x,
                 const std::vector<int>& segments);

void dual_scan_block_params(Params& p, Rng& rng, const std::string& prefix,
                            const DualScanConfig& cfg);
Value dual_scan_block(const Bind& w, const std::string& prefix, Value x,
                      const DualScanConfig& cfg);

// (x, y) joint coords + a learned broadcast of the frame feature -> dim.
void encoder_params(Params& p, Rng& rng, const std::string& prefix, int img_dim, int dim,
                    int J);
FeatureSeq encoder(const Bind& w, const std::string& prefix, Value p2d, Value f_img, int T,
                   int J, int dim);

// Stacks `layers` dual-scan blocks; `spatial` decides the orders: per-frame
// joint tokens with the kinematic local scan, or cross-frame tokens with the
// chain-wise temporal local scan.
struct MambaStackConfig {
    int layers = 3;
    int dim = 0;
    int n_state = 8;
    int conv_kernel = 3;
    bool bidirectional = false;  // global branch scans both directions, summed
};
void mamba_stack_params(Params& p, Rng& rng, const std::string& prefix,
                        const MambaStackConfig& cfg);
FeatureSeq spatial_mamba(const Bind& w, const std::string& prefix, FeatureSeq f,
                         const KinematicTree& tree, const MambaStackConfig& cfg);
FeatureSeq temporal_mamba(const Bind& w, const std::string& prefix, FeatureSeq f,
                          const KinematicTree& tree, const MambaStackConfig& cfg);

// Multi-head deformable sampling attention. grid [T, H, W, C]; reference
// points are each token's 2D location in normalized [-1, 1] coords; M heads
// sample K offset points each, softmax-weighted over K.
struct DeformConfig {
    int heads = 2;
    int points = 4;
    int d_head = 8;
    int grid_c = 8;
};
void deformable_attention_params(Params& p, Rng& rng, const std::string& prefix, int dim,
                                 const DeformConfig& cfg);
FeatureSeq deformable_attention(const Bind& w, const std::string& prefix, FeatureSeq f,
                                Value grid, Value p2d, const DeformConfig& cfg);

// 2-layer MLP per joint token -> 3 coords.
void lifting_head_params(Params& p, Rng& rng, const std::string& prefix, int dim, int hidden);
Value lifting_head(const Bind& w, const std::string& prefix, FeatureSeq f, int hidden);

// M_exp: frame differences of the 3D pose, first frame zero. p3d [T*J, 3].
Value explicit_motion(Value p3d, int T, int J);

// M_imp: sigmoid(g1) * f_img + g2 from a per-frame pose embedding.
void implicit_motion_params(Params& p, Rng& rng, const std::string& prefix, int J, int img_dim,
                            int hidden);
Value implicit_motion(const Bind& w, const std::string& prefix, Value p3d, Value f_img, int T,
                      int J, int hidden);

// Scaled dot-product attention over frames: queries from the frame features,
// keys/values from the per-frame concat of flattened M_exp and M_imp. Output
// dim matches the query dim.
void motion_aware_attention_params(Params& p, Rng& rng, const std::string& prefix, int q_dim,
                                   int imp_dim, int J, int d_k);
FeatureSeq motion_aware_attention(const Bind& w, const std::string& prefix, FeatureSeq f_img,
                                  Value m_exp, Value m_imp, int J, int d_k);

// Per-frame MLP on (feature, flattened anchor pose) -> vertex offsets added
// to the rest template.
void mesh_head_params(Params& p, Rng& rng, const std::string& prefix, int dim, int J, int hidden,
                      int n_vertices);
Value mesh_head(const Bind& w, const std::string& prefix, FeatureSeq f, Value p3d,
                const Tensor& template_vertices, int hidden);

// ---- full two-stage pipeline ------------------------------------------------

struct PipelineConfig {
    int T = 16;
    int J = 17;
    int lift_dim = 64;
    int recon_dim = 16;
    int img_dim = 64;
    int n_state = 8;
    int conv_kernel = 3;
    int lift_layers = 3;
    int recon_layers = 3;
    int lift_hidden = 64;   // lifting head MLP
    int recon_hidden = 64;  // mesh head MLP
    int imp_hidden = 32;    // implicit-motion embedding
    int d_k = 16;           // motion attention key dim
    DeformConfig deform;
    int grid_h = 16, grid_w = 16;
    int n_vertices = 602;
    // ablation switches: guided (deformable) attention, explicit motion,
    // implicit motion
    bool use_ga = true;
    bool use_em = true;
    bool use_im = true;
    bool bidirectional_temporal = false;
    bool bidirectional_spatial = false;
};

struct PipelineOut {
    Value p3d;     // [T*J, 3]
    Value mesh;    // [T*N_v, 3]
    FeatureSeq f_img;
};

void pipeline_params(Params& p, Rng& rng, const PipelineConfig& cfg,
                     const KinematicTree& tree);
// p2d [T*J, 2], grid [T, H, W, C]. Both are usually constants on the tape.
PipelineOut pipeline_forward(const Bind& w, const PipelineConfig& cfg, const KinematicTree& tree,
                             const Tensor& template_vertices, Value p2d, Value grid);

// Stage boundary helper: every stage-1 weight name starts with "lift.",
// stage-2 with "recon.".
bool is_stage2_param(const std::string& name);

}  // namespace hmr

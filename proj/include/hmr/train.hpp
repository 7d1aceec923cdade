#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmr/blocks.hpp"
#include "hmr/params.hpp"
#include "hmr/synth.hpp"

namespace hmr {

// One flat config drives data generation, training, eval, and ablation.
// Width fields hold the reference architecture's sizes; width_factor scales
// them to desk scale (0.25 -> lifting dim 64, reconstruction dim 16).
struct RunConfig {
    std::string stage = "lift";  // lift | mesh | end2end
    int T = 16;
    int stride = 4;
    int lift_layers = 3;
    int lift_dim = 256;
    int recon_layers = 3;
    int recon_dim = 64;
    double width_factor = 0.25;
    double lr = 2e-4;
    double lr2 = 5e-5;
    int batch = 2;
    int epochs = 200;
    int epochs2 = 100;
    double weight_decay = 0.01;
    double lr_decay = 0.99;
    uint64_t seed = 1;
    bool ga = true, em = true, im = true;
    bool bidir = false;         // bidirectional temporal scan in the lifting trunk
    bool bidir_spatial = false;  // bidirectional per-frame joint scan

    // synthetic data recipe (sequences are generated T*stride frames long and
    // sampled back down with the stride during training)
    int n_train = 8;
    int n_eval = 2;
    double amplitude = 0.6;
    int n_harmonics = 3;
    double noise_sigma = 0.0;
    double occlusion = 0.0;

    void validate() const;
    int lift_dim_scaled() const;
    int recon_dim_scaled() const;
    PipelineConfig pipeline_config(const KinematicTree& tree, int n_vertices) const;
    MotionSpec motion_spec() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    // unknown keys and malformed values raise ContractError
    static RunConfig from_kv(const std::map<std::string, std::string>& kv);
};

// `key = value` lines, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_kv_text(const std::string& text);
std::map<std::string, std::string> parse_kv_file(const std::string& path);

// Adam with decoupled weight decay; slot order follows Params registration
// order, so updates are deterministic.
class AdamW {
public:
    explicit AdamW(const Params& p, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    // grads[i] pairs with p.names()[i]; trainable[i] == 0 freezes that tensor
    void step(Params& p, const std::vector<Tensor>& grads, double lr, double weight_decay,
              const std::vector<uint8_t>& trainable);

private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct EvalMetrics {
    double mpjpe = 0.0;     // root-aligned, mm
    double pa_mpjpe = 0.0;  // mm
    double mpvpe = 0.0;     // mm
    double accel = 0.0;     // mm/s^2
};

struct RunReport {
    nlohmann::json config;
    std::vector<double> stage1_losses;
    std::vector<double> stage2_losses;
    // keys exactly MPJPE, PA-MPJPE, MPVPE, Accel (train split)
    std::map<std::string, double> metrics;
    bool aborted = false;
    std::string diagnostic;
    bool losses_monotone = false;
    // excluded from the determinism hash
    double wall_seconds = 0.0;
    std::string source_rev = "unknown";
};

// Canonical JSON with a determinism_hash over the timing-free fields.
nlohmann::json report_json(const RunReport& r);
std::string report_csv(const RunReport& r);
uint64_t report_determinism_hash(const RunReport& r);
std::string source_revision();

// Checkpoint container (HMRW): weights in registration order + JSON meta
// holding the config snapshot. Refuses to write non-finite values; loading
// into a mismatched registry raises IoError naming the offending tensor.
void save_checkpoint(const std::string& path, const Params& p, const nlohmann::json& meta);
nlohmann::json load_checkpoint_into(const std::string& path, Params& p);
nlohmann::json checkpoint_meta(const std::string& path);

// Takes frames 0, stride, 2*stride, ... from a raw sample.
Sample subsample_window(const Sample& s, int T, int stride, int J, int n_vertices);

struct TrainOutcome {
    RunReport report;
    Params params;
};

// Runs the configured stage(s) on the dataset's train split. `init` seeds the
// weights (the mesh stage requires it: it fine-tunes a lifting checkpoint).
TrainOutcome train_run(const RunConfig& cfg, const Dataset& data, const MiniBody& body,
                       const Params* init = nullptr);

EvalMetrics evaluate_model(const Params& params, const RunConfig& cfg, const MiniBody& body,
                           const std::vector<Sample>& windows);

}  // namespace hmr

#include "hmr/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hmr/io.hpp"
#include "hmr/losses.hpp"
#include "hmr/metrics.hpp"
#include "hmr/tape.hpp"

namespace hmr {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ContractError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    double d = parse_double(key, v);
    int i = static_cast<int>(d);
    if (d != i) throw ContractError("config: " + key + " must be an integer, got '" + v + "'");
    return i;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ContractError("config: bad unsigned value for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ContractError("config: bad boolean for " + key + ": '" + v + "'");
}

void require_positive(const char* what, double v) {
    if (!(v > 0)) throw ContractError("config: " + std::string(what) + " must be positive");
}

}  // namespace

void RunConfig::validate() const {
    if (stage != "lift" && stage != "mesh" && stage != "end2end")
        throw ContractError("config: stage must be lift, mesh, or end2end, got '" + stage + "'");
    require_positive("T", T);
    require_positive("stride", stride);
    require_positive("lift_layers", lift_layers);
    require_positive("lift_dim", lift_dim);
    require_positive("recon_layers", recon_layers);
    require_positive("recon_dim", recon_dim);
    require_positive("width_factor", width_factor);
    require_positive("lr", lr);
    require_positive("lr2", lr2);
    require_positive("batch", batch);
    require_positive("epochs", epochs);
    require_positive("epochs2", epochs2);
    require_positive("lr_decay", lr_decay);
    if (weight_decay < 0) throw ContractError("config: weight_decay must be >= 0");
    require_positive("n_train", n_train);
    require_positive("n_eval", n_eval);
    motion_spec().validate();
}

int RunConfig::lift_dim_scaled() const {
    return std::max(4, static_cast<int>(std::lround(lift_dim * width_factor)));
}

int RunConfig::recon_dim_scaled() const {
    return std::max(4, static_cast<int>(std::lround(recon_dim * width_factor)));
}

PipelineConfig RunConfig::pipeline_config(const KinematicTree& tree, int n_vertices) const {
    PipelineConfig pc;
    pc.T = T;
    pc.J = tree.joints();
    pc.lift_dim = lift_dim_scaled();
    pc.recon_dim = recon_dim_scaled();
    pc.img_dim = lift_dim_scaled();
    pc.lift_layers = lift_layers;
    pc.recon_layers = recon_layers;
    pc.n_vertices = n_vertices;
    pc.use_ga = ga;
    pc.use_em = em;
    pc.use_im = im;
    pc.bidirectional_temporal = bidir;
    pc.bidirectional_spatial = bidir_spatial;
    pc.lift_hidden = 4 * pc.lift_dim;
    pc.recon_hidden = 4 * pc.recon_dim;
    MotionSpec ms = motion_spec();
    pc.grid_h = ms.grid_h;
    pc.grid_w = ms.grid_w;
    pc.deform.grid_c = ms.grid_c;
    return pc;
}

MotionSpec RunConfig::motion_spec() const {
    MotionSpec ms;
    ms.T = T * stride;
    ms.amplitude = amplitude;
    ms.n_harmonics = n_harmonics;
    ms.keypoint_noise_sigma = noise_sigma;
    ms.occlusion_rate = occlusion;
    return ms;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["stage"] = stage;
    j["T"] = T;
    j["stride"] = stride;
    j["lift_layers"] = lift_layers;
    j["lift_dim"] = lift_dim;
    j["recon_layers"] = recon_layers;
    j["recon_dim"] = recon_dim;
    j["width_factor"] = width_factor;
    j["lr"] = lr;
    j["lr2"] = lr2;
    j["batch"] = batch;
    j["epochs"] = epochs;
    j["epochs2"] = epochs2;
    j["weight_decay"] = weight_decay;
    j["lr_decay"] = lr_decay;
    j["seed"] = seed;
    j["ga"] = ga;
    j["em"] = em;
    j["im"] = im;
    j["bidir"] = bidir;
    j["bidir_spatial"] = bidir_spatial;
    j["n_train"] = n_train;
    j["n_eval"] = n_eval;
    j["amplitude"] = amplitude;
    j["n_harmonics"] = n_harmonics;
    j["noise_sigma"] = noise_sigma;
    j["occlusion"] = occlusion;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.stage = j.at("stage").get<std::string>();
    c.T = j.at("T").get<int>();
    c.stride = j.at("stride").get<int>();
    c.lift_layers = j.at("lift_layers").get<int>();
    c.lift_dim = j.at("lift_dim").get<int>();
    c.recon_layers = j.at("recon_layers").get<int>();
    c.recon_dim = j.at("recon_dim").get<int>();
    c.width_factor = j.at("width_factor").get<double>();
    c.lr = j.at("lr").get<double>();
    c.lr2 = j.at("lr2").get<double>();
    c.batch = j.at("batch").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.epochs2 = j.at("epochs2").get<int>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.seed = j.at("seed").get<uint64_t>();
    c.ga = j.at("ga").get<bool>();
    c.em = j.at("em").get<bool>();
    c.im = j.at("im").get<bool>();
    c.bidir = j.at("bidir").get<bool>();
    c.bidir_spatial = j.at("bidir_spatial").get<bool>();
    c.n_train = j.at("n_train").get<int>();
    c.n_eval = j.at("n_eval").get<int>();
    c.amplitude = j.at("amplitude").get<double>();
    c.n_harmonics = j.at("n_harmonics").get<int>();
    c.noise_sigma = j.at("noise_sigma").get<double>();
    c.occlusion = j.at("occlusion").get<double>();
    c.validate();
    return c;
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, val] : kv) {
        if (key == "stage")
            c.stage = val;
        else if (key == "T")
            c.T = parse_int(key, val);
        else if (key == "stride")
            c.stride = parse_int(key, val);
        else if (key == "lift_layers")
            c.lift_layers = parse_int(key, val);
        else if (key == "lift_dim")
            c.lift_dim = parse_int(key, val);
        else if (key == "recon_layers")
            c.recon_layers = parse_int(key, val);
        else if (key == "recon_dim")
            c.recon_dim = parse_int(key, val);
        else if (key == "width_factor")
            c.width_factor = parse_double(key, val);
        else if (key == "lr")
            c.lr = parse_double(key, val);
        else if (key == "lr2")
            c.lr2 = parse_double(key, val);
        else if (key == "batch")
            c.batch = parse_int(key, val);
        else if (key == "epochs")
            c.epochs = parse_int(key, val);
        else if (key == "epochs2")
            c.epochs2 = parse_int(key, val);
        else if (key == "weight_decay")
            c.weight_decay = parse_double(key, val);
        else if (key == "lr_decay")
            c.lr_decay = parse_double(key, val);
        else if (key == "seed")
            c.seed = parse_u64(key, val);
        else if (key == "ga")
            c.ga = parse_bool(key, val);
        else if (key == "em")
            c.em = parse_bool(key, val);
        else if (key == "im")
            c.im = parse_bool(key, val);
        else if (key == "bidir")
            c.bidir = parse_bool(key, val);
        else if (key == "bidir_spatial")
            c.bidir_spatial = parse_bool(key, val);
        else if (key == "n_train")
            c.n_train = parse_int(key, val);
        else if (key == "n_eval")
            c.n_eval = parse_int(key, val);
        else if (key == "amplitude")
            c.amplitude = parse_double(key, val);
        else if (key == "n_harmonics")
            c.n_harmonics = parse_int(key, val);
        else if (key == "noise_sigma")
            c.noise_sigma = parse_double(key, val);
        else if (key == "occlusion")
            c.occlusion = parse_double(key, val);
        else
            throw ContractError("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ContractError("config: line " + std::to_string(lineno) + " has no '='");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ContractError("config: empty key on line " + std::to_string(lineno));
        kv[key] = val;
    }
    return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_kv_text(ss.str());
}

AdamW::AdamW(const Params& p, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const std::string& name : p.names()) {
        m_.emplace_back(p.at(name).shape, 0.0);
        v_.emplace_back(p.at(name).shape, 0.0);
    }
}

void AdamW::step(Params& p, const std::vector<Tensor>& grads, double lr, double weight_decay,
                 const std::vector<uint8_t>& trainable) {
    const auto& names = p.names();
    if (grads.size() != names.size() || trainable.size() != names.size())
        throw ContractError("adamw: grads/trainable size mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < names.size(); ++i) {
        if (!trainable[i]) continue;
        Tensor& w = p.at(names[i]);
        const Tensor& g = grads[i];
        for (size_t k = 0; k < w.data.size(); ++k) {
            double gk = g.data[k];
            m_[i].data[k] = beta1_ * m_[i].data[k] + (1.0 - beta1_) * gk;
            v_[i].data[k] = beta2_ * v_[i].data[k] + (1.0 - beta2_) * gk * gk;
            double mhat = m_[i].data[k] / bc1;
            double vhat = v_[i].data[k] / bc2;
            w.data[k] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * w.data[k]);
        }
    }
}

Sample subsample_window(const Sample& s, int T, int stride, int J, int n_vertices) {
    if (s.p3d_gt.rows() < ((T - 1) * stride + 1) * J)
        throw ContractError("subsample: raw sample too short for T=" + std::to_string(T) +
                            " stride=" + std::to_string(stride));
    const int H = s.grid.dim(1), W = s.grid.dim(2), C = s.grid.dim(3);
    Sample w;
    w.p2d_noisy = Tensor({T * J, 2});
    w.p3d_gt = Tensor({T * J, 3});
    w.angles_gt = Tensor({T * J, 3});
    w.mesh_gt = Tensor({T * n_vertices, 3});
    w.grid = Tensor({T, H, W, C});
    w.visibility.assign(static_cast<size_t>(T) * J, 1);
    const size_t frame_cells = static_cast<size_t>(H) * W * C;
    for (int t = 0; t < T; ++t) {
        int src = t * stride;
        for (int j = 0; j < J; ++j) {
            for (int c = 0; c < 2; ++c) w.p2d_noisy.at(t * J + j, c) = s.p2d_noisy.at(src * J + j, c);
            for (int c = 0; c < 3; ++c) {
                w.p3d_gt.at(t * J + j, c) = s.p3d_gt.at(src * J + j, c);
                w.angles_gt.at(t * J + j, c) = s.angles_gt.at(src * J + j, c);
            }
            w.visibility[static_cast<size_t>(t) * J + j] =
                s.visibility[static_cast<size_t>(src) * J + j];
        }
        for (int v = 0; v < n_vertices; ++v)
            for (int c = 0; c < 3; ++c)
                w.mesh_gt.at(t * n_vertices + v, c) = s.mesh_gt.at(src * n_vertices + v, c);
        std::copy_n(s.grid.data.begin() + static_cast<int64_t>(src) * frame_cells, frame_cells,
                    w.grid.data.begin() + static_cast<int64_t>(t) * frame_cells);
    }
    return w;
}

namespace {

// global-norm gradient clip; generous bound, only trims the spikes that show
// up in the first few epochs at high learning rates
constexpr double kClipNorm = 1.0;

Value reproject(Tape& tape, Value p3d, const MotionSpec& ms) {
    Value xy = slice(p3d, 1, 0, 2);
    Value scaled = scale(xy, ms.proj_scale);
    if (ms.proj_center[0] == 0.0 && ms.proj_center[1] == 0.0) return scaled;
    return add(scaled, tape.constant(Tensor::from({2}, {ms.proj_center[0], ms.proj_center[1]})));
}

struct StageSpec {
    bool mesh_loss;        // pose loss otherwise
    double lr0;
    int epochs;
    std::vector<uint8_t> trainable;
};

// Returns false on a non-finite loss (params already rolled back).
bool train_stage(const RunConfig& cfg, const StageSpec& st, Params& params,
                 const PipelineConfig& pcfg, const KinematicTree& tree, const MiniBody& body,
                 const std::vector<Sample>& windows, std::vector<double>& epoch_losses,
                 std::string& diagnostic) {
    AdamW opt(params, 0.95, 0.98);
    const auto& names = params.names();
    MotionSpec ms = cfg.motion_spec();
    // Polyak average of the weights; the averaged point sits below the noise
    // floor the raw iterates bounce around late in training
    constexpr double kEmaDecay = 0.995;
    std::vector<Tensor> ema;
    for (const std::string& n : names) ema.push_back(params.at(n));
    for (int epoch = 0; epoch < st.epochs; ++epoch) {
        double lr = st.lr0 * std::pow(cfg.lr_decay, epoch);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < windows.size(); start += static_cast<size_t>(cfg.batch)) {
            size_t stop = std::min(windows.size(), start + static_cast<size_t>(cfg.batch));
            std::vector<Tensor> grads;
            for (const std::string& n : names) grads.emplace_back(params.at(n).shape, 0.0);
            std::vector<Tensor> snapshot;
            for (const std::string& n : names) snapshot.push_back(params.at(n));
            double inv = 1.0 / static_cast<double>(stop - start);
            for (size_t i = start; i < stop; ++i) {
                const Sample& win = windows[i];
                Tape tape;
                Bind w(tape, params, true);
                PipelineOut out =
                    pipeline_forward(w, pcfg, tree, body.template_vertices,
                                     tape.constant(win.p2d_noisy), tape.constant(win.grid));
                Value loss;
                if (st.mesh_loss) {
                    loss = loss_mesh(out.mesh, tape.constant(win.mesh_gt), body, pcfg.T).total;
                } else {
                    loss = loss_pose(out.p3d, tape.constant(win.p3d_gt),
                                     reproject(tape, out.p3d, ms),
                                     tape.constant(win.p2d_noisy), pcfg.T, pcfg.J)
                               .total;
                }
                double lv = tape.val(loss).data[0];
                if (!std::isfinite(lv)) {
                    for (size_t k = 0; k < names.size(); ++k) params.at(names[k]) = snapshot[k];
                    diagnostic = "non-finite loss at epoch " + std::to_string(epoch) +
                                 ", window " + std::to_string(i) +
                                 "; restored last finite weights";
                    return false;
                }
                epoch_loss += lv / static_cast<double>(windows.size());
                tape.backward(loss);
                for (size_t k = 0; k < names.size(); ++k) {
                    const Tensor& g = w.grad(names[k]);
                    for (size_t d = 0; d < g.data.size(); ++d) {
                        if (!std::isfinite(g.data[d])) {
                            for (size_t q = 0; q < names.size(); ++q)
                                params.at(names[q]) = snapshot[q];
                            diagnostic = "non-finite gradient for " + names[k] + " at epoch " +
                                         std::to_string(epoch) + "; restored last finite weights";
                            return false;
                        }
                        grads[k].data[d] += inv * g.data[d];
                    }
                }
            }
            double gsq = 0.0;
            for (size_t k = 0; k < names.size(); ++k) {
                if (!st.trainable[k]) continue;
                for (double g : grads[k].data) gsq += g * g;
            }
            if (gsq > kClipNorm * kClipNorm) {
                double scale_by = kClipNorm / std::sqrt(gsq);
                for (Tensor& g : grads)
                    for (double& v : g.data) v *= scale_by;
            }
            opt.step(params, grads, lr, cfg.weight_decay, st.trainable);
            for (size_t k = 0; k < names.size(); ++k) {
                const Tensor& cur = params.at(names[k]);
                for (size_t d = 0; d < cur.data.size(); ++d)
                    ema[k].data[d] = kEmaDecay * ema[k].data[d] + (1.0 - kEmaDecay) * cur.data[d];
            }
        }
        epoch_losses.push_back(epoch_loss);
    }
    for (size_t k = 0; k < names.size(); ++k) params.at(names[k]) = ema[k];
    return true;
}

bool curve_monotone(const std::vector<double>& losses) {
    for (size_t i = 1; i < losses.size(); ++i)
        if (losses[i] > losses[i - 1] + 1e-9 * std::max(1.0, std::abs(losses[i - 1])))
            return false;
    return !losses.empty();
}

}  // namespace

TrainOutcome train_run(const RunConfig& cfg, const Dataset& data, const MiniBody& body,
                       const Params* init) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    const KinematicTree& tree = body.tree;
    PipelineConfig pcfg = cfg.pipeline_config(tree, body.vertices());

    TrainOutcome out;
    Rng prng(cfg.seed);
    pipeline_params(out.params, prng, pcfg, tree);
    if (init) {
        if (init->names() != out.params.names())
            throw ContractError("train: init weights do not match this config's registry");
        for (const std::string& n : out.params.names()) {
            if (init->at(n).shape != out.params.at(n).shape)
                throw ContractError("train: init shape mismatch for " + n);
            out.params.at(n) = init->at(n);
        }
    } else if (cfg.stage == "mesh") {
        throw ContractError("train: mesh stage requires lifting-stage init weights");
    }

    std::vector<Sample> windows;
    size_t n_train = data.manifest.train_seeds.size();
    for (size_t i = 0; i < n_train; ++i)
        windows.push_back(subsample_window(data.samples[i], cfg.T, cfg.stride, tree.joints(),
                                           body.vertices()));

    std::vector<uint8_t> lift_only, all_on;
    for (const std::string& n : out.params.names()) {
        lift_only.push_back(is_stage2_param(n) ? 0 : 1);
        all_on.push_back(1);
    }

    bool ok = true;
    if (cfg.stage == "lift" || cfg.stage == "end2end")
        ok = train_stage(cfg, {false, cfg.lr, cfg.epochs, lift_only}, out.params, pcfg, tree,
                         body, windows, out.report.stage1_losses, out.report.diagnostic);
    if (ok && cfg.stage == "mesh")
        ok = train_stage(cfg, {true, cfg.lr2, cfg.epochs2, all_on}, out.params, pcfg, tree, body,
                         windows, out.report.stage2_losses, out.report.diagnostic);
    if (ok && cfg.stage == "end2end")
        ok = train_stage(cfg, {true, cfg.lr2, cfg.epochs2, all_on}, out.params, pcfg, tree, body,
                         windows, out.report.stage2_losses, out.report.diagnostic);
    out.report.aborted = !ok;

    out.report.config = cfg.to_json();
    out.report.losses_monotone = curve_monotone(out.report.stage1_losses.empty()
                                                    ? out.report.stage2_losses
                                                    : out.report.stage1_losses);
    EvalMetrics m = evaluate_model(out.params, cfg, body, windows);
    out.report.metrics = {{"MPJPE", m.mpjpe},
                          {"PA-MPJPE", m.pa_mpjpe},
                          {"MPVPE", m.mpvpe},
                          {"Accel", m.accel}};
    out.report.source_rev = source_revision();
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

EvalMetrics evaluate_model(const Params& params, const RunConfig& cfg, const MiniBody& body,
                           const std::vector<Sample>& windows) {
    const KinematicTree& tree = body.tree;
    PipelineConfig pcfg = cfg.pipeline_config(tree, body.vertices());
    const int J = tree.joints();
    EvalMetrics acc;
    for (const Sample& win : windows) {
        Tape tape;
        Bind w(tape, params, false);
        PipelineOut out = pipeline_forward(w, pcfg, tree, body.template_vertices,
                                           tape.constant(win.p2d_noisy), tape.constant(win.grid));
        Tensor p3d = tape.val(out.p3d);
        Tensor mesh = tape.val(out.mesh);
        acc.mpjpe += mpjpe(root_align(p3d, J, tree.root()), root_align(win.p3d_gt, J, tree.root()));
        acc.pa_mpjpe += pa_mpjpe(p3d, win.p3d_gt, J);
        acc.mpvpe += mpvpe(mesh, win.mesh_gt, body);
        acc.accel += accel_error(p3d, win.p3d_gt, J);
    }
    double inv = windows.empty() ? 0.0 : 1.0 / static_cast<double>(windows.size());
    acc.mpjpe *= inv;
    acc.pa_mpjpe *= inv;
    acc.mpvpe *= inv;
    acc.accel *= inv;
    return acc;
}

namespace {

nlohmann::json report_stable_json(const RunReport& r) {
    nlohmann::json j;
    j["config"] = r.config;
    j["stage1_losses"] = r.stage1_losses;
    j["stage2_losses"] = r.stage2_losses;
    j["metrics"] = r.metrics;
    j["aborted"] = r.aborted;
    j["diagnostic"] = r.diagnostic;
    j["losses_monotone"] = r.losses_monotone;
    return j;
}

}  // namespace

uint64_t report_determinism_hash(const RunReport& r) {
    return fnv1a(report_stable_json(r).dump());
}

nlohmann::json report_json(const RunReport& r) {
    nlohmann::json j = report_stable_json(r);
    j["determinism_hash"] = hex64(report_determinism_hash(r));
    j["wall_seconds"] = r.wall_seconds;
    j["source_rev"] = r.source_rev;
    return j;
}

std::string report_csv(const RunReport& r) {
    std::ostringstream os;
    os << "key,value,units\n";
    static const std::map<std::string, std::string> units = {
        {"MPJPE", "mm"}, {"PA-MPJPE", "mm"}, {"MPVPE", "mm"}, {"Accel", "mm/s^2"}};
    for (const auto& [k, v] : r.metrics) {
        os << k << "," << nlohmann::json(v).dump() << ","
           << (units.count(k) ? units.at(k) : "") << "\n";
    }
    if (!r.stage1_losses.empty())
        os << "final_stage1_loss," << nlohmann::json(r.stage1_losses.back()).dump() << ",\n";
    if (!r.stage2_losses.empty())
        os << "final_stage2_loss," << nlohmann::json(r.stage2_losses.back()).dump() << ",\n";
    os << "aborted," << (r.aborted ? "true" : "false") << ",\n";
    os << "losses_monotone," << (r.losses_monotone ? "true" : "false") << ",\n";
    os << "determinism_hash," << hex64(report_determinism_hash(r)) << ",\n";
    return os.str();
}

std::string source_revision() {
    std::ifstream head(".git/HEAD");
    if (!head) return "unknown";
    std::string line;
    std::getline(head, line);
    line = trim(line);
    if (line.rfind("ref: ", 0) == 0) {
        std::ifstream ref(".git/" + line.substr(5));
        if (!ref) return "unknown";
        std::getline(ref, line);
        line = trim(line);
    }
    return line.empty() ? "unknown" : line;
}

void save_checkpoint(const std::string& path, const Params& p, const nlohmann::json& meta) {
    Container c;
    c.magic = kCheckpointMagic;
    c.version = 1;
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["meta"] = meta;
    manifest["n_tensors"] = p.names().size();
    c.manifest_json = manifest.dump();
    for (const std::string& n : p.names()) {
        const Tensor& t = p.at(n);
        for (double v : t.data)
            if (!std::isfinite(v))
                throw NumericError("checkpoint: refusing to write non-finite value in " + n);
        c.entries.push_back({n, t});
    }
    write_container(path, c);
}

nlohmann::json load_checkpoint_into(const std::string& path, Params& p) {
    Container c = read_container(path, kCheckpointMagic);
    nlohmann::json manifest = nlohmann::json::parse(c.manifest_json);
    std::vector<uint8_t> seen(p.names().size(), 0);
    for (const ContainerEntry& e : c.entries) {
        if (!p.has(e.name)) throw IoError("checkpoint: unexpected tensor " + e.name);
        Tensor& dst = p.at(e.name);
        if (dst.shape != e.tensor.shape)
            throw IoError("checkpoint: shape mismatch for " + e.name);
        dst.data = e.tensor.data;
        for (size_t i = 0; i < p.names().size(); ++i)
            if (p.names()[i] == e.name) seen[i] = 1;
    }
    for (size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw IoError("checkpoint: missing tensor " + p.names()[i]);
    return manifest.at("meta");
}

nlohmann::json checkpoint_meta(const std::string& path) {
    Container c = read_container(path, kCheckpointMagic);
    return nlohmann::json::parse(c.manifest_json).at("meta");
}

}  // namespace hmr

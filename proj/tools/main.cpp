#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hmr/io.hpp"
#include "hmr/metrics.hpp"
#include "hmr/synth.hpp"
#include "hmr/tape.hpp"
#include "hmr/train.hpp"
#include "hmr/verify.hpp"

using namespace hmr;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os << text;
}

RunConfig load_config(const std::string& config_path, uint64_t seed, bool seed_set,
                      const std::string& stage, bool stage_set) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_kv(parse_kv_file(config_path));
    if (seed_set) cfg.seed = seed;
    if (stage_set) cfg.stage = stage;
    cfg.validate();
    return cfg;
}

std::vector<Sample> pick_windows(const Dataset& data, const RunConfig& cfg, const MiniBody& body,
                                 const std::string& split) {
    size_t n_train = data.manifest.train_seeds.size();
    size_t begin = 0, end = data.samples.size();
    if (split == "train")
        end = n_train;
    else if (split == "eval")
        begin = n_train;
    else if (split != "all")
        throw ContractError("split must be train, eval, or all, got '" + split + "'");
    std::vector<Sample> windows;
    for (size_t i = begin; i < end; ++i)
        windows.push_back(subsample_window(data.samples[i], cfg.T, cfg.stride,
                                           body.tree.joints(), body.vertices()));
    return windows;
}

int cmd_verify(const std::string& only, const std::string& inject, int instances,
               const std::string& format, const std::string& out_dir) {
    VerifyOptions opt;
    opt.only = only;
    opt.inject_fault = inject;
    opt.gradient_instances = instances;
    std::vector<SuiteResult> results = run_verify(opt);
    if (results.empty()) {
        std::cerr << "no suite matches --only " << only << "\n";
        return 2;
    }
    nlohmann::json doc;
    doc["suites"] = nlohmann::json::array();
    for (const SuiteResult& r : results) {
        std::printf("%s  %-18s (%s)  %s  [%.2fs]\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.module.c_str(), r.detail.c_str(), r.seconds);
        doc["suites"].push_back({{"name", r.name},
                                 {"module", r.module},
                                 {"passed", r.passed},
                                 {"detail", r.detail}});
    }
    doc["all_passed"] = all_passed(results);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        if (format == "json")
            write_text(out_dir + "/verify.json", doc.dump(2) + "\n");
        else {
            std::string csv = "suite,module,passed,detail\n";
            for (const SuiteResult& r : results)
                csv += r.name + "," + r.module + "," + (r.passed ? "true" : "false") + ",\"" +
                       r.detail + "\"\n";
            write_text(out_dir + "/verify.csv", csv);
        }
    }
    return all_passed(results) ? 0 : 1;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    MiniBody body = make_minibody();
    SplitManifest m = make_split(cfg.seed, cfg.n_train, cfg.n_eval, cfg.motion_spec());
    std::vector<Sample> samples = generate_split(m, body);
    std::string path = out_dir + "/data.hmrd";
    save_dataset(path, m, samples);
    nlohmann::json j;
    j["path"] = path;
    j["samples"] = samples.size();
    j["train"] = m.train_seeds.size();
    j["eval"] = m.eval_seeds.size();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(file_fnv1a(path)));
    j["content_hash"] = buf;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_path, const std::string& init_path,
              const std::string& out_dir, const std::string& format) {
    Dataset data = load_dataset(data_path);
    MiniBody body = make_minibody();

    Params init;
    const Params* initp = nullptr;
    if (!init_path.empty()) {
        Rng rng(cfg.seed);
        pipeline_params(init, rng, cfg.pipeline_config(body.tree, body.vertices()), body.tree);
        load_checkpoint_into(init_path, init);
        initp = &init;
    }

    TrainOutcome out = train_run(cfg, data, body, initp);
    std::filesystem::create_directories(out_dir);
    nlohmann::json rep = report_json(out.report);
    if (!out.report.aborted) {
        std::string ckpt = out_dir + "/checkpoint.hmrw";
        save_checkpoint(ckpt, out.params, {{"config", cfg.to_json()}, {"stage", cfg.stage}});
        rep["checkpoint"] = ckpt;
    } else if (!out.report.diagnostic.empty()) {
        std::string ckpt = out_dir + "/last_good.hmrw";
        save_checkpoint(ckpt, out.params, {{"config", cfg.to_json()}, {"stage", cfg.stage}});
        rep["checkpoint"] = ckpt;
    }
    write_text(out_dir + "/report.json", rep.dump(2) + "\n");
    write_text(out_dir + "/report.csv", report_csv(out.report));
    std::cout << (format == "csv" ? report_csv(out.report) : rep.dump(2) + "\n");
    return out.report.aborted ? 1 : 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& split,
             const std::string& out_dir, const std::string& format) {
    nlohmann::json meta = checkpoint_meta(ckpt_path);
    RunConfig cfg = RunConfig::from_json(meta.at("config"));
    MiniBody body = make_minibody();
    Params params;
    Rng rng(cfg.seed);
    pipeline_params(params, rng, cfg.pipeline_config(body.tree, body.vertices()), body.tree);
    load_checkpoint_into(ckpt_path, params);

    Dataset data = load_dataset(data_path);
    std::vector<Sample> windows = pick_windows(data, cfg, body, split);
    EvalMetrics m = evaluate_model(params, cfg, body, windows);

    RunReport r;
    r.config = cfg.to_json();
    r.metrics = {{"MPJPE", m.mpjpe},
                 {"PA-MPJPE", m.pa_mpjpe},
                 {"MPVPE", m.mpvpe},
                 {"Accel", m.accel}};
    r.source_rev = source_revision();
    nlohmann::json rep = report_json(r);
    rep["split"] = split;
    rep["windows"] = windows.size();
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir + "/eval.json", rep.dump(2) + "\n");
        write_text(out_dir + "/eval.csv", report_csv(r));
    }
    std::cout << (format == "csv" ? report_csv(r) : rep.dump(2) + "\n");
    return 0;
}

int cmd_ablate(const RunConfig& base, const std::string& data_path, const std::string& out_dir,
               const std::string& format) {
    Dataset data = load_dataset(data_path);
    MiniBody body = make_minibody();

    // flags are non-invasive: with everything on, the ablation config runs the
    // exact unflagged pipeline
    {
        RunConfig cfg = base;
        cfg.ga = cfg.em = cfg.im = true;
        PipelineConfig flagged = cfg.pipeline_config(body.tree, body.vertices());
        PipelineConfig plain = flagged;
        plain.use_ga = plain.use_em = plain.use_im = true;
        Params params;
        Rng rng(cfg.seed);
        pipeline_params(params, rng, flagged, body.tree);
        Sample win = subsample_window(data.samples[0], cfg.T, cfg.stride, body.tree.joints(),
                                      body.vertices());
        Tape t1, t2;
        Bind w1(t1, params, false), w2(t2, params, false);
        Tensor a = t1.val(pipeline_forward(w1, flagged, body.tree, body.template_vertices,
                                           t1.constant(win.p2d_noisy), t1.constant(win.grid))
                              .p3d);
        Tensor b = t2.val(pipeline_forward(w2, plain, body.tree, body.template_vertices,
                                           t2.constant(win.p2d_noisy), t2.constant(win.grid))
                              .p3d);
        for (size_t i = 0; i < a.data.size(); ++i)
            if (a.data[i] != b.data[i])
                throw NumericError("ablate: GA=on diverged from the unflagged pipeline");
    }

    struct Row {
        const char* label;
        bool ga, em, im;
    };
    const Row rows[] = {{"GA", true, false, false},
                        {"GA+EM", true, true, false},
                        {"GA+IM", true, false, true},
                        {"EM+IM", false, true, true},
                        {"GA+EM+IM", true, true, true}};

    nlohmann::json table = nlohmann::json::array();
    std::string csv = "row,GA,EM,IM,MPJPE,PA-MPJPE,MPVPE,Accel\n";
    double full_mpjpe = -1.0;
    for (const Row& row : rows) {
        RunConfig cfg = base;
        cfg.stage = "end2end";
        cfg.ga = row.ga;
        cfg.em = row.em;
        cfg.im = row.im;
        TrainOutcome out = train_run(cfg, data, body, nullptr);
        if (out.report.aborted) {
            std::cerr << "ablate: row " << row.label << " aborted: " << out.report.diagnostic
                      << "\n";
            return 1;
        }
        const auto& m = out.report.metrics;
        table.push_back({{"row", row.label},
                         {"GA", row.ga},
                         {"EM", row.em},
                         {"IM", row.im},
                         {"MPJPE", m.at("MPJPE")},
                         {"PA-MPJPE", m.at("PA-MPJPE")},
                         {"MPVPE", m.at("MPVPE")},
                         {"Accel", m.at("Accel")}});
        csv += std::string(row.label) + "," + (row.ga ? "on" : "off") + "," +
               (row.em ? "on" : "off") + "," + (row.im ? "on" : "off") + "," +
               nlohmann::json(m.at("MPJPE")).dump() + "," +
               nlohmann::json(m.at("PA-MPJPE")).dump() + "," +
               nlohmann::json(m.at("MPVPE")).dump() + "," + nlohmann::json(m.at("Accel")).dump() +
               "\n";
        if (std::string(row.label) == "GA+EM+IM") full_mpjpe = m.at("MPJPE");
    }

    // comparative sanity, logged not asserted
    for (const auto& row : table)
        if (row.at("row") != "GA+EM+IM" && full_mpjpe > row.at("MPJPE").get<double>())
            std::cerr << "note: full model MPJPE " << full_mpjpe << " above ablation row "
                      << row.at("row").get<std::string>() << "\n";

    nlohmann::json doc;
    doc["rows"] = table;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir + "/ablate.json", doc.dump(2) + "\n");
        write_text(out_dir + "/ablate.csv", csv);
    }
    std::cout << (format == "csv" ? csv : doc.dump(2) + "\n");
    return 0;
}

int cmd_bench(const std::vector<int>& sizes, const std::string& out_dir,
              const std::string& format) {
    using clock = std::chrono::steady_clock;
    nlohmann::json doc;
    {
        RunConfig cfg;
        Params p;
        Rng rng(cfg.seed);
        MiniBody body = make_minibody();
        pipeline_params(p, rng, cfg.pipeline_config(body.tree, body.vertices()), body.tree);
        doc["default_model_params"] = p.scalar_count();
    }
    std::string csv = "L,recurrent_tokens_per_s,conv_tokens_per_s,block_tokens_per_s,max_abs_diff\n";
    doc["rows"] = nlohmann::json::array();
    for (int L : sizes) {
        Rng rng(42);
        const int N = 8;
        SsmParams sp;
        sp.delta = 0.1;
        for (int i = 0; i < N; ++i) {
            sp.A.push_back(rng.uniform(-2.0, -0.1));
            sp.B.push_back(rng.uniform(-1.0, 1.0));
            sp.C.push_back(rng.uniform(-1.0, 1.0));
        }
        std::vector<double> x(static_cast<size_t>(L));
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        DiscreteSsm d = discretize_zoh(sp);

        auto t0 = clock::now();
        std::vector<double> y_rec;
        const int reps = 50;
        for (int k = 0; k < reps; ++k) y_rec = scan_recurrent(d, sp.C, x);
        double rec_s = std::chrono::duration<double>(clock::now() - t0).count() / reps;

        t0 = clock::now();
        std::vector<double> y_conv;
        for (int k = 0; k < reps; ++k)
            y_conv = scan_convolutional(build_conv_kernel(d, sp.C, L), x);
        double conv_s = std::chrono::duration<double>(clock::now() - t0).count() / reps;

        double diff = 0.0;
        for (int t = 0; t < L; ++t)
            diff = std::max(diff, std::abs(y_rec[static_cast<size_t>(t)] -
                                           y_conv[static_cast<size_t>(t)]));

        DualScanConfig bc;
        bc.dim = 32;
        bc.n_state = 8;
        std::vector<int> perm(static_cast<size_t>(L));
        for (int i = 0; i < L; ++i) perm[static_cast<size_t>(i)] = L - 1 - i;
        bc.scan_order = ScanOrder::from_perm(perm);
        bc.global_segments = {0, L};
        Params bp;
        dual_scan_block_params(bp, rng, "b", bc);
        Tensor bx({L, bc.dim});
        for (double& v : bx.data) v = rng.uniform(-1.0, 1.0);
        t0 = clock::now();
        const int breps = 5;
        for (int k = 0; k < breps; ++k) {
            Tape t;
            Bind w(t, bp, false);
            t.val(dual_scan_block(w, "b", t.constant(bx), bc));
        }
        double blk_s = std::chrono::duration<double>(clock::now() - t0).count() / breps;

        nlohmann::json row;
        row["L"] = L;
        row["recurrent_tokens_per_s"] = L / rec_s;
        row["conv_tokens_per_s"] = L / conv_s;
        row["block_tokens_per_s"] = L / blk_s;
        row["max_abs_diff"] = diff;
        doc["rows"].push_back(row);
        csv += std::to_string(L) + "," + std::to_string(L / rec_s) + "," +
               std::to_string(L / conv_s) + "," + std::to_string(L / blk_s) + "," +
               nlohmann::json(diff).dump() + "\n";
        if (diff >= 1e-10) {
            std::cerr << "bench: recurrent/conv disagreement " << diff << " at L=" << L << "\n";
            return 1;
        }
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir + "/bench.json", doc.dump(2) + "\n");
        write_text(out_dir + "/bench.csv", csv);
    }
    std::cout << (format == "csv" ? csv : doc.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale video human mesh recovery: verification, training, evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, only, inject, format = "json";
    std::string data_path = "data.hmrd", ckpt_path, init_path, split = "train", stage;
    uint64_t seed = 0;
    int grad_instances = 5;
    std::vector<int> sizes = {64, 256, 1024};

    app.add_option("--config", config_path, "flat key=value config file");
    auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--format", format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));

    CLI::App* verify = app.add_subcommand("verify", "run the invariant suites");
    verify->add_option("--only", only, "suite or module name filter");
    verify->add_option("--inject-fault", inject, "sabotage fixture (ssm-sign)");
    verify->add_option("--grad-instances", grad_instances, "instances per block");

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic split");

    CLI::App* train = app.add_subcommand("train", "train the configured stage");
    train->add_option("--data", data_path, "dataset container");
    train->add_option("--init", init_path, "checkpoint to initialize from");
    auto* stage_opt = train->add_option("--stage", stage, "lift | mesh | end2end");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    eval->add_option("--data", data_path, "dataset container");
    eval->add_option("--split", split, "train | eval | all");

    CLI::App* ablate = app.add_subcommand("ablate", "train/eval the flag combinations");
    ablate->add_option("--data", data_path, "dataset container");

    CLI::App* bench = app.add_subcommand("bench", "time the scan kernels");
    bench->add_option("--sizes", sizes, "sequence lengths");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed())
            return cmd_verify(only, inject, grad_instances, format, out_dir);
        RunConfig cfg =
            load_config(config_path, seed, seed_opt->count() > 0, stage, stage_opt->count() > 0);
        std::string out = out_dir.empty() ? "." : out_dir;
        if (gen->parsed()) return cmd_gen_data(cfg, out);
        if (train->parsed()) return cmd_train(cfg, data_path, init_path, out, format);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_path, split, out_dir, format);
        if (ablate->parsed()) return cmd_ablate(cfg, data_path, out_dir, format);
        if (bench->parsed()) return cmd_bench(sizes, out_dir, format);
    } catch (const ContractError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 2;
}

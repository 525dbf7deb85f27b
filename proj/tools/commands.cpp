#include "commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>

#include "cf/binio.hpp"
#include "cf/dataset.hpp"
#include "cf/error.hpp"
#include "cf/eval.hpp"
#include "cf/netlist.hpp"
#include "cf/parallel.hpp"
#include "cf/perturb.hpp"
#include "cf/probes.hpp"
#include "cf/recording_io.hpp"
#include "cf/rng.hpp"
#include "cf/sim.hpp"
#include "cf/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cf::cli {

namespace {

constexpr const char* kToolVersion = "0.1.0";

json load_json_file(const fs::path& path) {
    try {
        return json::parse(bin::read_text(path));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

json section(const json& cfg, const char* name) {
    if (cfg.contains(name)) {
        if (!cfg[name].is_object()) throw ValidationError(std::string("config section '") + name + "' must be an object");
        return cfg[name];
    }
    return json::object();
}

// Flag wins over file, file wins over the built-in default.
template <typename T>
void fill(const CLI::Option* opt, const json& sec, const char* key, T& var) {
    if (opt != nullptr && opt->count() > 0) return;
    if (!sec.contains(key)) return;
    try {
        var = sec.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

json to_json(const SimConfig& c) {
    return {{"k", c.k}, {"l", c.l}, {"periods", c.periods}, {"max_fixpoint_iters", c.max_fixpoint_iters}};
}

ForceMode parse_mode(const std::string& s) {
    if (s == "invert") return ForceMode::invert;
    if (s == "force_high") return ForceMode::force_high;
    if (s == "force_low") return ForceMode::force_low;
    throw ValidationError("unknown perturbation mode '" + s + "'");
}

const char* mode_name(ForceMode m) {
    switch (m) {
    case ForceMode::invert: return "invert";
    case ForceMode::force_high: return "force_high";
    case ForceMode::force_low: return "force_low";
    }
    return "?";
}

json to_json(const PerturbSpec& p) {
    return {{"mode", mode_name(p.mode)}, {"onset", p.onset},     {"hold", p.hold},
            {"window", p.window},        {"epsilon", p.epsilon}, {"dedup", p.dedup}};
}

std::string period_stem(int m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "period_%03d", m);
    return buf;
}

// Stems of all files in `dir` ending with `suffix`, sorted.
std::vector<fs::path> stems_in(const fs::path& dir, const std::string& suffix) {
    if (!fs::is_directory(dir)) throw ValidationError("missing artifact: directory " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() > suffix.size() && name.ends_with(suffix))
            out.push_back(dir / name.substr(0, name.size() - suffix.size()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Inputs may be given as a directory or as a comma-free list of stems.
std::vector<fs::path> resolve_stems(const std::vector<std::string>& given, const std::string& suffix) {
    std::vector<fs::path> out;
    for (const auto& g : given) {
        if (fs::is_directory(g)) {
            auto s = stems_in(g, suffix);
            out.insert(out.end(), s.begin(), s.end());
        } else {
            fs::path p(g);
            const std::string name = p.filename().string();
            if (name.ends_with(suffix)) p = p.parent_path() / name.substr(0, name.size() - suffix.size());
            if (!fs::exists(with_suffix(p, suffix))) throw ValidationError("missing artifact: " + with_suffix(p, suffix).string());
            out.push_back(p);
        }
    }
    if (out.empty()) throw ValidationError("no '" + suffix + "' artifacts found");
    return out;
}

class Manifest {
public:
    Manifest(std::string command, std::vector<std::string> args) : command_(std::move(command)), args_(std::move(args)) {}

    json config = json::object();
    std::uint64_t seed = 0;

    void input(const fs::path& p) { inputs_.push_back({{"path", p.generic_string()}, {"hash", bin::file_hash(p)}}); }
    void output(const fs::path& p) { outputs_.push_back(p); }

    // Manifest content is a pure function of the invocation and its artifacts; wall time goes
    // to a separate file so repeated runs can be compared byte for byte.
    void write(const fs::path& manifest_path, const fs::path& timing_path, double seconds) const {
        json outs = json::array();
        for (const auto& p : outputs_) outs.push_back({{"path", p.generic_string()}, {"hash", bin::file_hash(p)}});
        json m = {{"command", command_}, {"args", args_},       {"tool_version", kToolVersion},
                  {"seed", seed},        {"config", config},    {"inputs", inputs_},
                  {"outputs", outs}};
        bin::write_text(manifest_path, m.dump(2) + "\n");
        char buf[64];
        std::snprintf(buf, sizeof buf, "{\n  \"wall_seconds\": %.3f\n}\n", seconds);
        bin::write_text(timing_path, buf);
    }

private:
    std::string command_;
    std::vector<std::string> args_;
    json inputs_ = json::array();
    std::vector<fs::path> outputs_;
};

void finish_dir(const Manifest& m, const fs::path& dir, std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.write(dir / "manifest.json", dir / "timing.json", s);
}

void finish_file(const Manifest& m, const fs::path& file, std::chrono::steady_clock::time_point t0) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.write(with_suffix(file, ".manifest.json"), with_suffix(file, ".timing.json"), s);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) ensure_dir(file.parent_path());
}

struct Loaded {
    int k = 0;  // update steps per half-clock of the source recordings
    std::vector<StateRecording> recordings;
    std::vector<CausalGroundTruth> gts;
};

// Loads paired <stem>.cfrc/<stem>.json recordings and <stem>.gt.json ground truths.
Loaded load_pairs(const std::vector<fs::path>& rec_stems, const std::vector<fs::path>& gt_stems, Manifest& man) {
    if (rec_stems.size() != gt_stems.size())
        throw ValidationError("found " + std::to_string(rec_stems.size()) + " recordings but " +
                              std::to_string(gt_stems.size()) + " ground truths");
    Loaded out;
    for (std::size_t p = 0; p < rec_stems.size(); ++p) {
        auto rf = load_recording(rec_stems[p]);
        auto gt = load_ground_truth(gt_stems[p]);
        if (rf.recording.period != gt.period)
            throw ValidationError("period mismatch between " + rec_stems[p].string() + " and " + gt_stems[p].string());
        man.input(with_suffix(rec_stems[p], ".cfrc"));
        man.input(with_suffix(gt_stems[p], ".adj"));
        if (p == 0) out.k = rf.k;
        out.recordings.push_back(std::move(rf.recording));
        out.gts.push_back(std::move(gt));
    }
    return out;
}

void write_split(SplitResult sp, int k, const fs::path& dir, Manifest& man, std::ostream& out) {
    auto put = [&](Dataset& ds) {
        ds.sidecar["k"] = k;
        const fs::path p = dir / (ds.split + ".cfds");
        write_dataset(ds, p);
        man.output(p);
        man.output(with_suffix(p, ".json"));
        out << ds.split << ": " << ds.samples.size() << " pairs, " << ds.positives() << " positive\n";
    };
    put(sp.train);
    put(sp.val);
    for (auto& t : sp.tests) put(t);
    if (!sp.dropped_periods.empty()) {
        out << "dropped outlier periods:";
        for (int m : sp.dropped_periods) out << ' ' << m;
        out << '\n';
    }
}

SplitPlan resolve_plan(const std::string& plan_path, const json& cfg, std::uint64_t global_seed) {
    json pj = section(cfg, "dataset").value("plan", json::object());
    if (!plan_path.empty()) pj = load_json_file(plan_path);
    if (!pj.contains("seed")) pj["seed"] = derive_seed(global_seed, "undersample");
    return SplitPlan::from_json(pj);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    CLI::App app{"causalforge: perturbation ground truth, learned causal discovery and baselines"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    std::uint64_t seed = 0;
    int jobs = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Global seed; named sub-streams derive from it");
    app.add_option("--config", config_path, "JSON config with per-command sections (flags win)");
    app.add_option("--jobs", jobs, "Worker cap (CF_JOBS overrides)");

    std::function<void()> action;
    json cfg = json::object();

    auto resolve_common = [&](Manifest& man) {
        if (!config_path.empty()) {
            cfg = load_json_file(config_path);
            man.input(config_path);
        }
        fill<std::uint64_t>(seed_opt, cfg, "seed", seed);
        man.seed = seed;
        if (std::getenv("CF_JOBS") != nullptr) jobs = default_jobs();
        else if (jobs <= 0) jobs = default_jobs();
    };

    // gen-circuit
    auto* gen = app.add_subcommand("gen-circuit", "Generate a synthetic clocked netlist");
    SynthSpec synth;
    std::string gen_out;
    auto* gen_n = gen->add_option("--n", synth.n_transistors, "Transistor count");
    auto* gen_f = gen->add_option("--fanout", synth.fanout_mean, "Mean fan-out");
    gen->add_option("--out", gen_out, "Netlist JSON path")->required();
    gen->callback([&] {
        action = [&] {
            Manifest man("gen-circuit", args);
            resolve_common(man);
            const json sec = section(cfg, "circuit");
            fill(gen_n, sec, "n", synth.n_transistors);
            fill(gen_f, sec, "fanout", synth.fanout_mean);
            synth.seed = derive_seed(seed, "sim");
            const Netlist nl = gen_synthetic_netlist(synth);
            ensure_parent(gen_out);
            save_netlist(nl, gen_out);
            man.config = {{"n", synth.n_transistors}, {"fanout", synth.fanout_mean}};
            man.output(gen_out);
            finish_file(man, gen_out, t0);
            out << "netlist: " << nl.wires.size() << " wires, " << nl.transistors.size() << " transistors\n";
        };
    });

    // shared simulation flags
    SimConfig sim;
    std::string sim_config_path;
    auto add_sim_flags = [&](CLI::App* sub, std::vector<CLI::Option*>& opts) {
        opts.push_back(sub->add_option("--periods", sim.periods, "Periods M"));
        opts.push_back(sub->add_option("--half-clocks", sim.l, "Half-clocks per period l"));
        opts.push_back(sub->add_option("--k", sim.k, "Update steps per half-clock"));
        opts.push_back(sub->add_option("--max-fixpoint-iters", sim.max_fixpoint_iters, "Resolution cap"));
        sub->add_option("--sim-config", sim_config_path, "JSON with k, l, periods, max_fixpoint_iters");
    };
    auto resolve_sim = [&](const std::vector<CLI::Option*>& opts) {
        json sec = section(cfg, "sim");
        if (!sim_config_path.empty()) sec = load_json_file(sim_config_path);
        fill(opts[0], sec, "periods", sim.periods);
        fill(opts[1], sec, "l", sim.l);
        fill(opts[1], sec, "half_clocks", sim.l);
        fill(opts[2], sec, "k", sim.k);
        fill(opts[3], sec, "max_fixpoint_iters", sim.max_fixpoint_iters);
        sim.validate();
    };

    // simulate
    auto* simc = app.add_subcommand("simulate", "Record transistor states for M periods");
    std::string sim_netlist, sim_out;
    std::vector<CLI::Option*> sim_opts;
    simc->add_option("--netlist", sim_netlist, "Netlist JSON")->required();
    simc->add_option("--out", sim_out, "Output directory")->required();
    add_sim_flags(simc, sim_opts);
    simc->callback([&] {
        action = [&] {
            Manifest man("simulate", args);
            resolve_common(man);
            resolve_sim(sim_opts);
            if (!sim_config_path.empty()) man.input(sim_config_path);
            const Circuit circuit(load_netlist(sim_netlist));
            man.input(sim_netlist);
            ensure_dir(sim_out);
            auto runs = simulate(circuit, sim);
            for (const auto& r : runs) {
                const fs::path stem = fs::path(sim_out) / period_stem(r.recording.period);
                save_recording(stem, r.recording, sim.k, sim.l, r.warnings);
                man.output(with_suffix(stem, ".cfrc"));
                man.output(with_suffix(stem, ".json"));
            }
            man.config = {{"sim", to_json(sim)}};
            finish_dir(man, sim_out, t0);
            out << "recorded " << runs.size() << " periods of " << circuit.transistor_count() << " transistors\n";
        };
    });

    // perturb
    auto* pert = app.add_subcommand("perturb", "Perturbation sweep: recordings plus TCE/adjacency per period");
    std::string pert_netlist, pert_out, pert_mode = "invert";
    PerturbSpec pspec;
    bool no_dedup = false;
    std::vector<CLI::Option*> pert_sim_opts;
    pert->add_option("--netlist", pert_netlist, "Netlist JSON")->required();
    pert->add_option("--out", pert_out, "Output directory")->required();
    add_sim_flags(pert, pert_sim_opts);
    auto* p_mode = pert->add_option("--mode", pert_mode, "invert | force_high | force_low");
    auto* p_onset = pert->add_option("--onset", pspec.onset, "Onset half-clock (-1: l/2)");
    auto* p_hold = pert->add_option("--hold", pspec.hold, "Half-clocks the forcing persists");
    auto* p_window = pert->add_option("--window", pspec.window, "Measured half-clocks");
    auto* p_eps = pert->add_option("--epsilon", pspec.epsilon, "Binarization threshold");
    auto* p_nodedup = pert->add_flag("--no-dedup", no_dedup, "Perturb every element, not only unique ones");
    pert->callback([&] {
        action = [&] {
            Manifest man("perturb", args);
            resolve_common(man);
            resolve_sim(pert_sim_opts);
            if (!sim_config_path.empty()) man.input(sim_config_path);
            const json sec = section(cfg, "perturb");
            fill(p_mode, sec, "mode", pert_mode);
            fill(p_onset, sec, "onset", pspec.onset);
            fill(p_hold, sec, "hold", pspec.hold);
            fill(p_window, sec, "window", pspec.window);
            fill(p_eps, sec, "epsilon", pspec.epsilon);
            pspec.dedup = !no_dedup;
            if (p_nodedup->count() == 0) fill<bool>(nullptr, sec, "dedup", pspec.dedup);
            pspec.mode = parse_mode(pert_mode);
            pspec.validate(sim);

            const Circuit circuit(load_netlist(pert_netlist));
            man.input(pert_netlist);
            ensure_dir(pert_out);
            auto sweep = ground_truth_sweep(circuit, sim, pspec, jobs);
            std::size_t pos = 0, pairs = 0;
            for (const auto& p : sweep) {
                const fs::path stem = fs::path(pert_out) / period_stem(p.recording.period);
                save_recording(stem, p.recording, sim.k, sim.l, p.ground_truth.warnings);
                save_ground_truth(stem, p.ground_truth);
                for (const char* suf : {".cfrc", ".json", ".gt.json", ".tce", ".adj"}) man.output(with_suffix(stem, suf));
                const std::size_t n = p.ground_truth.size();
                pairs += n * (n > 0 ? n - 1 : 0);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        if (i != j) pos += p.ground_truth.adj_at(i, j);
            }
            man.config = {{"sim", to_json(sim)}, {"perturb", to_json(pspec)}};
            finish_dir(man, pert_out, t0);
            char buf[128];
            std::snprintf(buf, sizeof buf, "%zu periods, %zu positive of %zu pairs (%.2f%%)\n", sweep.size(), pos,
                          pairs, pairs ? 100.0 * static_cast<double>(pos) / static_cast<double>(pairs) : 0.0);
            out << buf;
        };
    });

    // build-dataset
    auto* bd = app.add_subcommand("build-dataset", "Split periods/elements into train/val/test pair datasets");
    std::string bd_gt, bd_plan, bd_out;
    double bd_noise = 0.0;
    bool bd_normalize = false;
    bd->add_option("--ground-truth", bd_gt, "Directory written by perturb")->required();
    bd->add_option("--plan", bd_plan, "Split plan JSON");
    auto* bd_noise_opt = bd->add_option("--noise-scale", bd_noise, "Gaussian noise scale added to test splits");
    auto* bd_norm_opt = bd->add_flag("--noise-normalize", bd_normalize, "Scale noise by each sequence's std");
    bd->add_option("--out", bd_out, "Output directory")->required();
    bd->callback([&] {
        action = [&] {
            Manifest man("build-dataset", args);
            resolve_common(man);
            const json sec = section(cfg, "dataset");
            fill(bd_noise_opt, sec, "noise_scale", bd_noise);
            fill(bd_norm_opt, sec, "noise_normalize", bd_normalize);
            const SplitPlan plan = resolve_plan(bd_plan, cfg, seed);
            if (!bd_plan.empty()) man.input(bd_plan);
            auto loaded = load_pairs(stems_in(bd_gt, ".cfrc"), stems_in(bd_gt, ".gt.json"), man);
            auto sp = build_split(loaded.recordings, loaded.gts, plan);
            if (bd_noise > 0.0) {
                for (std::size_t t = 0; t < sp.tests.size(); ++t)
                    sp.tests[t] = add_noise(sp.tests[t], {bd_noise, bd_normalize,
                                                          mix64(derive_seed(seed, "noise") + t)});
            }
            ensure_dir(bd_out);
            write_split(std::move(sp), loaded.k, bd_out, man, out);
            man.config = {{"plan", plan.to_json()}, {"noise_scale", bd_noise}, {"noise_normalize", bd_normalize}};
            finish_dir(man, bd_out, t0);
        };
    });

    // train
    auto* tr = app.add_subcommand("train", "Train the estimator; keeps the best validation-AUPRC epoch");
    std::string tr_data, tr_val, tr_est, tr_tcfg, tr_out;
    TrainConfig tcfg;
    tr->add_option("--dataset", tr_data, "Training dataset (.cfds)")->required();
    tr->add_option("--val", tr_val, "Validation dataset (.cfds)")->required();
    tr->add_option("--est-config", tr_est, "Estimator config JSON");
    tr->add_option("--train-config", tr_tcfg, "Training config JSON");
    auto* t_epochs = tr->add_option("--epochs", tcfg.epochs, "Epochs");
    auto* t_bs = tr->add_option("--batch-size", tcfg.batch_size, "Batch size");
    auto* t_lr = tr->add_option("--lr", tcfg.lr, "Peak learning rate");
    auto* t_shift = tr->add_option("--shift-range", tcfg.shift_range, "Augmentation shift bound (-1: L/3)");
    tr->add_option("--out", tr_out, "Checkpoint path (.cfck)")->required();
    tr->callback([&] {
        action = [&] {
            Manifest man("train", args);
            resolve_common(man);
            json tsec = section(cfg, "train");
            if (!tr_tcfg.empty()) {
                tsec = load_json_file(tr_tcfg);
                man.input(tr_tcfg);
            }
            json merged = tcfg.to_json();
            merged["seed"] = derive_seed(seed, "train");
            for (auto& [k, v] : tsec.items()) merged[k] = v;
            const std::vector<std::pair<CLI::Option*, const char*>> flags{
                {t_epochs, "epochs"}, {t_bs, "batch_size"}, {t_lr, "lr"}, {t_shift, "shift_range"}};
            const TrainConfig from_flags = tcfg;
            for (const auto& [opt, key] : flags) {
                if (opt->count() == 0) continue;
                const json fj = from_flags.to_json();
                merged[key] = fj[key];
            }
            const TrainConfig cfg_t = TrainConfig::from_json(merged);

            const Dataset train_ds = read_dataset(tr_data);
            const Dataset val_ds = read_dataset(tr_val);
            man.input(tr_data);
            man.input(tr_val);
            json ej = section(cfg, "estimator");
            if (!tr_est.empty()) {
                ej = load_json_file(tr_est);
                man.input(tr_est);
            }
            if (!ej.contains("L")) ej["L"] = train_ds.L;
            const EstimatorConfig est = estimator_config_from_json(ej);

            auto ck = train(train_ds, val_ds, cfg_t, est, jobs, [&](const EpochReport& r) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "epoch %3d  loss %.5f  val_auprc %.4f\n", r.epoch, r.train_loss,
                              r.val_auprc);
                out << buf << std::flush;
            });
            ensure_parent(tr_out);
            save_checkpoint(ck, tr_out);
            man.output(tr_out);
            man.config = {{"train", cfg_t.to_json()}, {"estimator", cf::to_json(est)}};
            finish_file(man, tr_out, t0);
            if (ck.diverged) throw RuntimeFailure("training diverged (" + ck.note + "); best checkpoint saved");
            out << "best epoch " << ck.epoch << ", val AUPRC " << ck.val_auprc << '\n';
        };
    });

    // eval
    auto* ev = app.add_subcommand("eval", "Score pairs and report per-group AUROC/AUPRC");
    std::vector<std::string> ev_data, ev_methods;
    std::string ev_out;
    double ev_noise = 0.0;
    bool ev_norm = false;
    ev->add_option("--dataset", ev_data, "Dataset(s) (.cfds)")->required();
    ev->add_option("--method", ev_methods, "corr | mi | granger | checkpoint:PATH | oracle | constant")->required();
    auto* ev_noise_opt = ev->add_option("--noise-scale", ev_noise, "Add Gaussian noise before scoring");
    auto* ev_norm_opt = ev->add_flag("--noise-normalize", ev_norm, "Scale noise by each sequence's std");
    ev->add_option("--out", ev_out, "Output directory")->required();
    ev->callback([&] {
        action = [&] {
            Manifest man("eval", args);
            resolve_common(man);
            const json sec = section(cfg, "eval");
            fill(ev_noise_opt, sec, "noise_scale", ev_noise);
            fill(ev_norm_opt, sec, "noise_normalize", ev_norm);
            std::vector<Method> methods;
            for (const auto& m : ev_methods) methods.push_back(parse_method(m));
            ensure_dir(ev_out);
            std::vector<MetricsReport> reports;
            for (std::size_t d = 0; d < ev_data.size(); ++d) {
                Dataset ds = read_dataset(ev_data[d]);
                man.input(ev_data[d]);
                if (ev_noise > 0.0) ds = add_noise(ds, {ev_noise, ev_norm, mix64(derive_seed(seed, "noise") + d)});
                for (const auto& m : methods) {
                    if (m.kind == MethodKind::checkpoint) man.input(m.checkpoint);
                    auto e = evaluate_method(m, ds, jobs, ev_noise);
                    e.report.dataset = ds.split.empty() ? fs::path(ev_data[d]).stem().string() : ds.split;
                    const fs::path sp = fs::path(ev_out) / ("scores_" + e.report.dataset + "_" + m.tag() + ".csv");
                    write_scores_csv(m.tag(), e.scores, sp);
                    man.output(sp);
                    for (const auto& w : e.report.warnings) err << "warning: " << e.report.dataset << ": " << w << '\n';
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "%-10s %-8s AUROC %.4f +- %.4f  AUPRC %.4f +- %.4f  (%zu groups)\n",
                                  m.tag().c_str(), e.report.dataset.c_str(), e.report.auroc_mean, e.report.auroc_std,
                                  e.report.auprc_mean, e.report.auprc_std, e.report.groups.size());
                    out << buf;
                    reports.push_back(std::move(e.report));
                }
            }
            const fs::path csv = fs::path(ev_out) / "report.csv";
            const fs::path js = fs::path(ev_out) / "report.json";
            write_report_csv(reports, csv);
            bin::write_text(js, report_json(reports).dump(2) + "\n");
            man.output(csv);
            man.output(js);
            man.config = {{"methods", ev_methods}, {"noise_scale", ev_noise}, {"noise_normalize", ev_norm}};
            finish_dir(man, ev_out, t0);
        };
    });

    // probe
    auto* pr = app.add_subcommand("probe", "Explanation probes on a trained checkpoint");
    std::string pr_kind, pr_ckpt, pr_data, pr_out;
    int pr_shift = -1;
    double pr_conf = 0.9;
    int pr_limit = 20;
    pr->add_option("kind", pr_kind, "gradcam | reversal")->required()->check(CLI::IsMember({"gradcam", "reversal"}));
    pr->add_option("--checkpoint", pr_ckpt, "Checkpoint (.cfck)")->required();
    pr->add_option("--dataset", pr_data, "Dataset (.cfds)")->required();
    pr->add_option("--out", pr_out, "Output directory")->required();
    auto* pr_shift_opt = pr->add_option("--shift", pr_shift, "Reversal shift in steps (default: one half-clock)");
    auto* pr_conf_opt = pr->add_option("--min-confidence", pr_conf, "Confidence threshold for true positives");
    auto* pr_limit_opt = pr->add_option("--limit", pr_limit, "Saliency maps to dump");
    pr->callback([&] {
        action = [&] {
            Manifest man("probe " + pr_kind, args);
            resolve_common(man);
            const json sec = section(cfg, "probe");
            fill(pr_shift_opt, sec, "shift", pr_shift);
            fill(pr_conf_opt, sec, "min_confidence", pr_conf);
            fill(pr_limit_opt, sec, "limit", pr_limit);
            const auto ck = load_checkpoint(pr_ckpt);
            const Dataset ds = read_dataset(pr_data);
            man.input(pr_ckpt);
            man.input(pr_data);
            require_input_length(ck, ds.L);
            if (pr_shift < 0) {
                pr_shift = 30;
                if (ds.sidecar.contains("k")) pr_shift = ds.sidecar["k"].get<int>();
            }
            ensure_dir(pr_out);
            const auto p = predict(ck.weights, ds, jobs);
            std::vector<std::size_t> tp;
            for (std::size_t s = 0; s < ds.samples.size(); ++s)
                if (ds.samples[s].label == 1 && p[s] >= pr_conf) tp.push_back(s);
            json summary = {{"kind", pr_kind}, {"confident_true_positives", tp.size()}, {"min_confidence", pr_conf}};
            if (pr_kind == "reversal") {
                std::vector<ReversalResult> res(tp.size());
                parallel_for(tp.size(), jobs, [&](std::size_t q) {
                    res[q] = temporal_reversal_probe(ck.weights, ds.samples[tp[q]].x, pr_shift);
                });
                std::string csv = "i,j,m,p_original,p_shifted\n";
                std::size_t rejected = 0;
                char buf[96];
                for (std::size_t q = 0; q < tp.size(); ++q) {
                    const auto& s = ds.samples[tp[q]];
                    std::snprintf(buf, sizeof buf, "%u,%u,%u,%.6f,%.6f\n", s.i, s.j, s.m, res[q].p_original,
                                  res[q].p_shifted);
                    csv += buf;
                    rejected += res[q].p_shifted < 0.5;
                }
                const fs::path cp = fs::path(pr_out) / "reversal.csv";
                bin::write_text(cp, csv);
                man.output(cp);
                const double frac = tp.empty() ? 0.0 : static_cast<double>(rejected) / static_cast<double>(tp.size());
                summary["shift"] = pr_shift;
                summary["rejected"] = rejected;
                summary["rejected_fraction"] = frac;
                out << rejected << " of " << tp.size() << " confident true positives rejected after reversal\n";
            } else {
                json maps = json::array();
                const std::size_t n = std::min<std::size_t>(tp.size(), static_cast<std::size_t>(std::max(0, pr_limit)));
                for (std::size_t q = 0; q < n; ++q) {
                    const auto& s = ds.samples[tp[q]];
                    const auto map = grad_cam(ck.weights, s.x);
                    const std::string name = "saliency_" + std::to_string(s.m) + "_" + std::to_string(s.i) + "_" +
                                             std::to_string(s.j) + ".csv";
                    write_saliency_csv(map, fs::path(pr_out) / name);
                    man.output(fs::path(pr_out) / name);
                    const auto arg = std::max_element(map.values.begin(), map.values.end()) - map.values.begin();
                    maps.push_back({{"file", name}, {"i", s.i}, {"j", s.j}, {"m", s.m}, {"confidence", map.confidence},
                                    {"argmax", arg}, {"degenerate", map.degenerate}});
                }
                summary["maps"] = maps;
                out << "wrote " << n << " saliency maps\n";
            }
            const fs::path sp = fs::path(pr_out) / (pr_kind + ".json");
            bin::write_text(sp, summary.dump(2) + "\n");
            man.output(sp);
            man.config = {{"shift", pr_shift}, {"min_confidence", pr_conf}, {"limit", pr_limit}};
            finish_dir(man, pr_out, t0);
        };
    });

    // stats
    auto* st = app.add_subcommand("stats", "Per-period causal-pair statistics");
    std::string st_gt, st_out;
    st->add_option("--ground-truth", st_gt, "Directory written by perturb")->required();
    st->add_option("--out", st_out, "Output directory")->required();
    st->callback([&] {
        action = [&] {
            Manifest man("stats", args);
            resolve_common(man);
            std::vector<CausalGroundTruth> gts;
            for (const auto& stem : stems_in(st_gt, ".gt.json")) {
                gts.push_back(load_ground_truth(stem));
                man.input(with_suffix(stem, ".adj"));
            }
            if (gts.empty()) throw ValidationError("no ground truth found in " + st_gt);
            const auto rep = ground_truth_stats(gts);
            ensure_dir(st_out);
            const fs::path csv = fs::path(st_out) / "stats.csv";
            const fs::path js = fs::path(st_out) / "stats.json";
            write_stats_csv(rep, csv);
            bin::write_text(js, stats_json(rep).dump(2) + "\n");
            man.output(csv);
            man.output(js);
            finish_dir(man, st_out, t0);
            out << stats_json(rep).dump(2) << '\n';
        };
    });

    // gen-linear
    auto* gl = app.add_subcommand("gen-linear", "Linear-network surrogate: recordings plus ground truth per subject");
    LinearNetworkSpec lin;
    std::string gl_out;
    auto* gl_n = gl->add_option("--nodes", lin.n_nodes, "Nodes per network");
    auto* gl_d = gl->add_option("--density", lin.edge_density, "Directed edge probability");
    auto* gl_len = gl->add_option("--length", lin.seq_len, "Sequence length");
    auto* gl_subj = gl->add_option("--subjects", lin.n_subjects, "Subjects");
    auto* gl_noise = gl->add_option("--noise-std", lin.noise_std, "Innovation noise std");
    gl->add_option("--out", gl_out, "Output directory")->required();
    gl->callback([&] {
        action = [&] {
            Manifest man("gen-linear", args);
            resolve_common(man);
            const json sec = section(cfg, "linear");
            fill(gl_n, sec, "n_nodes", lin.n_nodes);
            fill(gl_d, sec, "edge_density", lin.edge_density);
            fill(gl_len, sec, "seq_len", lin.seq_len);
            fill(gl_subj, sec, "n_subjects", lin.n_subjects);
            fill(gl_noise, sec, "noise_std", lin.noise_std);
            lin.seed = derive_seed(seed, "sim");
            const auto data = gen_linear_network(lin);
            ensure_dir(gl_out);
            for (std::size_t s = 0; s < data.recordings.size(); ++s) {
                const fs::path stem = fs::path(gl_out) / period_stem(data.recordings[s].period);
                save_recording(stem, data.recordings[s], 1, lin.seq_len, {});
                save_ground_truth(stem, data.ground_truth[s]);
                for (const char* suf : {".cfrc", ".json", ".gt.json", ".tce", ".adj"}) man.output(with_suffix(stem, suf));
            }
            man.config = {{"n_nodes", lin.n_nodes},   {"edge_density", lin.edge_density}, {"seq_len", lin.seq_len},
                          {"n_subjects", lin.n_subjects}, {"noise_std", lin.noise_std}};
            finish_dir(man, gl_out, t0);
            out << "wrote " << data.recordings.size() << " subjects\n";
        };
    });

    // ingest
    auto* ing = app.add_subcommand("ingest", "Convert external recordings plus ground truth into pair datasets");
    std::vector<std::string> ing_rec, ing_adj;
    std::string ing_out, ing_plan, ing_split = "all";
    ing->add_option("--recordings", ing_rec, "Recording stems or directories (<stem>.cfrc + <stem>.json)")->required();
    ing->add_option("--adjacency", ing_adj, "Ground-truth stems or directories (<stem>.gt.json/.tce/.adj)")->required();
    ing->add_option("--plan", ing_plan, "Split plan JSON; without it every pair goes to one dataset");
    ing->add_option("--split-name", ing_split, "Dataset name when no plan is given");
    ing->add_option("--out", ing_out, "Output directory")->required();
    ing->callback([&] {
        action = [&] {
            Manifest man("ingest", args);
            resolve_common(man);
            auto loaded = load_pairs(resolve_stems(ing_rec, ".cfrc"), resolve_stems(ing_adj, ".gt.json"), man);
            ensure_dir(ing_out);
            if (!ing_plan.empty() || section(cfg, "dataset").contains("plan")) {
                const SplitPlan plan = resolve_plan(ing_plan, cfg, seed);
                if (!ing_plan.empty()) man.input(ing_plan);
                write_split(build_split(loaded.recordings, loaded.gts, plan), loaded.k, ing_out, man, out);
                man.config = {{"plan", plan.to_json()}};
            } else {
                Dataset ds = build_all_pairs(loaded.recordings, loaded.gts, ing_split);
                ds.sidecar["k"] = loaded.k;
                const fs::path p = fs::path(ing_out) / (ing_split + ".cfds");
                write_dataset(ds, p);
                man.output(p);
                man.output(with_suffix(p, ".json"));
                out << ing_split << ": " << ds.samples.size() << " pairs, " << ds.positives() << " positive\n";
            }
            finish_dir(man, ing_out, t0);
        };
    });

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error[validation]: " << e.what() << '\n';
        return 1;
    } catch (const Error& e) {
        err << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
        return e.category() == ErrorCategory::runtime ? 2 : 1;
    }

    try {
        if (action) action();
        return 0;
    } catch (const Error& e) {
        err << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
        return e.category() == ErrorCategory::runtime ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error[runtime]: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace cf::cli

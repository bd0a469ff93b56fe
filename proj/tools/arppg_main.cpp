#include <CLI11.hpp>

#include "arppg/evalrun.hpp"

namespace {

using namespace arppg;

RunConfig load_run_config(const std::string& path, int64_t seed_override) {
    RunConfig cfg = load_config(path);
    if (seed_override >= 0) cfg.seed = (uint64_t)seed_override;
    return cfg;
}

int cmd_generate(const std::string& config, const std::string& out, bool force,
                 int64_t seed_override) {
    RunConfig cfg = load_run_config(config, seed_override);
    DatasetManifest m = generate_dataset(cfg, out, force);
    std::cout << "generated " << m.train.size() << " train + " << m.val.size()
              << " val videos under " << out << '\n';
    return 0;
}

int cmd_train(const std::string& config, const std::string& data, const std::string& out,
              const std::string& resume, int64_t seed_override) {
    RunConfig cfg = load_run_config(config, seed_override);
    Dataset ds = load_dataset(data);
    std::filesystem::create_directories(out);
    Checkpoint ck;
    if (!resume.empty()) {
        ck = load_checkpoint(resume, &cfg);
    } else {
        ck.config = cfg;
        Rng rng(cfg.seed);
        ck.params = ModelParams::init(cfg.model_config(), rng);
    }
    std::ofstream log(std::filesystem::path(out) / "train.log", std::ios::app);
    struct Tee : std::ostream, std::streambuf {
        std::ostream &a, &b;
        Tee(std::ostream& a, std::ostream& b) : std::ostream(this), a(a), b(b) {}
        int overflow(int c) override {
            if (c != EOF) {
                a.put((char)c);
                b.put((char)c);
            }
            return c;
        }
    } tee(std::cout, log);
    TrainResult r = train_model(ds, ck, out, tee);
    if (!r.log.empty())
        std::cout << "best val_mae_bpm " << r.best_val_mae << " at epoch " << r.best_epoch << '\n';
    return 0;
}

Checkpoint load_for_eval(const std::string& checkpoint) {
    return load_checkpoint(checkpoint);
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out,
             std::vector<std::string> schedules) {
    Checkpoint ck = load_for_eval(checkpoint);
    Dataset ds = load_dataset(data);
    const std::vector<SyntheticClip>& videos = ds.val.empty() ? ds.train : ds.val;
    if (schedules.empty()) schedules = all_schedule_labels();
    std::filesystem::create_directories(out);
    nlohmann::json report;
    PlotSeries mae_curve{"mae", "#d62728", {}, {}};
    for (const auto& label : schedules) {
        ScheduleEval se = eval_schedule(videos, ck.params, ck.config, label);
        report[label] = report_to_json(se.metrics, ck.config.eval);
        std::printf("schedule %-14s mae_bpm %.4f rmse_bpm %.4f\n", label.c_str(),
                    se.metrics.mae_bpm, se.metrics.rmse_bpm);
        ResolutionSchedule sched = schedule_from_label(label);
        if (sched.kind == ResolutionSchedule::Kind::Fixed) {
            mae_curve.x.push_back(sched.start_size);
            mae_curve.y.push_back(se.metrics.mae_bpm);
        }
        // overlay of the first video's first window vs ground truth
        if (!se.first_pred.empty() && !se.first_gt.empty()) {
            PlotSpec spec;
            spec.title = "predicted vs ground-truth signal (" + label + ")";
            spec.x_label = "frame";
            spec.y_label = "normalized amplitude";
            PlotSeries pred{"predicted", "#1f77b4", {}, {}};
            PlotSeries gt{"ground truth", "#2ca02c", {}, {}};
            auto normed = [](const std::vector<double>& v) {
                double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
                double sd = 0;
                for (double x : v) sd += (x - mean) * (x - mean);
                sd = std::sqrt(sd / v.size());
                std::vector<double> out;
                for (double x : v) out.push_back(sd > 0 ? (x - mean) / sd : 0.0);
                return out;
            };
            auto p = normed(se.first_pred), g = normed(se.first_gt);
            size_t n = std::min(p.size(), g.size());
            p.resize(n);
            g.resize(n);
            for (size_t i = 0; i < p.size(); ++i) {
                pred.x.push_back((double)i);
                pred.y.push_back(p[i]);
                gt.x.push_back((double)i);
                gt.y.push_back(g[i]);
            }
            spec.series = {gt, pred};
            write_line_chart(spec, std::filesystem::path(out) / ("signal_" + label + ".svg"));
        }
    }
    if (mae_curve.x.size() >= 2) {
        std::vector<size_t> idx(mae_curve.x.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](size_t a, size_t b) { return mae_curve.x[a] < mae_curve.x[b]; });
        PlotSeries sorted = mae_curve;
        for (size_t i = 0; i < idx.size(); ++i) {
            sorted.x[i] = mae_curve.x[idx[i]];
            sorted.y[i] = mae_curve.y[idx[i]];
        }
        PlotSpec spec;
        spec.title = "MAE vs input resolution";
        spec.x_label = "resolution (px)";
        spec.y_label = "MAE (bpm)";
        spec.series = {sorted};
        write_line_chart(spec, std::filesystem::path(out) / "mae_vs_resolution.svg");
    }
    std::ofstream f(std::filesystem::path(out) / "report.json");
    f << report.dump(2) << '\n';
    return 0;
}

int cmd_ablate(const std::string& config, const std::string& data, const std::string& out,
               std::vector<std::string> modes, std::vector<std::string> schedules,
               int64_t seed_override) {
    RunConfig base = load_run_config(config, seed_override);
    Dataset ds = load_dataset(data);
    if (modes.empty())
        for (auto& [name, _] : ablation_variants(base)) modes.push_back(name);
    if (schedules.empty()) schedules = {"128", "64", "32"};
    for (const auto& s : schedules) schedule_from_label(s);  // validate up front
    std::filesystem::create_directories(out);
    std::vector<AblationRow> rows;
    nlohmann::json report;
    for (const auto& mode : modes) {
        RunConfig cfg = ablation_mode_config(base, mode);
        Checkpoint ck;
        ck.config = cfg;
        Rng rng(cfg.seed);
        ck.params = ModelParams::init(cfg.model_config(), rng);
        std::ofstream log(std::filesystem::path(out) / (mode + ".log"));
        train_model(ds, ck, out / std::filesystem::path(mode), log);
        Checkpoint best = load_checkpoint(out / std::filesystem::path(mode) / "best.ckpt");
        AblationRow row{mode, {}};
        for (const auto& label : schedules) {
            ScheduleEval se = eval_schedule(ds.val, best.params, best.config, label);
            row.mae_by_schedule[label] = se.metrics.mae_bpm;
            report[mode][label] = {{"mae_bpm", se.metrics.mae_bpm},
                                   {"rmse_bpm", se.metrics.rmse_bpm}};
        }
        rows.push_back(row);
    }
    std::string table = ablation_table(rows, schedules);
    std::cout << table;
    std::ofstream tf(std::filesystem::path(out) / "ablation.txt");
    tf << table;
    std::ofstream jf(std::filesystem::path(out) / "ablation.json");
    jf << report.dump(2) << '\n';
    return 0;
}

int cmd_report_cost(const std::string& config, int64_t seed_override) {
    RunConfig cfg = load_run_config(config, seed_override);
    CostReport r = compute_cost(cfg);
    std::printf("%-14s %14s %18s\n", "module", "params", "flops");
    for (const auto& m : r.modules)
        std::printf("%-14s %14lld %18lld\n", m.name.c_str(), (long long)m.params,
                    (long long)m.flops);
    std::printf("%-14s %14lld %18lld\n", "total", (long long)r.total_params,
                (long long)r.total_flops);
    std::cout << cost_to_json(r).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"arbitrary-resolution rPPG training and evaluation"};
    app.require_subcommand(1);

    std::string config, data, out, checkpoint;
    std::vector<std::string> schedules, modes;
    bool force = false;
    int64_t seed = -1;

    auto* gen = app.add_subcommand("generate", "render a synthetic dataset");
    gen->add_option("--config", config)->required();
    gen->add_option("--out", out)->required();
    gen->add_flag("--force", force);
    gen->add_option("--seed", seed);

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config)->required();
    train->add_option("--data", data)->required();
    train->add_option("--out", out)->required();
    train->add_option("--checkpoint", checkpoint)->description("resume from this checkpoint");
    train->add_option("--seed", seed);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint under resolution schedules");
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--data", data)->required();
    eval->add_option("--out", out)->required();
    eval->add_option("--schedule", schedules)->description("schedule labels (default: all)");

    auto* ablate = app.add_subcommand("ablate", "train and compare model variants");
    ablate->add_option("--config", config)->required();
    ablate->add_option("--data", data)->required();
    ablate->add_option("--out", out)->required();
    ablate->add_option("--modes", modes)->description("variant names (default: main table)");
    ablate->add_option("--schedule", schedules)->description("schedule labels (default: 128 64 32)");
    ablate->add_option("--seed", seed);

    auto* cost = app.add_subcommand("report-cost", "parameter and FLOP counts");
    cost->add_option("--config", config)->required();
    cost->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);
    try {
        if (gen->parsed()) return cmd_generate(config, out, force, seed);
        if (train->parsed()) return cmd_train(config, data, out, checkpoint, seed);
        if (eval->parsed()) return cmd_eval(checkpoint, data, out, schedules);
        if (ablate->parsed()) return cmd_ablate(config, data, out, modes, schedules, seed);
        if (cost->parsed()) return cmd_report_cost(config, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

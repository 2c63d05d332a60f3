#include "qunet/app/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "qunet/app/config.hpp"
#include "qunet/app/plots.hpp"
#include "qunet/core/log.hpp"
#include "qunet/data/manifest.hpp"
#include "qunet/eval/baseline.hpp"
#include "qunet/eval/overlay.hpp"
#include "qunet/nn/checkpoint.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qunet::app {

namespace {

namespace fs = std::filesystem;

/// Mapped to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

inline constexpr const char* kSynthetic = "synthetic";

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    std::string output_root;
    bool verbose = false;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Global seed");
    sub->add_option("--set", c.sets, "Override one setting: section.key=value");
    sub->add_option("--output", c.output_root, "Output root for the run directory");
    sub->add_flag("-v,--verbose", c.verbose, "Log progress to stderr");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (const char* root = std::getenv(kEnvOutputRoot); root != nullptr && *root != '\0') cfg.output_root = root;
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + s + "'");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    if (!c.output_root.empty()) cfg.output_root = c.output_root;
    cfg.validate();
    set_verbose(c.verbose);
    return cfg;
}

void apply_thread_env() {
    const char* text = std::getenv(kEnvThreads);
    if (text == nullptr || *text == '\0') return;
    char* end = nullptr;
    const long n = std::strtol(text, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError(std::string(kEnvThreads) + " must be a positive integer");
    Eigen::setNbThreads(static_cast<int>(n));
#ifdef _OPENMP
    omp_set_num_threads(static_cast<int>(n));
#endif
}

/// Binds the dataset source into the config so config.resolved can reload it.
data::StackDataset load_dataset(RunConfig& cfg, const std::string& flag) {
    if (!flag.empty()) cfg.manifest = flag == kSynthetic ? std::string{} : fs::absolute(flag).string();
    if (cfg.manifest.empty()) return data::generate_synthetic_stack(cfg.synthetic_spec());
    return data::load_manifest(cfg.manifest);
}

fs::path start_run(const RunConfig& cfg, const std::string& command) {
    const auto dir = make_run_dir(cfg.output_root, command);
    std::ofstream out(dir / kResolvedConfig);
    out << render_config(cfg);
    if (!out) throw LoadError("cannot write " + (dir / kResolvedConfig).string());
    return dir;
}

void announce(const fs::path& dir) { std::cout << "run_dir: " << dir.string() << '\n'; }

std::vector<const data::SliceRecord*> records_of(const data::StackDataset& ds, const std::vector<data::SliceKey>& keys) {
    std::vector<const data::SliceRecord*> out;
    for (const auto& k : keys) out.push_back(&ds.at(k));
    return out;
}

std::vector<const data::SliceRecord*> split_records(const data::StackDataset& ds, data::Split split) {
    std::vector<const data::SliceRecord*> out;
    for (auto i : ds.indices(split)) out.push_back(&ds.records[i]);
    return out;
}

quality::InitialSelection initial_from_scan(const data::StackDataset& raw, const RunConfig& cfg,
                                            std::vector<quality::ScoredSlice>* scores_out = nullptr) {
    const auto pool = raw.indices(data::Split::pool);
    auto scores = quality::score_records(raw, pool, cfg.quality.median_kernel);
    auto initial = quality::select_initial_set(scores, cfg.quality);
    if (scores_out) *scores_out = std::move(scores);
    return initial;
}

nn::SegModel load_model_for(const fs::path& path, const RunConfig& cfg) {
    auto ck = nn::load_checkpoint(path);
    if (ck.model.config().input_size != cfg.image_size) {
        throw ValidationError("checkpoint input size " + std::to_string(ck.model.config().input_size) +
                              " differs from data.image_size " + std::to_string(cfg.image_size));
    }
    return std::move(ck.model);
}

void write_overlays(const fs::path& dir, const nn::SegModel& model, const std::vector<const data::SliceRecord*>& records) {
    for (const auto* r : records) {
        if (!r->annotation) throw ValidationError("overlay: slice " + data::to_string(r->key()) + " is unannotated");
        const auto out = nn::predict(model, r->image);
        const auto rgb = eval::render_overlay(binarize(out.levels[nn::kHeads - 1]), *r->annotation, r->image);
        write_png_rgb(dir / ("overlay_" + r->stack_id + "_" + std::to_string(r->slice_index) + ".png"), rgb);
    }
}

// Subcommands -------------------------------------------------------------

void cmd_generate(const Common& c, const std::string& out_dir) {
    auto cfg = resolve(c);
    const fs::path dir(out_dir);
    if (fs::exists(dir) && !fs::is_empty(dir)) throw ValidationError("output directory " + dir.string() + " is not empty");
    const auto manifest = data::write_synthetic(cfg.synthetic_spec(), dir);
    std::cout << "manifest: " << manifest.string() << '\n';
}

void cmd_quality_scan(const Common& c, const std::string& dataset, bool with_initial, bool plot) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    std::vector<quality::ScoredSlice> scores;
    const auto initial = initial_from_scan(raw, cfg, &scores);
    const auto dir = start_run(cfg, with_initial ? "select-initial" : "quality-scan");
    quality::write_quality_csv(dir / select::kQualityCsv, scores, initial.s0);
    if (plot) write_png_rgb(dir / "quality_scatter.png", plot_quality_scatter(scores, initial));
    if (with_initial) {
        select::write_json(dir / select::kInitialSelectionJson, initial);
        std::cout << "s0: " << initial.s0.size() << " of " << scores.size() << " pool slices\n";
    }
    announce(dir);
}

/// Keys listed under "s0" (and "s_m" when present) of a selection artifact.
std::vector<data::SliceKey> keys_from_artifact(const fs::path& path) {
    const auto j = select::read_json(path);
    std::vector<data::SliceKey> keys;
    for (const char* field : {"s0", "s_m"}) {
        if (!j.contains(field)) continue;
        for (const auto& k : j.at(field)) keys.push_back({k.at("stack_id").get<std::string>(), k.at("slice_index").get<int>()});
    }
    return keys;
}

void cmd_train(const Common& c, const std::string& dataset, const std::string& keys_file) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    const auto ds = data::normalize_dataset(raw, cfg.image_size);
    const auto train_set = keys_file.empty() ? split_records(ds, data::Split::pool) : records_of(ds, keys_from_artifact(keys_file));
    const auto dir = start_run(cfg, "train");
    const auto pc = cfg.pipeline();
    nn::SegModel model(pc.model, derive_seed(cfg.seed, 1));
    auto tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 2);
    const auto history = train::train(model, train_set, tc, [](int epoch, const train::LevelLosses&, double loss) {
        log_info("epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
    });
    nn::save_checkpoint(dir / "checkpoint.qckpt", model, {{"stage", "train"}, {"epochs", history.epochs()}});
    train::write_loss_csv(dir / "loss_history.csv", history);
    announce(dir);
}

void cmd_select_minimal(const Common& c, const std::string& dataset, const std::string& checkpoint,
                        const std::string& initial_file) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    const auto model = load_model_for(checkpoint, cfg);
    quality::InitialSelection initial;
    if (initial_file.empty()) {
        initial = initial_from_scan(raw, cfg);
    } else {
        initial = select::read_json(initial_file).get<quality::InitialSelection>();
    }
    const auto ds = data::normalize_dataset(raw, cfg.image_size);
    const std::set<data::SliceKey> s0(initial.s0.begin(), initial.s0.end());
    std::vector<const data::SliceRecord*> remainder;
    for (const auto* r : split_records(ds, data::Split::pool)) {
        if (!s0.count(r->key())) remainder.push_back(r);
    }
    select::SelectionReport report;
    report.q0 = cfg.q0;
    report.s0 = initial.s0;
    report.pool_size = ds.indices(data::Split::pool).size();
    if (!remainder.empty()) report.verdicts = select::select_minimal(model, remainder, cfg.q0);
    select::finalize(report);
    const auto dir = start_run(cfg, "select-minimal");
    select::write_json(dir / select::kSelectionReportJson, report);
    std::cout << "s_m: " << report.s_m.size() << ", fraction_selected: " << report.fraction_selected << '\n';
    announce(dir);
}

void cmd_finetune(const Common& c, const std::string& dataset, const std::string& checkpoint, const std::string& report_file) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    auto model = load_model_for(checkpoint, cfg);
    const auto ds = data::normalize_dataset(raw, cfg.image_size);
    const auto train_set = records_of(ds, keys_from_artifact(report_file));
    auto tc = cfg.finetune();
    tc.seed = derive_seed(cfg.seed, 3, 1);
    const auto dir = start_run(cfg, "finetune");
    const auto history = train::train(model, train_set, tc);
    nn::save_checkpoint(dir / select::kCheckpointFinal, model, {{"stage", "final"}, {"epochs", history.epochs()}});
    train::write_loss_csv(dir / select::kLossFinalCsv, history);
    announce(dir);
}

void cmd_evaluate(const Common& c, const std::string& dataset, const std::string& checkpoint, int overlays) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    const auto model = load_model_for(checkpoint, cfg);
    const auto ds = data::normalize_dataset(raw, cfg.image_size);
    const auto test = split_records(ds, data::Split::test);
    if (test.empty()) throw ValidationError("dataset has no test split");
    if (static_cast<std::size_t>(overlays) > test.size()) throw ValidationError("more overlays requested than test slices");
    const auto ev = eval::evaluate(model, test);
    const auto dir = start_run(cfg, "evaluate");
    eval::write_metrics_csv(dir / select::kMetricsCsv, ev);
    write_overlays(dir, model, {test.begin(), test.begin() + overlays});
    std::cout << "mean dice: " << ev.mean.dice << ", mean jaccard: " << ev.mean.jaccard << '\n';
    announce(dir);
}

void cmd_baseline(const Common& c, const std::string& dataset) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    const auto ds = data::normalize_dataset(raw, cfg.image_size);
    std::vector<const data::SliceRecord*> all;
    for (const auto& r : ds.records) all.push_back(&r);
    eval::BaselineConfig bc;
    bc.fraction = cfg.baseline_fraction;
    bc.runs = cfg.baseline_runs;
    bc.model = cfg.pipeline().model;
    bc.train = cfg.train;
    bc.seed = cfg.seed;
    const auto result = eval::random_baseline(all, bc);
    const auto dir = start_run(cfg, "baseline-random");
    eval::write_baseline_csv(dir / "baseline_runs.csv", result);
    std::cout << "mean dice: " << result.mean.dice << " (std " << result.stddev.dice << ")\n";
    announce(dir);
}

void cmd_pipeline(const Common& c, const std::string& dataset, const std::string& init_checkpoint) {
    auto cfg = resolve(c);
    const auto raw = load_dataset(cfg, dataset);
    std::optional<nn::SegModel> init;
    if (!init_checkpoint.empty()) init.emplace(load_model_for(init_checkpoint, cfg));
    const auto dir = start_run(cfg, "run-pipeline");
    const auto result = select::run_pipeline(raw, cfg.pipeline(), dir, init ? &*init : nullptr);
    std::cout << "s0: " << result.report.s0.size() << ", s_m: " << result.report.s_m.size()
              << ", fraction_selected: " << result.report.fraction_selected << '\n';
    if (result.evaluation) std::cout << "mean dice: " << result.evaluation->mean.dice << '\n';
    announce(dir);
}

void cmd_report(const Common& c, const std::string& run, int overlays) {
    auto cfg = resolve(c);
    const fs::path run_dir(run);
    if (!fs::is_directory(run_dir)) throw ValidationError("run directory " + run + " does not exist");
    const auto run_cfg = load_config(run_dir / kResolvedConfig);
    const auto scores = quality::read_quality_csv(run_dir / select::kQualityCsv);
    const auto initial = select::read_json(run_dir / select::kInitialSelectionJson).get<quality::InitialSelection>();

    std::vector<train::LossHistory> histories;
    for (const char* name : {select::kLossS0Csv, select::kLossFinalCsv}) {
        if (fs::exists(run_dir / name)) histories.push_back(train::read_loss_csv(run_dir / name));
    }

    std::optional<nn::SegModel> model;
    std::vector<const data::SliceRecord*> chosen;
    data::StackDataset ds;
    if (overlays > 0) {
        for (const char* name : {select::kCheckpointFinal, select::kCheckpointS0}) {
            if (fs::exists(run_dir / name)) {
                model.emplace(nn::load_checkpoint(run_dir / name).model);
                break;
            }
        }
        if (!model) throw ValidationError("run directory has no checkpoint to render overlays from");
        RunConfig source = run_cfg;
        ds = data::normalize_dataset(load_dataset(source, {}), run_cfg.image_size);
        auto test = split_records(ds, data::Split::test);
        if (static_cast<std::size_t>(overlays) > test.size()) throw ValidationError("more overlays requested than test slices");
        chosen.assign(test.begin(), test.begin() + overlays);
    }

    const auto dir = make_run_dir(cfg.output_root, "report");
    write_png_rgb(dir / "quality_scatter.png", plot_quality_scatter(scores, initial));
    write_png_rgb(dir / "loss_curves.png", plot_loss_curves(histories));
    if (model) write_overlays(dir, *model, chosen);
    announce(dir);
}

}  // namespace

fs::path make_run_dir(const fs::path& root, const std::string& prefix) {
    fs::create_directories(root);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const std::string base = prefix + "-" + stamp;
    for (int n = 0;; ++n) {
        const fs::path dir = root / (n == 0 ? base : base + "-" + std::to_string(n));
        if (fs::create_directory(dir)) return dir;
    }
}

int cli_dispatch(int argc, const char* const* argv) {
    CLI::App app{"Quality-driven minimal training set selection for U-Net++ segmentation", "qunet"};
    app.require_subcommand(1);
    app.fallthrough(false);

    Common common;
    std::string dataset;
    std::string out_dir;
    std::string checkpoint;
    std::string aux;
    std::string run;
    int overlays = 0;
    bool plot = false;
    std::function<void()> action;

    const auto sub = [&](const char* name, const char* help) {
        auto* s = app.add_subcommand(name, help);
        add_common(s, common);
        return s;
    };
    const auto dataset_opt = [&](CLI::App* s, bool required) {
        auto* o = s->add_option("--dataset", dataset, "Manifest CSV, or 'synthetic' for the configured generator");
        if (required) o->required();
    };

    auto* gen = sub("generate-synthetic", "Write a synthetic dataset (images, masks, manifest)");
    gen->add_option("--out", out_dir, "Destination directory")->required();
    gen->callback([&] { action = [&] { cmd_generate(common, out_dir); }; });

    auto* scan = sub("quality-scan", "Score blurriness, psnr_inv and ROI statistics of the pool");
    dataset_opt(scan, true);
    scan->add_flag("--plot", plot, "Also write the blurriness/psnr_inv scatter PNG");
    scan->callback([&] { action = [&] { cmd_quality_scan(common, dataset, false, plot); }; });

    auto* init = sub("select-initial", "Quadrant thresholding plus deduplication (S0)");
    dataset_opt(init, true);
    init->add_flag("--plot", plot, "Also write the blurriness/psnr_inv scatter PNG");
    init->callback([&] { action = [&] { cmd_quality_scan(common, dataset, true, plot); }; });

    auto* tr = sub("train", "Train a fresh model");
    dataset_opt(tr, true);
    tr->add_option("--keys", aux, "initial_selection.json or selection_report.json restricting the training set");
    tr->callback([&] { action = [&] { cmd_train(common, dataset, aux); }; });

    auto* sm = sub("select-minimal", "Score the pool with a trained model and pick S_m");
    dataset_opt(sm, true);
    sm->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    sm->add_option("--initial", aux, "initial_selection.json; recomputed when omitted")->check(CLI::ExistingFile);
    sm->callback([&] { action = [&] { cmd_select_minimal(common, dataset, checkpoint, aux); }; });

    auto* ft = sub("finetune", "Continue training on S0 + S_m");
    dataset_opt(ft, true);
    ft->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    ft->add_option("--report", aux, "selection_report.json")->required()->check(CLI::ExistingFile);
    ft->callback([&] { action = [&] { cmd_finetune(common, dataset, checkpoint, aux); }; });

    auto* ev = sub("evaluate", "Metrics of a checkpoint on the test split");
    dataset_opt(ev, true);
    ev->add_option("--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--overlays", overlays, "Number of overlay PNGs")->check(CLI::NonNegativeNumber);
    ev->callback([&] { action = [&] { cmd_evaluate(common, dataset, checkpoint, overlays); }; });

    auto* bl = sub("baseline-random", "Random-subset training baseline");
    dataset_opt(bl, true);
    bl->callback([&] { action = [&] { cmd_baseline(common, dataset); }; });

    auto* rp = sub("run-pipeline", "Full two-step selection pipeline");
    dataset_opt(rp, false);
    rp->add_option("--init-checkpoint", checkpoint, "Model used for selection when S0 is unannotated (flag mode)")
        ->check(CLI::ExistingFile);
    rp->callback([&] { action = [&] { cmd_pipeline(common, dataset, checkpoint); }; });

    auto* rep = sub("report", "Figures for a completed run directory");
    rep->add_option("--run", run, "Run directory")->required();
    overlays = 0;
    rep->add_option("--overlays", overlays, "Number of overlay PNGs")->check(CLI::NonNegativeNumber);
    rep->callback([&] { action = [&] { cmd_report(common, run, overlays); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        apply_thread_env();
        action();
        return kExitOk;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int cli_dispatch(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"qunet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace qunet::app

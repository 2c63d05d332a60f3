#include "qunet/select/pipeline.hpp"

#include <fstream>
#include <set>

#include "qunet/core/log.hpp"
#include "qunet/nn/checkpoint.hpp"

namespace qunet::select {

std::string to_string(Mode mode) { return mode == Mode::oracle ? "oracle" : "flag"; }

Mode parse_mode(const std::string& text) {
    if (text == "oracle") return Mode::oracle;
    if (text == "flag") return Mode::flag;
    throw ConfigError("unknown mode '" + text + "' (expected oracle or flag)");
}

void PipelineConfig::validate() const {
    model.validate();
    train.validate();
    if (finetune) finetune->validate();
    check_q0(q0);
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
    if (quality.cap < 1) throw ConfigError("cap must be >= 1");
    if (!(quality.eps0 >= 0.0)) throw ConfigError("eps0 must be >= 0");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

namespace {

using RecordList = std::vector<const data::SliceRecord*>;

RecordList lookup(const data::StackDataset& ds, const std::vector<data::SliceKey>& keys) {
    RecordList out;
    for (const auto& k : keys) out.push_back(&ds.at(k));
    return out;
}

void require_annotated(const RecordList& records, const std::string& what) {
    std::string missing;
    for (const auto* r : records) {
        if (!r->annotation) missing += (missing.empty() ? "" : ", ") + data::to_string(r->key());
    }
    if (!missing.empty()) throw ValidationError(what + " lacks annotations for: " + missing);
}

bool all_annotated(const RecordList& records) {
    for (const auto* r : records) {
        if (!r->annotation) return false;
    }
    return true;
}

nlohmann::json checkpoint_meta(const std::string& stage, const train::LossHistory& history) {
    nlohmann::json j = {{"stage", stage}, {"epochs", history.epochs()}};
    if (history.epochs() > 0) j["final_loss"] = history.combined.back();
    return j;
}

}  // namespace

PipelineResult run_pipeline(const data::StackDataset& raw, const PipelineConfig& config,
                            const std::filesystem::path& run_dir, const nn::SegModel* initial_model) {
    config.validate();
    data::validate(raw);
    const bool persist = !run_dir.empty();
    if (persist) std::filesystem::create_directories(run_dir);

    PipelineResult result;
    const auto pool_idx = raw.indices(data::Split::pool);
    if (pool_idx.empty()) throw ValidationError("dataset has no pool slices");

    result.scores = quality::score_records(raw, pool_idx, config.quality.median_kernel);
    result.initial = quality::select_initial_set(result.scores, config.quality);
    if (persist) {
        quality::write_quality_csv(run_dir / kQualityCsv, result.scores, result.initial.s0);
        write_json(run_dir / kInitialSelectionJson, result.initial);
    }
    log_info("initial set: " + std::to_string(result.initial.s0.size()) + " of " + std::to_string(pool_idx.size()) +
             " pool slices");

    const auto ds = data::normalize_dataset(raw, config.model.input_size);
    const auto s0 = lookup(ds, result.initial.s0);

    SelectionReport& report = result.report;
    report.q0 = config.q0;
    report.s0 = result.initial.s0;
    report.pool_size = pool_idx.size();

    if (config.mode == Mode::oracle) require_annotated(s0, "initial set");
    const bool train_s0 = !s0.empty() && all_annotated(s0);
    if (train_s0) {
        result.s0_model.emplace(config.model, derive_seed(config.seed, 1));
        auto tc = config.train;
        tc.seed = derive_seed(config.seed, 2);
        result.s0_history = train::train(*result.s0_model, s0, tc);
        if (persist) {
            nn::save_checkpoint(run_dir / kCheckpointS0, *result.s0_model, checkpoint_meta("s0", result.s0_history));
            train::write_loss_csv(run_dir / kLossS0Csv, result.s0_history);
        }
    } else if (config.mode == Mode::oracle) {
        throw ValidationError("initial set is empty; nothing to train on");
    } else if (initial_model != nullptr) {
        result.s0_model = *initial_model;
    } else {
        log_warning("initial set is unannotated and no initial checkpoint was given; stopping after S0");
        finalize(report);
        if (persist) write_json(run_dir / kSelectionReportJson, report);
        return result;
    }

    const std::set<data::SliceKey> s0_keys(report.s0.begin(), report.s0.end());
    RecordList remainder;
    for (auto i : pool_idx) {
        if (!s0_keys.count(ds.records[i].key())) remainder.push_back(&ds.records[i]);
    }
    if (!remainder.empty()) report.verdicts = select_minimal(*result.s0_model, remainder, config.q0);
    finalize(report);
    result.rounds = 1;

    if (persist) write_json(run_dir / kSelectionReportJson, report);
    if (config.mode == Mode::flag) return result;

    const auto finetune_cfg = config.finetune.value_or(config.train);
    result.final_model = *result.s0_model;
    for (int round = 1;; ++round) {
        RecordList train_set = s0;
        const auto s_m = lookup(ds, report.s_m);
        require_annotated(s_m, "minimal set");
        train_set.insert(train_set.end(), s_m.begin(), s_m.end());
        auto tc = finetune_cfg;
        tc.seed = derive_seed(config.seed, 3, static_cast<std::uint64_t>(round));
        const auto history = train::train(*result.final_model, train_set, tc);
        result.final_history.levels.insert(result.final_history.levels.end(), history.levels.begin(),
                                           history.levels.end());
        result.final_history.combined.insert(result.final_history.combined.end(), history.combined.begin(),
                                             history.combined.end());
        result.rounds = round;
        if (!config.iterate || round >= config.max_rounds) break;

        // Re-score slices not yet selected; newly flagged ones join S_m.
        std::vector<std::size_t> open;
        RecordList open_records;
        for (std::size_t v = 0; v < report.verdicts.size(); ++v) {
            if (!report.verdicts[v].selected) {
                open.push_back(v);
                open_records.push_back(&ds.at(report.verdicts[v].key));
            }
        }
        if (open.empty()) break;
        const auto again = select_minimal(*result.final_model, open_records, config.q0);
        bool any = false;
        for (std::size_t k = 0; k < open.size(); ++k) {
            report.verdicts[open[k]] = again[k];
            any = any || again[k].selected;
        }
        finalize(report);
        if (!any) break;
    }

    RecordList test;
    for (auto i : ds.indices(data::Split::test)) test.push_back(&ds.records[i]);
    if (!test.empty()) {
        require_annotated(test, "test split");
        result.evaluation = eval::evaluate(*result.final_model, test);
    }

    if (persist) {
        if (config.iterate) write_json(run_dir / kSelectionReportJson, report);
        nn::save_checkpoint(run_dir / kCheckpointFinal, *result.final_model, checkpoint_meta("final", result.final_history));
        train::write_loss_csv(run_dir / kLossFinalCsv, result.final_history);
        if (result.evaluation) eval::write_metrics_csv(run_dir / kMetricsCsv, *result.evaluation);
    }
    return result;
}

}  // namespace qunet::select

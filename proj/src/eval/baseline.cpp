#include "qunet/eval/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "qunet/core/log.hpp"

namespace qunet::eval {

std::vector<const data::SliceRecord*> random_subset(std::span<const data::SliceRecord* const> records, std::size_t k,
                                                    std::uint64_t seed) {
    if (k > records.size()) throw ValidationError("random_subset: budget exceeds record count");
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    shuffle(order.begin(), order.end(), rng);
    order.resize(k);
    std::sort(order.begin(), order.end());
    std::vector<const data::SliceRecord*> out;
    for (auto i : order) out.push_back(records[i]);
    return out;
}

Evaluation train_and_evaluate(std::span<const data::SliceRecord* const> train_set,
                              std::span<const data::SliceRecord* const> test_set, const nn::ModelConfig& model,
                              const train::TrainConfig& train, std::uint64_t model_seed) {
    nn::SegModel net(model, model_seed);
    train::train(net, train_set, train);
    return evaluate(net, test_set);
}

BaselineResult random_baseline(std::span<const data::SliceRecord* const> records, const BaselineConfig& config) {
    if (!(config.fraction > 0.0 && config.fraction < 1.0)) throw ConfigError("baseline fraction must lie in (0, 1)");
    if (config.runs < 1) throw ConfigError("baseline runs must be >= 1");
    if (!config.run_seeds.empty() && config.run_seeds.size() != static_cast<std::size_t>(config.runs)) {
        throw ConfigError("run_seeds must list one seed per run");
    }
    const std::size_t n = records.size();
    const auto n_train = static_cast<std::size_t>(std::ceil(config.fraction * static_cast<double>(n) - 1e-9));
    if (n_train == 0 || n_train >= n) {
        throw ValidationError("baseline fraction " + std::to_string(config.fraction) + " over " + std::to_string(n) +
                              " slices leaves an empty train or test set");
    }
    for (const auto* r : records) {
        if (!r->annotation) throw ValidationError("baseline: slice " + data::to_string(r->key()) + " is unannotated");
    }

    BaselineResult result;
    std::vector<Metrics> means;
    for (int run = 0; run < config.runs; ++run) {
        const std::uint64_t seed = config.run_seeds.empty()
                                       ? derive_seed(config.seed, 0xba5e, static_cast<std::uint64_t>(run))
                                       : config.run_seeds[static_cast<std::size_t>(run)];
        const auto train_set = random_subset(records, n_train, seed);
        std::vector<const data::SliceRecord*> test_set;
        for (const auto* r : records) {
            if (std::find(train_set.begin(), train_set.end(), r) == train_set.end()) test_set.push_back(r);
        }
        auto tc = config.train;
        tc.seed = derive_seed(seed, 2);
        const auto ev = train_and_evaluate(train_set, test_set, config.model, tc, derive_seed(seed, 1));
        result.runs.push_back({run, seed, train_set.size(), test_set.size(), ev.mean});
        means.push_back(ev.mean);
        log_info("baseline run " + std::to_string(run) + " dice " + std::to_string(ev.mean.dice));
    }
    result.mean = mean_metrics(means);
    result.stddev = stddev_metrics(means);
    return result;
}

void write_baseline_csv(const std::filesystem::path& path, const BaselineResult& result) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out.precision(10);
    out << "run,seed,n_train,n_test,precision,recall,jaccard,dice,accuracy\n";
    const auto row = [&](const Metrics& m) {
        out << ',' << m.precision << ',' << m.recall << ',' << m.jaccard << ',' << m.dice << ',' << m.accuracy << '\n';
    };
    for (const auto& r : result.runs) {
        out << r.run << ',' << r.seed << ',' << r.n_train << ',' << r.n_test;
        row(r.mean);
    }
    out << "MEAN,,,";
    row(result.mean);
    out << "STD,,,";
    row(result.stddev);
}

}  // namespace qunet::eval

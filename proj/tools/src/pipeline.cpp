#include "pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace synergraph::cli {

namespace fs = std::filesystem;

namespace {

// Raw ids in dense order from a `raw<TAB>dense` file.
std::vector<std::string> read_vocab(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::string> ids;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(n, path.string() + ": expected raw_id<TAB>index");
        const std::string dense = line.substr(tab + 1);
        if (dense != std::to_string(ids.size())) {
            throw ParseError(n, path.string() + ": indices must run 0,1,2,... (got '" + dense + "')");
        }
        ids.push_back(line.substr(0, tab));
    }
    return ids;
}

// Reorders vocabulary-ordered feature rows into the dataset's item encoding.
FeatureMatrix align_rows(FeatureMatrix f, const std::vector<std::string>& vocab, const Vocabulary& items) {
    Matrix out(items.size(), f.cols());
    std::vector<bool> seen(static_cast<std::size_t>(items.size()), false);
    Index dropped = 0;
    for (std::size_t r = 0; r < vocab.size(); ++r) {
        const auto dense = items.find(vocab[r]);
        if (!dense) {
            ++dropped;
            continue;
        }
        out.row(*dense) = f.data.row(static_cast<Index>(r));
        seen[static_cast<std::size_t>(*dense)] = true;
    }
    for (Index i = 0; i < items.size(); ++i) {
        if (!seen[static_cast<std::size_t>(i)]) throw LoadError("item '" + items.raw_id(i) + "' missing from item_vocab.tsv");
    }
    if (dropped > 0) {
        std::cerr << "warning: " << dropped << " vocabulary items have no interactions; their "
                  << to_string(f.modality) << " rows are ignored\n";
    }
    f.data = std::move(out);
    return f;
}

std::shared_ptr<const FeatureMatrix> load_modality(const fs::path& dir, Modality m,
                                                   const std::optional<std::vector<std::string>>& vocab,
                                                   const Vocabulary& items) {
    const fs::path path = dir / (std::string(to_string(m)) + ".sgfm");
    if (!fs::exists(path)) return nullptr;
    if (!vocab) return std::make_shared<FeatureMatrix>(load_feature_matrix(path, items.size(), m));
    auto f = load_feature_matrix(path, static_cast<Index>(vocab->size()), m);
    return std::make_shared<FeatureMatrix>(align_rows(std::move(f), *vocab, items));
}

std::string model_label(const RunConfig& cfg) {
    if (cfg.baseline) return to_string(*cfg.baseline);
    std::string s = "synergraph";
    if (cfg.ablation != Ablation::none) s += std::string("-") + to_string(cfg.ablation);
    if (cfg.model.modalities.size() == 1) s += std::string("-") + synergraph::to_string(cfg.model.modalities[0]);
    return s;
}

bool needs_features(const RunConfig& cfg) { return !cfg.baseline; }

}  // namespace

LoadedData load_data(const RunConfig& cfg) {
    if (cfg.dataset == "synthetic" && cfg.dataset_dir.empty()) {
        auto synth = synth_dataset(cfg.synth);
        return {user_split(synth.dataset, {}, cfg.train.seed), std::make_shared<FeatureMatrix>(std::move(synth.visual)),
                std::make_shared<FeatureMatrix>(std::move(synth.textual))};
    }
    const fs::path dir = cfg.effective_dataset_dir();
    if (!fs::is_directory(dir)) {
        throw Error("dataset directory " + dir.string() + " not found (set --dataset PATH or SYNERGRAPH_DATA)");
    }
    auto ds = encode_ids(load_interactions(dir / "interactions.tsv"));
    std::optional<std::vector<std::string>> vocab;
    if (fs::exists(dir / "item_vocab.tsv")) vocab = read_vocab(dir / "item_vocab.tsv");
    auto visual = load_modality(dir, Modality::visual, vocab, ds.items);
    auto textual = load_modality(dir, Modality::textual, vocab, ds.items);
    return {user_split(ds, {}, cfg.train.seed), std::move(visual), std::move(textual)};
}

ModelInputs make_inputs(const RunConfig& cfg, const LoadedData& data) {
    std::vector<std::shared_ptr<const FeatureMatrix>> feats;
    if (needs_features(cfg)) {
        for (Modality m : cfg.model.modalities) {
            auto f = m == Modality::visual ? data.visual : data.textual;
            if (!f) throw LoadError(std::string("dataset has no ") + to_string(m) + " features");
            feats.push_back(std::move(f));
        }
    }
    std::optional<fs::path> cache;
    if (cfg.graph_cache && !feats.empty()) {
        cache = cfg.output_dir / "graph_cache";
        fs::create_directories(*cache);
    }
    return build_model_inputs(data.split, std::move(feats), cfg.effective_top_k(), cache);
}

const ScoreProvider& TrainedRun::scorer() {
    if (knn) return *knn;
    if (!cached_) cached_.emplace(model->scorer());
    return *cached_;
}

std::unique_ptr<Trainable> make_model(const RunConfig& cfg, const ModelInputs& inputs) {
    const auto seed = cfg.train.seed;
    const double lambda = cfg.train.loss.reg_lambda;
    if (!cfg.baseline) return std::make_unique<SynerGraphModel>(cfg.effective_model(), inputs, cfg.train.loss, seed);
    switch (*cfg.baseline) {
        case BaselineKind::bprmf:
            return std::make_unique<BprMfModel>(inputs.n_users, inputs.n_items, cfg.model.dim, lambda, seed);
        case BaselineKind::lightgcn:
            return std::make_unique<LightGcnModel>(inputs.norm_adjacency, inputs.n_users, inputs.n_items,
                                                   cfg.model.dim, cfg.model.ui_layers, lambda, seed);
        case BaselineKind::itemknn:
            break;
    }
    return nullptr;
}

TrainedRun train_run(const RunConfig& cfg, const LoadedData& data, std::vector<LrTrial>* trials, bool verbose) {
    TrainedRun run;
    run.inputs = std::make_unique<ModelInputs>(make_inputs(cfg, data));
    if (cfg.baseline == BaselineKind::itemknn) {
        run.knn.emplace(data.split, cfg.knn_neighbors);
        return run;
    }
    const std::vector<double> grid = cfg.lr_grid.empty() ? std::vector<double>{cfg.train.lr} : cfg.lr_grid;
    double best = -1.0;
    for (double lr : grid) {
        TrainConfig tc = cfg.train;
        tc.lr = lr;
        if (cfg.baseline) tc = baseline_train_config(tc);
        auto model = make_model(cfg, *run.inputs);
        EpochCallback log;
        if (verbose) {
            log = [lr](const EpochRecord& r) {
                if (!r.val_recall) return;
                std::cerr << "lr " << lr << " epoch " << r.epoch << " loss " << r.loss.total << " val recall@20 "
                          << *r.val_recall << '\n';
            };
        }
        FitResult res = fit(tc, *model, data.split, log);
        if (verbose && res.diverged) std::cerr << "lr " << lr << ": " << res.message << '\n';
        if (trials) trials->push_back({lr, res.best_val_recall, res.best_epoch, res.diverged});
        // ties keep the earlier (smaller) learning rate
        if (res.best_val_recall > best || !run.model) {
            best = res.best_val_recall;
            run.model = std::move(model);
            run.fit = std::move(res);
            run.lr = lr;
        }
    }
    return run;
}

MetricsReport test_report(const RunConfig& cfg, const LoadedData& data, TrainedRun& run) {
    auto rep = evaluate_model(run.scorer(), data.split, Phase::test, cfg.train.eval_k);
    rep.model = model_label(cfg);
    rep.dataset = cfg.dataset_label();
    rep.seed = cfg.train.seed;
    return rep;
}

MetricsReport train_and_save(const RunConfig& cfg, bool verbose) {
    cfg.validate();
    const LoadedData data = load_data(cfg);
    std::vector<LrTrial> trials;
    TrainedRun run = train_run(cfg, data, &trials, verbose);

    const fs::path dir = cfg.run_dir();
    fs::create_directories(dir);
    save_config(dir / "config.resolved.json", cfg);
    const fs::path ckpt = dir / "checkpoint.sgck";
    if (run.model) {
        save_checkpoint(ckpt, run.model->parameters());
        restore_checkpoint(ckpt, run.model->parameters());
    } else {
        save_checkpoint(ckpt, {});
    }
    write_history_jsonl(dir / "history.jsonl", run.fit.history);
    if (trials.size() > 1) {
        std::ofstream out(dir / "lr_search.csv");
        out << "lr,best_val_recall,best_epoch,diverged\n" << std::setprecision(17);
        for (const auto& t : trials) out << t.lr << ',' << t.best_val_recall << ',' << t.best_epoch << ',' << t.diverged << '\n';
    }
    auto rep = test_report(cfg, data, run);
    write_report_json(dir / "report.json", rep);
    write_per_user_csv(dir / "per_user.csv", rep);
    if (verbose && run.model) {
        std::cerr << "selected lr " << run.lr << ", best epoch " << run.fit.best_epoch << " (val recall@20 "
                  << run.fit.best_val_recall << ")\n";
        if (run.fit.diverged) std::cerr << "warning: " << run.fit.message << '\n';
    }
    return rep;
}

MetricsReport evaluate_run(const fs::path& run_dir, const std::optional<fs::path>& checkpoint, Phase phase) {
    const fs::path cfg_path = run_dir / "config.resolved.json";
    if (!fs::exists(cfg_path)) throw Error(run_dir.string() + " has no config.resolved.json");
    const RunConfig cfg = load_config(cfg_path);
    const LoadedData data = load_data(cfg);
    TrainedRun run;
    run.inputs = std::make_unique<ModelInputs>(make_inputs(cfg, data));
    if (cfg.baseline == BaselineKind::itemknn) {
        run.knn.emplace(data.split, cfg.knn_neighbors);
    } else {
        run.model = make_model(cfg, *run.inputs);
        restore_checkpoint(checkpoint.value_or(run_dir / "checkpoint.sgck"), run.model->parameters());
    }
    auto rep = evaluate_model(run.scorer(), data.split, phase, cfg.train.eval_k);
    rep.model = model_label(cfg);
    rep.dataset = cfg.dataset_label();
    rep.seed = cfg.train.seed;
    return rep;
}

void print_table(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::size_t w = 7;
    for (const auto& [name, _] : rows) w = std::max(w, name.size());
    const Index k = rows.empty() ? 20 : rows.front().second.k;
    std::ostringstream rh, nh;
    rh << "Recall@" << k;
    nh << "NDCG@" << k;
    out << std::left << std::setw(static_cast<int>(w)) << "variant" << "  " << std::right << std::setw(10) << rh.str()
        << "  " << std::setw(10) << nh.str() << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& [name, rep] : rows) {
        out << std::left << std::setw(static_cast<int>(w)) << name << "  " << std::right << std::setw(10) << rep.recall
            << "  " << std::setw(10) << rep.ndcg << '\n';
    }
    out.unsetf(std::ios::fixed);
}

void write_metric_csv(const fs::path& path, const std::string& label,
                      const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << label << ",recall,ndcg\n" << std::setprecision(17);
    for (const auto& [name, rep] : rows) out << name << ',' << rep.recall << ',' << rep.ndcg << '\n';
}

}  // namespace synergraph::cli

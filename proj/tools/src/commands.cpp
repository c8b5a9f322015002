#include "commands.hpp"

#include "pipeline.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>

namespace synergraph::cli {

namespace fs = std::filesystem;

namespace {

// Flag values layered over the config file; unset flags leave it alone.
struct Overrides {
    std::string config;
    std::string dataset;
    std::string out;
    std::string name;
    std::optional<std::uint64_t> seed;
    std::optional<Index> top_k;
    std::string ablation;
    std::string modalities;
    std::string lr_grid;
    std::optional<double> lr;
    std::optional<int> epochs;
    std::optional<Index> batch_size;
    std::optional<int> eval_every;
    std::optional<int> patience;
    std::optional<Index> dim;
    bool no_cache = false;
    bool quiet = false;
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "JSON run config (flags override it)");
    app->add_option("--dataset", o.dataset, "baby|sports|clothing|synthetic or a dataset directory");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--name", o.name, "run name (default derived from the settings)");
    app->add_option("--seed", o.seed, "split, sampling and initialization seed");
    app->add_option("--top-k", o.top_k, "neighbors kept per item in the modality graphs");
    app->add_option("--ablation", o.ablation, "none|no-mp|no-iiv|no-circle");
    app->add_option("--modalities", o.modalities, "comma list of v,t");
    app->add_option("--lr-grid", o.lr_grid, "comma list of learning rates to try");
    app->add_option("--lr", o.lr, "single learning rate");
    app->add_option("--epochs", o.epochs, "maximum epochs");
    app->add_option("--batch-size", o.batch_size, "training batch size");
    app->add_option("--eval-every", o.eval_every, "epochs between validation passes");
    app->add_option("--patience", o.patience, "validation passes without improvement before stopping");
    app->add_option("--dim", o.dim, "embedding size");
    app->add_flag("--no-graph-cache", o.no_cache, "always rebuild modality graphs");
    app->add_flag("-q,--quiet", o.quiet, "no progress output");
}

RunConfig resolve(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (!o.dataset.empty()) {
        c.dataset = o.dataset;
        c.dataset_dir.clear();
    }
    if (!o.out.empty()) c.output_dir = o.out;
    if (!o.name.empty()) c.run_name = o.name;
    if (o.seed) c.train.seed = *o.seed;
    if (o.top_k) c.top_k = *o.top_k;
    if (!o.ablation.empty()) c.ablation = parse_ablation(o.ablation);
    if (!o.modalities.empty()) c.model.modalities = parse_modalities(o.modalities);
    if (!o.lr_grid.empty()) c.lr_grid = parse_double_list(o.lr_grid);
    if (o.lr) {
        c.train.lr = *o.lr;
        if (o.lr_grid.empty()) c.lr_grid.clear();
    }
    if (o.epochs) c.train.epochs = *o.epochs;
    if (o.batch_size) c.train.batch_size = *o.batch_size;
    if (o.eval_every) c.train.eval_every = *o.eval_every;
    if (o.patience) c.train.early_stop_patience = *o.patience;
    if (o.dim) c.model.dim = *o.dim;
    if (o.no_cache) c.graph_cache = false;
    c.validate();
    return c;
}

void print_report(std::ostream& out, const MetricsReport& r) {
    out << std::fixed << std::setprecision(4) << r.model << " on " << r.dataset << " (" << r.split << ", "
        << r.n_users() << " users): Recall@" << r.k << " " << r.recall << "  NDCG@" << r.k << " " << r.ndcg << '\n';
    out.unsetf(std::ios::fixed);
}

// Runs each variant as its own training run named <base>-<label>.
std::vector<std::pair<std::string, MetricsReport>> run_variants(
    const RunConfig& base, const std::vector<std::pair<std::string, RunConfig>>& variants, bool verbose,
    std::ostream& err) {
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& [label, cfg] : variants) {
        RunConfig c = cfg;
        c.run_name = (base.run_name.empty() ? base.dataset_label() : base.run_name) + "-" + label + "-s" +
                     std::to_string(c.train.seed);
        if (verbose) err << "== " << label << " -> " << c.run_dir().string() << '\n';
        rows.emplace_back(label, train_and_save(c, verbose));
    }
    return rows;
}

fs::path csv_path(const RunConfig& c, const std::string& csv, const std::string& stem) {
    if (!csv.empty()) return csv;
    return c.output_dir / ((c.run_name.empty() ? c.dataset_label() : c.run_name) + "-" + stem + ".csv");
}

std::vector<double> column(const MetricsReport& r, const std::string& metric) {
    return metric == "ndcg" ? r.user_ndcg : r.user_recall;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multimodal graph recommender: training, evaluation and experiment driver"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Overrides ov;
    std::string run_a, run_b, checkpoint, split = "test", metric = "recall", csv, synth_out, values, prep_dir, prep_out;
    int n_boot = 10000;
    std::uint64_t boot_seed = 1;
    double eps = 1e-4;
    Index knn_neighbors = 20;
    std::string baseline_model;

    auto* train = app.add_subcommand("train", "train one model and write its run directory");
    add_common(train, ov);

    auto* evaluate = app.add_subcommand("evaluate", "score a saved run on the validation or test split");
    evaluate->add_option("run", run_a, "run directory")->required();
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file (default RUN/checkpoint.sgck)");
    evaluate->add_option("--split", split, "val|test")->check(CLI::IsMember({"val", "test"}));
    evaluate->add_option("--report", csv, "also write the report JSON here");

    auto* ablate = app.add_subcommand("ablate", "full model and the three module ablations");
    add_common(ablate, ov);
    ablate->add_option("--csv", csv, "summary CSV path");

    auto* mod_ablate = app.add_subcommand("modality-ablate", "visual-only, textual-only and both");
    add_common(mod_ablate, ov);
    mod_ablate->add_option("--csv", csv, "summary CSV path");

    auto* sweep = app.add_subcommand("sweep-topk", "retrain per item-graph neighbor count");
    add_common(sweep, ov);
    sweep->add_option("--values", values, "comma list of neighbor counts")->required();
    sweep->add_option("--csv", csv, "CSV path (top_k,recall,ndcg)");

    auto* baseline = app.add_subcommand("baseline", "train a reference model");
    add_common(baseline, ov);
    baseline->add_option("--model", baseline_model, "itemknn|bprmf|lightgcn")->required();
    baseline->add_option("--neighbors", knn_neighbors, "ItemKNN neighbors per item");

    auto* compare = app.add_subcommand("compare", "paired bootstrap test between two runs");
    compare->add_option("run_a", run_a, "first run directory")->required();
    compare->add_option("run_b", run_b, "second run directory")->required();
    compare->add_option("--metric", metric, "recall|ndcg")->check(CLI::IsMember({"recall", "ndcg"}));
    compare->add_option("--n-boot", n_boot, "bootstrap resamples")->check(CLI::PositiveNumber);
    compare->add_option("--seed", boot_seed, "bootstrap seed");

    auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients on a tiny fixture");
    gradcheck->add_option("--eps", eps, "central-difference step");

    SynthConfig gen;
    auto* synth_cmd = app.add_subcommand("synth", "write a clustered synthetic dataset directory");
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--users", gen.n_users, "users")->default_val(gen.n_users);
    synth_cmd->add_option("--items", gen.n_items, "items")->default_val(gen.n_items);
    synth_cmd->add_option("--edges-per-user", gen.edges_per_user, "interactions per user")->default_val(gen.edges_per_user);
    synth_cmd->add_option("--visual-dim", gen.visual_dim, "visual feature size")->default_val(gen.visual_dim);
    synth_cmd->add_option("--textual-dim", gen.textual_dim, "textual feature size")->default_val(gen.textual_dim);
    synth_cmd->add_option("--seed", gen.seed, "generator seed")->default_val(gen.seed);

    auto* prepare = app.add_subcommand("prepare", "write id vocabularies and stats for an interactions file");
    prepare->add_option("dataset", prep_dir, "dataset directory holding interactions.tsv")->required();
    prepare->add_option("--out", prep_out, "where to write (default: the dataset directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return 2;
    }

    try {
        if (*train) {
            const RunConfig c = resolve(ov);
            const auto rep = train_and_save(c, !ov.quiet);
            print_report(out, rep);
            out << "artifacts in " << c.run_dir().string() << '\n';
        } else if (*evaluate) {
            const Phase phase = split == "val" ? Phase::val : Phase::test;
            const auto rep = evaluate_run(run_a, checkpoint.empty() ? std::nullopt : std::optional<fs::path>(checkpoint), phase);
            print_report(out, rep);
            if (!csv.empty()) write_report_json(csv, rep);
        } else if (*ablate) {
            const RunConfig c = resolve(ov);
            std::vector<std::pair<std::string, RunConfig>> variants;
            for (Ablation a : {Ablation::no_mp, Ablation::no_iiv, Ablation::no_circle, Ablation::none}) {
                RunConfig v = c;
                v.ablation = a;
                variants.emplace_back(a == Ablation::none ? "full" : to_string(a), v);
            }
            const auto rows = run_variants(c, variants, !ov.quiet, err);
            print_table(out, rows);
            const fs::path p = csv_path(c, csv, "ablation");
            write_metric_csv(p, "variant", rows);
            out << "wrote " << p.string() << '\n';
        } else if (*mod_ablate) {
            const RunConfig c = resolve(ov);
            std::vector<std::pair<std::string, RunConfig>> variants;
            for (const auto& [label, mods] : std::vector<std::pair<std::string, std::vector<Modality>>>{
                     {"visual", {Modality::visual}}, {"textual", {Modality::textual}},
                     {"both", {Modality::visual, Modality::textual}}}) {
                RunConfig v = c;
                v.model.modalities = mods;
                variants.emplace_back(label, v);
            }
            const auto rows = run_variants(c, variants, !ov.quiet, err);
            print_table(out, rows);
            const fs::path p = csv_path(c, csv, "modality");
            write_metric_csv(p, "modalities", rows);
            out << "wrote " << p.string() << '\n';
        } else if (*sweep) {
            const RunConfig c = resolve(ov);
            std::vector<std::pair<std::string, RunConfig>> variants;
            for (Index k : parse_index_list(values)) {
                if (k < 1) throw UsageError("--values entries must be >= 1");
                RunConfig v = c;
                v.top_k = k;
                variants.emplace_back("k" + std::to_string(k), v);
            }
            auto rows = run_variants(c, variants, !ov.quiet, err);
            print_table(out, rows);
            for (auto& [label, _] : rows) label.erase(0, 1);  // bare K in the CSV
            const fs::path p = csv_path(c, csv, "topk");
            write_metric_csv(p, "top_k", rows);
            out << "wrote " << p.string() << '\n';
        } else if (*baseline) {
            RunConfig c = resolve(ov);
            c.baseline = parse_baseline(baseline_model);
            if (!c.baseline) throw UsageError("unknown baseline '" + baseline_model + "' (itemknn|bprmf|lightgcn)");
            c.knn_neighbors = knn_neighbors;
            c.validate();
            const auto rep = train_and_save(c, !ov.quiet);
            print_report(out, rep);
            out << "artifacts in " << c.run_dir().string() << '\n';
        } else if (*compare) {
            const auto a = read_per_user_csv(fs::path(run_a) / "per_user.csv");
            const auto b = read_per_user_csv(fs::path(run_b) / "per_user.csv");
            if (a.users != b.users) throw Error("runs were evaluated on different user sets");
            const auto xa = column(a, metric), xb = column(b, metric);
            double ma = 0, mb = 0;
            for (std::size_t i = 0; i < xa.size(); ++i) {
                ma += xa[i];
                mb += xb[i];
            }
            ma /= static_cast<double>(xa.size());
            mb /= static_cast<double>(xb.size());
            const double p = compare_significance(xa, xb, n_boot, boot_seed);
            out << std::setprecision(6) << metric << " A " << ma << "  B " << mb << "  diff " << ma - mb
                << "  p " << p << "  (" << xa.size() << " users, " << n_boot << " resamples)\n";
        } else if (*gradcheck) {
            if (!(eps > 0)) throw UsageError("--eps must be positive");
            auto fx = make_grad_check_fixture();
            SynerGraphModel model(fx.model, fx.inputs, fx.loss, 11);
            randomize_parameters(model, fx.param_seed, fx.param_stddev);
            const auto rep = grad_check(model, fx.batch, eps);
            out << std::scientific << std::setprecision(3);
            for (const auto& [name, e] : rep.per_tensor) out << std::left << std::setw(22) << name << e << '\n';
            out << "max relative error " << rep.max_rel_error << '\n';
            out.unsetf(std::ios::scientific);
            return rep.max_rel_error < 1e-3 ? 0 : 1;
        } else if (*synth_cmd) {
            auto data = synth_dataset(gen);
            fs::create_directories(synth_out);
            const fs::path dir = synth_out;
            write_interactions(dir / "interactions.tsv", data.dataset);
            write_vocabulary(dir / "item_vocab.tsv", data.dataset.items);
            write_vocabulary(dir / "user_vocab.tsv", data.dataset.users);
            save_feature_matrix(dir / "visual.sgfm", data.visual);
            save_feature_matrix(dir / "textual.sgfm", data.textual);
            out << "wrote " << data.dataset.edges.size() << " interactions (" << data.dataset.n_users << " users, "
                << data.dataset.n_items << " items) to " << dir.string() << '\n';
        } else if (*prepare) {
            const fs::path dir = prep_dir;
            const fs::path dest = prep_out.empty() ? dir : fs::path(prep_out);
            const auto ds = encode_ids(load_interactions(dir / "interactions.tsv"));
            fs::create_directories(dest);
            write_vocabulary(dest / "item_vocab.tsv", ds.items);
            write_vocabulary(dest / "user_vocab.tsv", ds.users);
            const nlohmann::json stats{{"n_users", ds.n_users},
                                       {"n_items", ds.n_items},
                                       {"n_interactions", ds.edges.size()},
                                       {"sparsity", ds.sparsity()}};
            std::ofstream(dest / "stats.json") << stats.dump(2) << '\n';
            out << ds.n_users << " users, " << ds.n_items << " items, " << ds.edges.size() << " interactions, sparsity "
                << std::setprecision(3) << std::fixed << 100.0 * ds.sparsity() << "%\n";
            out.unsetf(std::ios::fixed);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace synergraph::cli

// One line per acceptance criterion: PASS, FAIL or SKIP with the measured
// numbers. Exits 1 only if something FAILs.
//
// Criteria 6-10 need the exported Amazon datasets under $SYNERGRAPH_DATA
// (default ./data) and several CPU hours; they run only with
// SYNERGRAPH_ACCEPT_FULL=1 and otherwise report SKIP.

#include "oracles.hpp"
#include "pipeline.hpp"

#include "synergraph/baselines.hpp"
#include "synergraph/losses.hpp"
#include "synergraph/modality_graph.hpp"
#include "synergraph/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

using namespace synergraph;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Verdict {
    Outcome outcome;
    std::string detail;
};

Verdict verdict(bool ok, const std::string& detail) { return {ok ? Outcome::pass : Outcome::fail, detail}; }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Matrix gaussian(std::mt19937_64& rng, Index r, Index c) {
    std::normal_distribution<double> g(0, 1);
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

Matrix row(std::initializer_list<double> v) {
    Matrix m(1, static_cast<Index>(v.size()));
    Index c = 0;
    for (double x : v) m(0, c++) = x;
    return m;
}

SplitDataset dense_split(const Matrix& r) {
    InteractionDataset ds;
    ds.n_users = r.rows();
    ds.n_items = r.cols();
    for (Index u = 0; u < r.rows(); ++u) ds.users.intern("u" + std::to_string(u));
    for (Index i = 0; i < r.cols(); ++i) ds.items.intern("i" + std::to_string(i));
    for (Index u = 0; u < r.rows(); ++u) {
        for (Index i = 0; i < r.cols(); ++i) {
            if (r(u, i) != 0.0) ds.edges.push_back({static_cast<std::int32_t>(u), static_cast<std::int32_t>(i)});
        }
    }
    const std::size_t n = ds.edges.size();
    return SplitDataset(std::move(ds), std::vector<SplitLabel>(n, SplitLabel::train));
}

// ---------------------------------------------------------------------------

Verdict gradient_fidelity() {
    const auto start = std::chrono::steady_clock::now();
    auto fx = make_grad_check_fixture();
    SynerGraphModel model(fx.model, fx.inputs, fx.loss, 11);
    randomize_parameters(model, fx.param_seed, fx.param_stddev);
    const auto rep = grad_check(model, fx.batch, 1e-4);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool all = rep.per_tensor.size() == model.parameters().size();
    for (const auto& [name, e] : rep.per_tensor) all = all && e < 1e-3;
    std::ostringstream d;
    d << rep.per_tensor.size() << " tensors, max rel err " << fmt("%.2e", rep.max_rel_error) << ", "
      << fmt("%.2f", secs) << " s";
    return verdict(all && rep.max_rel_error < 1e-3 && secs < 60, d.str());
}

Verdict loss_oracles() {
    std::mt19937_64 rng(2025);
    CircleParams p;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index b = std::uniform_int_distribution<Index>(1, 32)(rng);
        const Index d = std::uniform_int_distribution<Index>(1, 16)(rng);
        const Matrix u = gaussian(rng, b, d), pos = gaussian(rng, b, d), neg = gaussian(rng, b, d);
        const double lambda = std::uniform_real_distribution<double>(0, 1e-2)(rng);
        worst = std::max(worst, oracle::rel_err(bpr_loss(u, pos, neg), oracle::bpr(u, pos, neg)));
        worst = std::max(worst, oracle::rel_err(emb_reg(u, pos, neg, lambda), oracle::reg(u, pos, neg, lambda)));
        for (Modality m : {Modality::textual, Modality::visual}) {
            const double got = circle_loss(u, pos, neg, p, m);
            const double want = oracle::circle(u, pos, neg, p.margin, p.scale, p.confidence(m));
            // both sides below 1e-200 count as agreeing on an underflowed zero
            if (!(want < 1e-200 && got < 1e-200)) worst = std::max(worst, oracle::rel_err(got, want));
        }
    }
    const double zero = circle_loss(row({1, 0}), row({2, 0}), row({0, 3}), p, Modality::textual);
    CircleParams p0;
    p0.conf_textual = 0.0;
    const double big = circle_loss(row({1, 0}), row({0, 1}), row({2, 0}), p0, Modality::textual);
    const bool hand = zero < 1e-300 && oracle::rel_err(big, 875.0) < 1e-6;
    std::ostringstream d;
    d << "100 batches, worst rel err " << fmt("%.2e", worst) << "; hand cases " << fmt("%.3g", zero) << " and "
      << fmt("%.9g", big);
    return verdict(worst < 1e-5 && hand, d.str());
}

Verdict graph_invariants() {
    std::mt19937_64 rng(2024);
    double adj_err = 0, deg_err = 0, cos_err = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Index nu = std::uniform_int_distribution<Index>(1, 19)(rng);
        const Index ni = std::uniform_int_distribution<Index>(1, 20 - nu)(rng);
        std::bernoulli_distribution edge(0.35);
        Matrix r = Matrix::Zero(nu, ni);
        for (Index i = 0; i < r.size(); ++i) r.data()[i] = edge(rng) ? 1.0 : 0.0;
        const auto l = build_norm_adjacency(build_interaction_matrix(dense_split(r)));
        adj_err = std::max(adj_err, oracle::max_abs_diff(l.to_dense(), oracle::norm_adjacency(r)));
        std::vector<double> deg(static_cast<std::size_t>(nu + ni), 0.0);
        for (Index u = 0; u < nu; ++u) {
            for (Index i = 0; i < ni; ++i) {
                deg[static_cast<std::size_t>(u)] += r(u, i);
                deg[static_cast<std::size_t>(nu + i)] += r(u, i);
            }
        }
        for (Index x = 0; x < l.rows(); ++x) {
            double lhs = 0;
            for (Index k = l.row_begin(x); k < l.row_end(x); ++k) {
                lhs += l.values()[static_cast<std::size_t>(k)] *
                       std::sqrt(deg[static_cast<std::size_t>(l.col_indices()[static_cast<std::size_t>(k)])]);
            }
            deg_err = std::max(deg_err, std::abs(lhs - std::sqrt(deg[static_cast<std::size_t>(x)])));
        }
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = std::uniform_int_distribution<Index>(2, 50)(rng);
        const Index d = std::uniform_int_distribution<Index>(1, 12)(rng);
        FeatureMatrix f{Modality::textual, gaussian(rng, n, d)};
        for (Index k : {Index{1}, std::max<Index>(1, n / 3), n - 1}) {
            cos_err = std::max(cos_err, oracle::max_abs_diff(cosine_topk(f, k).to_dense(), oracle::cosine_topk(f.data, k)));
        }
    }
    std::ostringstream d;
    d << "adjacency " << fmt("%.1e", adj_err) << ", degree identity " << fmt("%.1e", deg_err) << ", cosine top-K "
      << fmt("%.1e", cos_err);
    return verdict(adj_err < 1e-9 && deg_err < 1e-9 && cos_err < 1e-6, d.str());
}

Verdict overfit_sanity() {
    const SynthConfig sc;  // 50 users, 40 items
    const auto data = synth_dataset(sc);
    const auto split = user_split(data.dataset, {}, sc.seed);
    const auto inputs = build_model_inputs(
        split, {std::make_shared<FeatureMatrix>(data.visual), std::make_shared<FeatureMatrix>(data.textual)}, 5);
    SynerGraphModel model(ModelConfig{}, inputs, {}, 1);
    TrainConfig tc;
    tc.epochs = 50;
    tc.batch_size = 64;
    tc.lr = 0.05;
    tc.eval_every = 50;
    const auto res = fit(tc, model, split);
    double best_bpr = INFINITY;
    for (const auto& r : res.history) best_bpr = std::min(best_bpr, r.loss.bpr);
    const double auc = train_auc(model.scorer(), split);

    const auto adj = build_norm_adjacency(build_interaction_matrix(split));
    TrainConfig bc;
    bc.epochs = 15;
    bc.batch_size = 32;
    bc.lr = 0.01;
    bc.eval_every = 5;
    bc = baseline_train_config(bc);
    BprMfModel mf(split.n_users(), split.n_items(), 16, bc.loss.reg_lambda, 9);
    LightGcnModel gcn(adj, split.n_users(), split.n_items(), 16, 0, bc.loss.reg_lambda, 9);
    const auto hm = fit(bc, mf, split).history;
    const auto hg = fit(bc, gcn, split).history;
    bool same = hm.size() == hg.size();
    for (std::size_t k = 0; same && k < hm.size(); ++k) same = history_line(hm[k]) == history_line(hg[k]);
    const auto pm = mf.parameters(), pg = gcn.parameters();
    for (std::size_t k = 0; same && k < pm.size(); ++k) same = *pm[k].value == *pg[k].value;

    std::ostringstream d;
    d << "min train BPR " << fmt("%.4f", best_bpr) << " (ln 2 = 0.6931), train AUC " << fmt("%.4f", auc)
      << ", LightGCN-0 vs BPR-MF trajectory " << (same ? "identical" : "differs");
    return verdict(!res.diverged && best_bpr < std::log(2.0) && auc > 0.95 && same, d.str());
}

// Scores supplied verbatim.
class DenseScores final : public ScoreProvider {
public:
    explicit DenseScores(Matrix s) : s_(std::move(s)) {}
    Index n_users() const override { return s_.rows(); }
    Index n_items() const override { return s_.cols(); }
    void scores(std::span<const Index> users, Matrix& out) const override {
        out.resize(static_cast<Index>(users.size()), s_.cols());
        for (std::size_t r = 0; r < users.size(); ++r) out.row(static_cast<Index>(r)) = s_.row(users[r]);
    }

private:
    Matrix s_;
};

Verdict metric_oracles() {
    std::mt19937_64 rng(31);
    double worst = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const Index nu = std::uniform_int_distribution<Index>(1, 15)(rng);
        const Index ni = std::uniform_int_distribution<Index>(25, 60)(rng);
        const Index k = std::uniform_int_distribution<Index>(1, 25)(rng);
        std::uniform_int_distribution<int> coarse(0, 6);
        Matrix s(nu, ni);
        for (Index i = 0; i < s.size(); ++i) s.data()[i] = coarse(rng);
        ItemSets excl(static_cast<std::size_t>(nu)), truth(static_cast<std::size_t>(nu));
        std::bernoulli_distribution pick_ex(0.15), pick_gt(0.1);
        for (Index u = 0; u < nu; ++u) {
            for (int i = 0; i < ni; ++i) {
                if (pick_ex(rng)) {
                    excl[static_cast<std::size_t>(u)].push_back(i);
                } else if (pick_gt(rng)) {
                    truth[static_cast<std::size_t>(u)].push_back(i);
                }
            }
        }
        const auto res = topk_rank(DenseScores(s), excl, k);
        double rsum = 0, nsum = 0;
        int counted = 0;
        for (Index u = 0; u < nu; ++u) {
            const auto& t = truth[static_cast<std::size_t>(u)];
            if (t.empty()) continue;
            const auto& e = excl[static_cast<std::size_t>(u)];
            const auto m = oracle::user_metric(std::vector<double>(s.row(u).data(), s.row(u).data() + ni),
                                               std::vector<int>(e.begin(), e.end()), std::vector<int>(t.begin(), t.end()), k);
            rsum += m.recall;
            nsum += m.ndcg;
            ++counted;
        }
        if (counted == 0) continue;
        worst = std::max(worst, std::abs(recall_at_k(res, truth, k) - rsum / counted));
        worst = std::max(worst, std::abs(ndcg_at_k(res, truth, k) - nsum / counted));
    }

    // Baby-sized universe: 19,445 users x 7,050 items, ~8 interactions each.
    const SynthConfig sc{19445, 7050, 8, 2, 2, 17};
    const auto data = synth_dataset(sc);
    const auto split = user_split(data.dataset, {}, sc.seed);
    double mean = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        mean += evaluate_model(RandomScorer(split.n_users(), split.n_items(), seed), split, Phase::test).recall / 5.0;
    }
    const double expect = 20.0 / static_cast<double>(split.n_items());
    std::ostringstream d;
    d << "30 instances, worst abs err " << fmt("%.1e", worst) << "; random recall@20 " << fmt("%.5f", mean)
      << " vs 20/|I| = " << fmt("%.5f", expect);
    return verdict(worst < 1e-9 && mean > 0.5 * expect && mean < 1.5 * expect, d.str());
}

// ---------------------------------------------------------------------------
// Desk-scale reproduction on exported datasets.

fs::path data_root() {
    const char* r = std::getenv("SYNERGRAPH_DATA");
    return r && *r ? fs::path(r) : fs::path("data");
}

bool has_dataset(const std::string& name) {
    const fs::path d = data_root() / name;
    return fs::exists(d / "interactions.tsv") && fs::exists(d / "visual.sgfm") && fs::exists(d / "textual.sgfm");
}

bool full_runs_enabled() {
    const char* f = std::getenv("SYNERGRAPH_ACCEPT_FULL");
    return f && std::string(f) == "1";
}

// Null when the criterion can run; otherwise the SKIP reason.
std::optional<Verdict> blocked(const std::vector<std::string>& datasets) {
    for (const auto& d : datasets) {
        if (!has_dataset(d)) {
            return Verdict{Outcome::skip, "needs exported " + d + " data in " + (data_root() / d).string()};
        }
    }
    if (!full_runs_enabled()) return Verdict{Outcome::skip, "data present; set SYNERGRAPH_ACCEPT_FULL=1 (CPU hours)"};
    return std::nullopt;
}

cli::RunConfig reference_config(const std::string& dataset) {
    cli::RunConfig c;
    c.dataset = dataset;
    c.output_dir = "acceptance_runs";
    c.lr_grid = {0.0001, 0.0005, 0.001, 0.005};
    return c;
}

MetricsReport run_named(cli::RunConfig c, const std::string& name) {
    c.run_name = name;
    return cli::train_and_save(c, false);
}

Verdict baby_full() {
    if (auto b = blocked({"baby"})) return *b;
    const auto r = run_named(reference_config("baby"), "baby-full");
    std::ostringstream d;
    d << "test Recall@20 " << fmt("%.4f", r.recall) << " (>= 0.080), NDCG@20 " << fmt("%.4f", r.ndcg) << " (>= 0.034)";
    return verdict(r.recall >= 0.080 && r.ndcg >= 0.034, d.str());
}

Verdict baseline_anchors() {
    if (auto b = blocked({"baby"})) return *b;
    auto c = reference_config("baby");
    c.baseline = BaselineKind::bprmf;
    const double mf = run_named(c, "baby-bprmf").recall;
    c.baseline = BaselineKind::lightgcn;
    const double gcn = run_named(c, "baby-lightgcn").recall;
    std::ostringstream d;
    d << "BPR-MF " << fmt("%.4f", mf) << " (0.0430 +-20%), LightGCN " << fmt("%.4f", gcn) << " (0.0729 +-15%)";
    return verdict(std::abs(mf - 0.0430) <= 0.2 * 0.0430 && std::abs(gcn - 0.0729) <= 0.15 * 0.0729, d.str());
}

Verdict ablation_ordering() {
    if (auto b = blocked({"sports"})) return *b;
    std::vector<double> r;
    std::ostringstream d;
    for (auto a : {cli::Ablation::no_mp, cli::Ablation::no_iiv, cli::Ablation::no_circle, cli::Ablation::none}) {
        auto c = reference_config("sports");
        c.ablation = a;
        r.push_back(run_named(c, std::string("sports-") + cli::to_string(a)).recall);
        d << (a == cli::Ablation::none ? "full" : cli::to_string(a)) << ' ' << fmt("%.4f", r.back()) << ' ';
    }
    const bool ordered = r[0] < r[1] && r[1] < r[2] && r[2] < r[3];
    return verdict(ordered && r[0] < 0.6 * r[3], d.str());
}

Verdict modality_ordering() {
    std::vector<std::string> present;
    for (const char* d : {"baby", "sports", "clothing"}) {
        if (has_dataset(d)) present.push_back(d);
    }
    if (present.empty()) return {Outcome::skip, "needs at least one exported dataset under " + data_root().string()};
    if (auto b = blocked(present)) return *b;
    bool ok = true;
    std::ostringstream d;
    for (const auto& ds : present) {
        std::vector<double> r;
        for (auto mods : std::vector<std::vector<Modality>>{{Modality::visual}, {Modality::textual},
                                                            {Modality::visual, Modality::textual}}) {
            auto c = reference_config(ds);
            c.model.modalities = mods;
            r.push_back(run_named(c, ds + "-mod" + std::to_string(mods.size()) + to_string(mods[0])).recall);
        }
        d << ds << " v/t/both " << fmt("%.4f", r[0]) << '/' << fmt("%.4f", r[1]) << '/' << fmt("%.4f", r[2]) << ' ';
        ok = ok && r[2] > r[1] && r[1] > r[0];
    }
    return verdict(ok, d.str());
}

Verdict topk_sweep() {
    if (auto b = blocked({"baby"})) return *b;
    std::vector<Index> ks{5, 10, 15, 20, 25, 30, 35, 40, 45};
    std::vector<double> r;
    std::ostringstream d;
    for (Index k : ks) {
        auto c = reference_config("baby");
        c.top_k = k;
        r.push_back(run_named(c, "baby-k" + std::to_string(k)).recall);
        d << k << ':' << fmt("%.4f", r.back()) << ' ';
    }
    const auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    // unimodal up to one wobble: at most two interior local maxima
    int peaks = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const bool left = i == 0 || r[i] > r[i - 1];
        const bool right = i + 1 == r.size() || r[i] > r[i + 1];
        if (left && right) ++peaks;
    }
    return verdict(ks[best] >= 30 && ks[best] <= 40 && peaks <= 2, d.str());
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"1 gradient fidelity", gradient_fidelity},
        {"2 loss oracles", loss_oracles},
        {"3 graph invariants", graph_invariants},
        {"4 overfit sanity", overfit_sanity},
        {"5 metric oracles", metric_oracles},
        {"6 baby full pipeline", baby_full},
        {"7 baseline anchors", baseline_anchors},
        {"8 ablation ordering", ablation_ordering},
        {"9 modality ordering", modality_ordering},
        {"10 top-K sweep", topk_sweep},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {Outcome::fail, std::string("error: ") + e.what()};
        }
        const char* tag = v.outcome == Outcome::pass ? "PASS" : v.outcome == Outcome::fail ? "FAIL" : "SKIP";
        if (v.outcome == Outcome::fail) ++failed;
        std::cout << '[' << tag << "] " << name << ": " << v.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}

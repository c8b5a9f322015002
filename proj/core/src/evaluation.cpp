#include "synergraph/evaluation.hpp"

#include "synergraph/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace synergraph {

EmbeddingScorer::EmbeddingScorer(Matrix users, Matrix items) : users_(std::move(users)), items_(std::move(items)) {
    if (users_.cols() != items_.cols()) throw ShapeError("EmbeddingScorer: embedding widths differ");
}

void EmbeddingScorer::scores(std::span<const Index> users, Matrix& out) const {
    Matrix block(static_cast<Index>(users.size()), users_.cols());
    for (std::size_t r = 0; r < users.size(); ++r) block.row(static_cast<Index>(r)) = users_.row(users[r]);
    out.noalias() = block * items_.transpose();
}

void RandomScorer::scores(std::span<const Index> users, Matrix& out) const {
    out.resize(static_cast<Index>(users.size()), n_items_);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::size_t r = 0; r < users.size(); ++r) {
        std::mt19937_64 rng(seed_ * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(users[r]));
        for (Index i = 0; i < n_items_; ++i) out(static_cast<Index>(r), i) = dist(rng);
    }
}

namespace {

constexpr Index kUserBlock = 1024;

std::vector<std::int32_t> rank_row(const Eigen::Ref<const RowVector>& row, std::span<const std::int32_t> excluded,
                                   Index k) {
    std::vector<std::int32_t> cand;
    cand.reserve(static_cast<std::size_t>(row.size()));
    std::size_t e = 0;
    for (Index i = 0; i < row.size(); ++i) {
        while (e < excluded.size() && excluded[e] < i) ++e;
        if (e < excluded.size() && excluded[e] == i) continue;
        cand.push_back(static_cast<std::int32_t>(i));
    }
    const auto take = static_cast<std::size_t>(std::min<Index>(k, static_cast<Index>(cand.size())));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&row](std::int32_t a, std::int32_t b) {
                          const double sa = row(a);
                          const double sb = row(b);
                          return sa != sb ? sa > sb : a < b;
                      });
    cand.resize(take);
    return cand;
}

std::span<const std::int32_t> set_of(const ItemSets& sets, Index u) {
    if (u < 0 || static_cast<std::size_t>(u) >= sets.size()) return {};
    return sets[static_cast<std::size_t>(u)];
}

double user_recall(std::span<const std::int32_t> list, std::span<const std::int32_t> truth, Index k) {
    Index hits = 0;
    for (Index r = 0; r < std::min<Index>(k, static_cast<Index>(list.size())); ++r) {
        if (std::binary_search(truth.begin(), truth.end(), list[static_cast<std::size_t>(r)])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double user_ndcg(std::span<const std::int32_t> list, std::span<const std::int32_t> truth, Index k) {
    double dcg = 0.0;
    for (Index r = 0; r < std::min<Index>(k, static_cast<Index>(list.size())); ++r) {
        if (std::binary_search(truth.begin(), truth.end(), list[static_cast<std::size_t>(r)])) {
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
    }
    double idcg = 0.0;
    for (Index r = 0; r < std::min<Index>(k, static_cast<Index>(truth.size())); ++r) {
        idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    return dcg / idcg;
}

template <typename PerUser>
double mean_over_users(const RankingResult& result, const ItemSets& truth, Index k, PerUser per_user) {
    double sum = 0.0;
    Index counted = 0;
    for (std::size_t r = 0; r < result.users.size(); ++r) {
        const auto gt = set_of(truth, result.users[r]);
        if (gt.empty()) continue;
        std::vector<std::int32_t> sorted(gt.begin(), gt.end());
        std::sort(sorted.begin(), sorted.end());
        sum += per_user(result.lists[r], sorted, k);
        ++counted;
    }
    return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

}  // namespace

RankingResult topk_rank(const ScoreProvider& scores, const ItemSets& exclusions, Index k, std::span<const Index> users) {
    if (k < 1) throw Error("topk_rank: K must be >= 1");
    RankingResult result;
    result.k = k;
    if (users.empty()) {
        result.users.resize(static_cast<std::size_t>(scores.n_users()));
        for (Index u = 0; u < scores.n_users(); ++u) result.users[static_cast<std::size_t>(u)] = u;
    } else {
        result.users.assign(users.begin(), users.end());
    }
    result.lists.resize(result.users.size());
    Matrix block;
    for (std::size_t start = 0; start < result.users.size(); start += kUserBlock) {
        const std::size_t len = std::min<std::size_t>(kUserBlock, result.users.size() - start);
        const std::span<const Index> chunk(result.users.data() + start, len);
        scores.scores(chunk, block);
        for (std::size_t r = 0; r < len; ++r) {
            std::vector<std::int32_t> excl(set_of(exclusions, chunk[r]).begin(), set_of(exclusions, chunk[r]).end());
            std::sort(excl.begin(), excl.end());
            result.lists[start + r] = rank_row(block.row(static_cast<Index>(r)), excl, k);
        }
    }
    return result;
}

double recall_at_k(const RankingResult& result, const ItemSets& ground_truth, Index k) {
    return mean_over_users(result, ground_truth, k, user_recall);
}

double ndcg_at_k(const RankingResult& result, const ItemSets& ground_truth, Index k) {
    return mean_over_users(result, ground_truth, k, user_ndcg);
}

MetricsReport evaluate_model(const ScoreProvider& scores, const SplitDataset& split, Phase phase, Index k) {
    if (scores.n_users() != split.n_users() || scores.n_items() != split.n_items()) {
        throw ShapeError("evaluate_model: scorer shape does not match the dataset");
    }
    const SplitLabel truth_label = phase == Phase::val ? SplitLabel::val : SplitLabel::test;
    MetricsReport report;
    report.k = k;
    report.split = phase == Phase::val ? "val" : "test";
    for (Index u = 0; u < split.n_users(); ++u) {
        if (!split.items(truth_label, u).empty()) report.users.push_back(u);
    }
    report.user_recall.resize(report.users.size());
    report.user_ndcg.resize(report.users.size());

    Matrix block;
    for (std::size_t start = 0; start < report.users.size(); start += kUserBlock) {
        const std::size_t len = std::min<std::size_t>(kUserBlock, report.users.size() - start);
        const std::span<const Index> chunk(report.users.data() + start, len);
        scores.scores(chunk, block);
        (void)worker_threads();
#ifdef SYNERGRAPH_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 32)
#endif
        for (std::size_t r = 0; r < len; ++r) {
            const Index u = chunk[r];
            std::vector<std::int32_t> excl;
            const auto train = split.items(SplitLabel::train, u);
            excl.assign(train.begin(), train.end());
            if (phase == Phase::test) {
                const auto val = split.items(SplitLabel::val, u);
                excl.insert(excl.end(), val.begin(), val.end());
                std::sort(excl.begin(), excl.end());
            }
            const auto list = rank_row(block.row(static_cast<Index>(r)), excl, k);
            const auto truth = split.items(truth_label, u);
            report.user_recall[start + r] = user_recall(list, truth, k);
            report.user_ndcg[start + r] = user_ndcg(list, truth, k);
        }
    }
    double rs = 0.0, ns = 0.0;
    for (std::size_t r = 0; r < report.users.size(); ++r) {
        rs += report.user_recall[r];
        ns += report.user_ndcg[r];
    }
    if (!report.users.empty()) {
        report.recall = rs / static_cast<double>(report.users.size());
        report.ndcg = ns / static_cast<double>(report.users.size());
    }
    return report;
}

double train_auc(const ScoreProvider& scores, const SplitDataset& split) {
    std::vector<Index> users;
    for (Index u = 0; u < split.n_users(); ++u) {
        const auto n_pos = static_cast<Index>(split.items(SplitLabel::train, u).size());
        if (n_pos > 0 && n_pos < split.n_items()) users.push_back(u);
    }
    double total = 0.0;
    Matrix block;
    for (std::size_t start = 0; start < users.size(); start += kUserBlock) {
        const std::size_t len = std::min<std::size_t>(kUserBlock, users.size() - start);
        const std::span<const Index> chunk(users.data() + start, len);
        scores.scores(chunk, block);
        for (std::size_t r = 0; r < len; ++r) {
            const auto pos = split.items(SplitLabel::train, chunk[r]);
            // Rank-sum (Mann-Whitney) with average ranks for ties.
            std::vector<std::pair<double, bool>> all;
            all.reserve(static_cast<std::size_t>(split.n_items()));
            for (Index i = 0; i < split.n_items(); ++i) {
                const bool is_pos = std::binary_search(pos.begin(), pos.end(), static_cast<std::int32_t>(i));
                all.emplace_back(block(static_cast<Index>(r), i), is_pos);
            }
            std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            double pos_rank_sum = 0.0;
            for (std::size_t a = 0; a < all.size();) {
                std::size_t b = a;
                while (b < all.size() && all[b].first == all[a].first) ++b;
                const double avg_rank = 0.5 * static_cast<double>(a + 1 + b);
                for (std::size_t c = a; c < b; ++c) {
                    if (all[c].second) pos_rank_sum += avg_rank;
                }
                a = b;
            }
            const auto n_pos = static_cast<double>(pos.size());
            const double n_neg = static_cast<double>(split.n_items()) - n_pos;
            total += (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
        }
    }
    return users.empty() ? 0.0 : total / static_cast<double>(users.size());
}

double compare_significance(std::span<const double> a, std::span<const double> b, int n_boot, std::uint64_t seed) {
    if (a.size() != b.size()) throw ShapeError("compare_significance: per-user vectors differ in length");
    if (a.empty()) throw Error("compare_significance: no paired users");
    if (n_boot < 1) throw Error("compare_significance: n_boot must be positive");
    const std::size_t n = a.size();
    std::vector<double> diff(n);
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        diff[k] = a[k] - b[k];
        mean += diff[k];
    }
    mean /= static_cast<double>(n);
    // Resample the centered differences to simulate the null of zero mean.
    for (auto& d : diff) d -= mean;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const double observed = std::abs(mean);
    const double tol = 1e-12 * std::max(1.0, observed);
    int extreme = 0;
    for (int b_i = 0; b_i < n_boot; ++b_i) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += diff[pick(rng)];
        if (std::abs(s / static_cast<double>(n)) >= observed - tol) ++extreme;
    }
    return (static_cast<double>(extreme) + 1.0) / (static_cast<double>(n_boot) + 1.0);
}

// ---------------------------------------------------------------------------
// Report files

void write_report_json(const std::filesystem::path& path, const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["model"] = report.model;
    j["dataset"] = report.dataset;
    j["seed"] = report.seed;
    j["k"] = report.k;
    j["split"] = report.split;
    j["recall"] = report.recall;
    j["ndcg"] = report.ndcg;
    j["n_users"] = report.n_users();
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

MetricsReport read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open report: " + path.string());
    const auto j = nlohmann::json::parse(in);
    MetricsReport r;
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.k = j.at("k").get<Index>();
    r.split = j.at("split").get<std::string>();
    r.recall = j.at("recall").get<double>();
    r.ndcg = j.at("ndcg").get<double>();
    return r;
}

void write_per_user_csv(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << "user_index,recall,ndcg\n";
    out.precision(17);
    for (std::size_t r = 0; r < report.users.size(); ++r) {
        out << report.users[r] << ',' << report.user_recall[r] << ',' << report.user_ndcg[r] << '\n';
    }
}

MetricsReport read_per_user_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open per-user metrics: " + path.string());
    MetricsReport r;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;
        std::istringstream fields(line);
        std::string u, rec, nd;
        if (!std::getline(fields, u, ',') || !std::getline(fields, rec, ',') || !std::getline(fields, nd, ',')) {
            throw ParseError(line_no, "expected user_index,recall,ndcg");
        }
        try {
            r.users.push_back(std::stoll(u));
            r.user_recall.push_back(std::stod(rec));
            r.user_ndcg.push_back(std::stod(nd));
        } catch (const std::exception&) {
            throw ParseError(line_no, "non-numeric field");
        }
    }
    return r;
}

}  // namespace synergraph

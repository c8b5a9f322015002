#include "oracles.hpp"
#include "synergraph/evaluation.hpp"

#include <gtest/gtest.h>

using namespace synergraph;

namespace {

// Scores supplied verbatim, one row per user.
class FixedScorer final : public ScoreProvider {
public:
    explicit FixedScorer(Matrix s) : s_(std::move(s)) {}
    Index n_users() const override { return s_.rows(); }
    Index n_items() const override { return s_.cols(); }
    void scores(std::span<const Index> users, Matrix& out) const override {
        out.resize(static_cast<Index>(users.size()), s_.cols());
        for (std::size_t r = 0; r < users.size(); ++r) out.row(static_cast<Index>(r)) = s_.row(users[r]);
    }

private:
    Matrix s_;
};

RankingResult rank_row(std::initializer_list<double> scores, std::vector<std::int32_t> excluded, Index k) {
    Matrix m(1, static_cast<Index>(scores.size()));
    Index c = 0;
    for (double s : scores) m(0, c++) = s;
    return topk_rank(FixedScorer(m), {excluded}, k);
}

}  // namespace

TEST(TopK, Examples) {
    EXPECT_EQ(rank_row({3, 1, 2}, {}, 2).lists[0], (std::vector<std::int32_t>{0, 2}));
    EXPECT_EQ(rank_row({3, 1, 2}, {0}, 2).lists[0], (std::vector<std::int32_t>{2, 1}));
    EXPECT_EQ(rank_row({1, 1, 1}, {}, 2).lists[0], (std::vector<std::int32_t>{0, 1}));
    EXPECT_EQ(rank_row({1, 5}, {1}, 20).lists[0], (std::vector<std::int32_t>{0}));
}

TEST(Metrics, Examples) {
    RankingResult r{20, {0}, {{4, 2, 9}}};
    EXPECT_DOUBLE_EQ(recall_at_k(r, {{2, 4}}), 1.0);
    EXPECT_DOUBLE_EQ(recall_at_k(r, {{2, 7}}), 0.5);
    EXPECT_DOUBLE_EQ(ndcg_at_k(r, {{4}}), 1.0);
    EXPECT_NEAR(ndcg_at_k(r, {{2}}), 1.0 / std::log2(3.0), 1e-15);
    EXPECT_NEAR(ndcg_at_k(r, {{2}}), 0.6309, 1e-4);
}

TEST(Metrics, UsersWithoutTruthAreSkipped) {
    RankingResult r{20, {0, 1}, {{0}, {1}}};
    EXPECT_DOUBLE_EQ(recall_at_k(r, {{0}, {}}), 1.0);
}

TEST(Metrics, MatchBruteForceOracle) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const Index nu = std::uniform_int_distribution<Index>(1, 15)(rng);
        const Index ni = std::uniform_int_distribution<Index>(25, 60)(rng);
        const Index k = std::uniform_int_distribution<Index>(1, 25)(rng);
        // coarse scores so ties actually happen
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
        const auto res = topk_rank(FixedScorer(s), excl, k);
        double rsum = 0, nsum = 0;
        int counted = 0;
        for (Index u = 0; u < nu; ++u) {
            const auto& t = truth[static_cast<std::size_t>(u)];
            if (t.empty()) continue;
            std::vector<double> row(s.row(u).data(), s.row(u).data() + ni);
            const auto m = oracle::user_metric(row, std::vector<int>(excl[static_cast<std::size_t>(u)].begin(),
                                                                      excl[static_cast<std::size_t>(u)].end()),
                                               std::vector<int>(t.begin(), t.end()), k);
            rsum += m.recall;
            nsum += m.ndcg;
            ++counted;
        }
        if (counted == 0) continue;
        EXPECT_NEAR(recall_at_k(res, truth, k), rsum / counted, 1e-9);
        EXPECT_NEAR(ndcg_at_k(res, truth, k), nsum / counted, 1e-9);
    }
}

TEST(Evaluate, PerfectScoresGiveRecallOne) {
    const auto data = synth_dataset({50, 40, 10, 8, 8, 1});
    const auto split = user_split(data.dataset, {}, 1);
    Matrix s = Matrix::Zero(split.n_users(), split.n_items());
    for (Index u = 0; u < split.n_users(); ++u) {
        for (int i : split.items(SplitLabel::test, u)) s(u, i) = 1e300;
        for (int i : split.items(SplitLabel::val, u)) s(u, i) = 2e300;  // excluded at test time
    }
    const auto rep = evaluate_model(FixedScorer(s), split, Phase::test);
    EXPECT_DOUBLE_EQ(rep.recall, 1.0);
    EXPECT_DOUBLE_EQ(rep.ndcg, 1.0);
    EXPECT_EQ(rep.split, "test");
    EXPECT_EQ(rep.n_users(), split.n_users());
    const auto val = evaluate_model(FixedScorer(s), split, Phase::val);
    EXPECT_DOUBLE_EQ(val.recall, 1.0);
}

TEST(Evaluate, RandomScoresNearUniformExpectation) {
    const auto data = synth_dataset({2000, 1000, 10, 2, 2, 3});
    const auto split = user_split(data.dataset, {}, 3);
    double mean = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        mean += evaluate_model(RandomScorer(split.n_users(), split.n_items(), seed), split, Phase::test).recall / 5.0;
    }
    const double expect = 20.0 / 1000.0;
    EXPECT_GT(mean, 0.5 * expect);
    EXPECT_LT(mean, 1.5 * expect);
}

TEST(Evaluate, RandomScorerRowDependsOnlyOnUser) {
    RandomScorer r(10, 7, 4);
    Matrix a, b;
    const std::vector<Index> u1{3, 5}, u2{5};
    r.scores(u1, a);
    r.scores(u2, b);
    EXPECT_TRUE(a.row(1) == b.row(0));
}

TEST(Auc, PerfectAndReversed) {
    const auto data = synth_dataset({});
    const auto split = user_split(data.dataset, {}, 1);
    Matrix s = Matrix::Zero(split.n_users(), split.n_items());
    for (Index u = 0; u < split.n_users(); ++u) {
        for (int i : split.items(SplitLabel::train, u)) s(u, i) = 1;
    }
    EXPECT_DOUBLE_EQ(train_auc(FixedScorer(s), split), 1.0);
    EXPECT_DOUBLE_EQ(train_auc(FixedScorer(-s), split), 0.0);
    EXPECT_DOUBLE_EQ(train_auc(FixedScorer(Matrix::Zero(s.rows(), s.cols())), split), 0.5);
}

TEST(Significance, Examples) {
    std::vector<double> a{0.1, 0.2, 0.3, 0.0, 0.5}, b = a;
    EXPECT_DOUBLE_EQ(compare_significance(a, b, 999, 1), 1.0);
    std::vector<double> shifted = a;
    for (auto& x : shifted) x += 1;
    EXPECT_LT(compare_significance(shifted, a, 999, 1), 0.001 + 1e-12);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = g(rng);
        y[i] = g(rng);
    }
    const double p1 = compare_significance(x, y, 500, 9);
    EXPECT_EQ(p1, compare_significance(x, y, 500, 9));
    EXPECT_GT(p1, 0.01);
    EXPECT_THROW(compare_significance(x, std::span<const double>(y).first(10), 500, 9), Error);
}

TEST(Reports, JsonAndCsvRoundTrip) {
    oracle::TempDir dir("rep");
    MetricsReport r;
    r.recall = 0.0866;
    r.ndcg = 0.0367;
    r.split = "test";
    r.model = "synergraph";
    r.dataset = "baby";
    r.seed = 7;
    r.users = {0, 3};
    r.user_recall = {0.5, 0.25};
    r.user_ndcg = {1.0, 0.125};
    write_report_json(dir / "r.json", r);
    write_per_user_csv(dir / "u.csv", r);
    const auto j = read_report_json(dir / "r.json");
    EXPECT_EQ(j.recall, r.recall);
    EXPECT_EQ(j.model, "synergraph");
    EXPECT_EQ(j.seed, 7u);
    const auto c = read_per_user_csv(dir / "u.csv");
    EXPECT_EQ(c.users, r.users);
    EXPECT_EQ(c.user_ndcg, r.user_ndcg);
}

#include "oracles.hpp"
#include "synergraph/dataset.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

using namespace synergraph;

namespace {

InteractionDataset dataset_with_degrees(const std::vector<int>& degrees) {
    InteractionTable t;
    int item = 0;
    for (std::size_t u = 0; u < degrees.size(); ++u) {
        for (int k = 0; k < degrees[u]; ++k) t.rows.push_back({"u" + std::to_string(u), "i" + std::to_string(item++ % 37), {}});
    }
    return encode_ids(t);
}

}  // namespace

TEST(Interactions, SingleLine) {
    const auto t = parse_interactions("u1\ti1\t0\n");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].user, "u1");
    EXPECT_EQ(t.rows[0].item, "i1");
    EXPECT_EQ(t.rows[0].timestamp, 0);
}

TEST(Interactions, DuplicateKeepsEarliestTimestamp) {
    const auto t = parse_interactions("u1\ti1\t5\nu1\ti1\t3\n");
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].timestamp, 3);
}

TEST(Interactions, TimestampOptionalAndCrlf) {
    const auto t = parse_interactions("a\tx\r\n\nb\ty\r\n");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_FALSE(t.rows[0].timestamp.has_value());
    EXPECT_EQ(t.rows[1].item, "y");
}

TEST(Interactions, MalformedLineReportsLineNumber) {
    try {
        parse_interactions("u1\ti1\nbroken\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(parse_interactions("u\ti\tnot-a-number\n"), ParseError);
}

TEST(Interactions, EmptyInputRejected) {
    EXPECT_THROW(parse_interactions(""), EmptyDatasetError);
    EXPECT_THROW(parse_interactions("\n\n"), EmptyDatasetError);
}

TEST(Interactions, EncodeRoundTripsRawIds) {
    const auto ds = encode_ids(parse_interactions("b\tx\na\ty\nb\ty\n"));
    EXPECT_EQ(ds.n_users, 2);
    EXPECT_EQ(ds.n_items, 2);
    EXPECT_EQ(ds.users.raw_id(0), "b");
    EXPECT_EQ(ds.items.raw_id(1), "y");
    for (const auto& e : ds.edges) {
        EXPECT_EQ(*ds.users.find(ds.users.raw_id(e.user)), e.user);
        EXPECT_EQ(*ds.items.find(ds.items.raw_id(e.item)), e.item);
    }
}

TEST(Interactions, FileRoundTrip) {
    oracle::TempDir dir("ds");
    const auto ds = encode_ids(parse_interactions("u1\ti1\nu2\ti1\nu2\ti3\n"));
    write_interactions(dir / "x.tsv", ds);
    const auto back = encode_ids(load_interactions(dir / "x.tsv"));
    EXPECT_EQ(back.edges, ds.edges);
    EXPECT_EQ(back.users.raw_ids(), ds.users.raw_ids());
    write_vocabulary(dir / "v.tsv", ds.items);
    std::ifstream in(dir / "v.tsv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "i1\t0");
    EXPECT_THROW(load_interactions(dir / "missing.tsv"), Error);
}

TEST(Sparsity, SmallCases) {
    auto one = encode_ids(parse_interactions("u\ti\n"));
    EXPECT_DOUBLE_EQ(one.sparsity(), 0.0);
    auto two = encode_ids(parse_interactions("u1\ti1\nu2\ti2\n"));
    EXPECT_DOUBLE_EQ(two.sparsity(), 0.5);
}

TEST(Sparsity, AmazonDatasetCounts) {
    struct Row {
        Index users, items, edges;
        double sparsity_pct;
    };
    for (const Row& r : {Row{19445, 7050, 160792, 99.883}, Row{35598, 18357, 296337, 99.955},
                         Row{39387, 23033, 278677, 99.969}}) {
        InteractionDataset ds;
        ds.n_users = r.users;
        ds.n_items = r.items;
        ds.edges.resize(static_cast<std::size_t>(r.edges));
        EXPECT_NEAR(ds.sparsity() * 100.0, r.sparsity_pct, 5e-4);
    }
}

TEST(Split, TenEdges) {
    const auto s = user_split(dataset_with_degrees({10}), {}, 3);
    EXPECT_EQ(s.items(SplitLabel::train, 0).size(), 8u);
    EXPECT_EQ(s.items(SplitLabel::val, 0).size(), 1u);
    EXPECT_EQ(s.items(SplitLabel::test, 0).size(), 1u);
}

TEST(Split, FiveEdgesFloorRule) {
    const auto s = user_split(dataset_with_degrees({5}), {}, 3);
    EXPECT_EQ(s.items(SplitLabel::train, 0).size(), 4u);
    EXPECT_EQ(s.items(SplitLabel::val, 0).size(), 0u);
    EXPECT_EQ(s.items(SplitLabel::test, 0).size(), 1u);
}

TEST(Split, DeterministicAndPartition) {
    const auto ds = dataset_with_degrees({5, 7, 12, 3, 9, 20});
    const auto a = user_split(ds, {}, 42);
    const auto b = user_split(ds, {}, 42);
    EXPECT_EQ(a.assignment(), b.assignment());
    EXPECT_EQ(a.count(SplitLabel::train) + a.count(SplitLabel::val) + a.count(SplitLabel::test),
              static_cast<Index>(ds.edges.size()));
    for (Index u = 0; u < ds.n_users; ++u) {
        std::set<int> seen;
        std::size_t total = 0;
        for (auto lab : {SplitLabel::train, SplitLabel::val, SplitLabel::test}) {
            for (int i : a.items(lab, u)) seen.insert(i);
            total += a.items(lab, u).size();
        }
        EXPECT_EQ(seen.size(), total);
        EXPECT_GE(a.items(SplitLabel::train, u).size(), 1u);
    }
    const auto c = user_split(ds, {}, 43);
    EXPECT_NE(a.assignment(), c.assignment());
}

TEST(Split, TooFewEdgesNamesUser) {
    try {
        user_split(dataset_with_degrees({5, 2}), {}, 1);
        FAIL();
    } catch (const SplitError& e) {
        EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos);
    }
}

TEST(Features, RoundTripAndShapeCheck) {
    oracle::TempDir dir("feat");
    FeatureMatrix f;
    f.modality = Modality::textual;
    f.data = Matrix::Constant(1, 1, 0.5);
    save_feature_matrix(dir / "t.sgfm", f);
    const auto back = load_feature_matrix(dir / "t.sgfm", 1, Modality::textual);
    EXPECT_EQ(back.data(0, 0), 0.5);

    f.data = Matrix::Random(10, 3);
    save_feature_matrix(dir / "ten.sgfm", f);
    EXPECT_THROW(load_feature_matrix(dir / "ten.sgfm", 7, Modality::textual), LoadError);
    const auto ten = load_feature_matrix(dir / "ten.sgfm", 10, Modality::visual);
    EXPECT_EQ(ten.modality, Modality::visual);
    EXPECT_LT(oracle::max_abs_diff(ten.data, f.data), 1e-6);
}

TEST(Features, RejectsCorruptFiles) {
    oracle::TempDir dir("bad");
    {
        std::ofstream out(dir / "bad.sgfm", std::ios::binary);
        out << "NOPE0000";
    }
    EXPECT_THROW(load_feature_matrix(dir / "bad.sgfm", 1, Modality::visual), LoadError);
    FeatureMatrix f;
    f.data = Matrix::Constant(2, 2, 1.0);
    save_feature_matrix(dir / "trunc.sgfm", f);
    std::filesystem::resize_file(dir / "trunc.sgfm", std::filesystem::file_size(dir / "trunc.sgfm") - 2);
    EXPECT_THROW(load_feature_matrix(dir / "trunc.sgfm", 2, Modality::visual), LoadError);
    f.data(1, 1) = std::nan("");
    save_feature_matrix(dir / "nan.sgfm", f);
    EXPECT_THROW(load_feature_matrix(dir / "nan.sgfm", 2, Modality::visual), LoadError);
}

TEST(Synth, DefaultShape) {
    const auto s = synth_dataset({50, 40, 5, 8, 8, 1});
    EXPECT_EQ(s.dataset.edges.size(), 250u);
    EXPECT_EQ(s.dataset.n_users, 50);
    EXPECT_EQ(s.dataset.n_items, 40);
    std::vector<int> deg(50, 0);
    for (const auto& e : s.dataset.edges) ++deg[static_cast<std::size_t>(e.user)];
    for (int d : deg) EXPECT_EQ(d, 5);
    EXPECT_EQ(s.visual.rows(), 40);
    EXPECT_EQ(s.textual.cols(), 8);
}

TEST(Synth, BitIdenticalPerSeed) {
    const auto a = synth_dataset({});
    const auto b = synth_dataset({});
    EXPECT_EQ(a.dataset.edges, b.dataset.edges);
    EXPECT_TRUE(a.visual.data == b.visual.data);
    EXPECT_TRUE(a.textual.data == b.textual.data);
    SynthConfig other;
    other.seed = 2;
    EXPECT_NE(a.dataset.edges, synth_dataset(other).dataset.edges);
}

TEST(Synth, FeaturesFollowClusters) {
    const auto s = synth_dataset({});
    for (const auto* f : {&s.visual, &s.textual}) {
        double within = 0, cross = 0;
        int nw = 0, nc = 0;
        for (Index a = 0; a < f->rows(); ++a) {
            for (Index b = a + 1; b < f->rows(); ++b) {
                const double c = oracle::cosine(f->data, a, b);
                if (s.item_cluster[static_cast<std::size_t>(a)] == s.item_cluster[static_cast<std::size_t>(b)]) {
                    within += c;
                    ++nw;
                } else {
                    cross += c;
                    ++nc;
                }
            }
        }
        EXPECT_GT(within / nw, cross / nc);
    }
}

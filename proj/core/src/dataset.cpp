#include "synergraph/dataset.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

namespace synergraph {

Index Vocabulary::intern(const std::string& raw) {
    auto [it, inserted] = index_.try_emplace(raw, static_cast<Index>(raw_.size()));
    if (inserted) raw_.push_back(raw);
    return it->second;
}

std::optional<Index> Vocabulary::find(const std::string& raw) const {
    const auto it = index_.find(raw);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double InteractionDataset::sparsity() const {
    if (n_users == 0 || n_items == 0) return 1.0;
    return 1.0 - static_cast<double>(edges.size()) /
                     (static_cast<double>(n_users) * static_cast<double>(n_items));
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::string_view trim_cr(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
    return s;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

}  // namespace

InteractionTable parse_interactions(std::string_view text) {
    InteractionTable table;
    // (user, item) -> row position in `table.rows`
    std::unordered_map<std::string, std::size_t> seen;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = trim_cr(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (is_blank(line)) continue;

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string_view::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() < 2) throw ParseError(line_no, "expected at least 2 tab-separated fields");
        if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty user or item id");

        InteractionRecord rec{std::string(fields[0]), std::string(fields[1]), std::nullopt};
        if (fields.size() >= 3 && !fields[2].empty()) {
            std::int64_t ts = 0;
            const auto* first = fields[2].data();
            const auto* last = first + fields[2].size();
            const auto [ptr, ec] = std::from_chars(first, last, ts);
            if (ec != std::errc{} || ptr != last) {
                throw ParseError(line_no, "timestamp is not an integer: '" + std::string(fields[2]) + "'");
            }
            rec.timestamp = ts;
        }

        std::string key = rec.user;
        key.push_back('\t');
        key += rec.item;
        const auto [it, inserted] = seen.try_emplace(std::move(key), table.rows.size());
        if (inserted) {
            table.rows.push_back(std::move(rec));
        } else {
            auto& kept = table.rows[it->second];
            if (rec.timestamp && (!kept.timestamp || *rec.timestamp < *kept.timestamp)) {
                kept.timestamp = rec.timestamp;
            }
        }
    }
    if (table.rows.empty()) throw EmptyDatasetError("interaction file contains no rows");
    return table;
}

InteractionTable load_interactions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open interactions file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_interactions(buf.str());
}

InteractionDataset encode_ids(const InteractionTable& table) {
    if (table.rows.empty()) throw EmptyDatasetError("cannot encode an empty interaction table");
    InteractionDataset ds;
    ds.edges.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const Index u = ds.users.intern(row.user);
        const Index i = ds.items.intern(row.item);
        ds.edges.push_back({static_cast<std::int32_t>(u), static_cast<std::int32_t>(i)});
    }
    ds.n_users = ds.users.size();
    ds.n_items = ds.items.size();
    return ds;
}

// ---------------------------------------------------------------------------
// Splitting

SplitDataset::SplitDataset(InteractionDataset base, std::vector<SplitLabel> assignment)
    : base_(std::move(base)), assignment_(std::move(assignment)) {
    if (assignment_.size() != base_.edges.size()) {
        throw ShapeError("split assignment length does not match edge count");
    }
    for (int phase = 0; phase < 3; ++phase) {
        auto& off = offsets_[phase];
        off.assign(static_cast<std::size_t>(base_.n_users) + 1, 0);
        for (std::size_t e = 0; e < base_.edges.size(); ++e) {
            if (static_cast<int>(assignment_[e]) == phase) ++off[base_.edges[e].user + 1];
        }
        for (std::size_t u = 0; u < static_cast<std::size_t>(base_.n_users); ++u) off[u + 1] += off[u];
        auto& items = items_[phase];
        items.assign(static_cast<std::size_t>(off.back()), 0);
        std::vector<Index> cursor(off.begin(), off.end() - 1);
        for (std::size_t e = 0; e < base_.edges.size(); ++e) {
            if (static_cast<int>(assignment_[e]) == phase) {
                const auto& edge = base_.edges[e];
                items[static_cast<std::size_t>(cursor[edge.user]++)] = edge.item;
            }
        }
        for (Index u = 0; u < base_.n_users; ++u) {
            std::sort(items.begin() + off[u], items.begin() + off[u + 1]);
        }
    }
}

std::vector<Edge> SplitDataset::edges(SplitLabel label) const {
    std::vector<Edge> out;
    for (std::size_t e = 0; e < base_.edges.size(); ++e) {
        if (assignment_[e] == label) out.push_back(base_.edges[e]);
    }
    return out;
}

std::span<const std::int32_t> SplitDataset::items(SplitLabel label, Index u) const {
    const auto phase = static_cast<int>(label);
    const auto& off = offsets_[phase];
    return {items_[phase].data() + off[u], static_cast<std::size_t>(off[u + 1] - off[u])};
}

bool SplitDataset::is_train(Index u, Index i) const {
    const auto row = items(SplitLabel::train, u);
    return std::binary_search(row.begin(), row.end(), static_cast<std::int32_t>(i));
}

Index SplitDataset::count(SplitLabel label) const {
    return offsets_[static_cast<int>(label)].back();
}

SplitDataset user_split(const InteractionDataset& dataset, SplitRatios ratios, std::uint64_t seed) {
    if (ratios.train <= 0.0 || ratios.val < 0.0 || ratios.test < 0.0) {
        throw SplitError("split ratios must be non-negative with a positive train share");
    }
    std::vector<std::vector<std::size_t>> by_user(static_cast<std::size_t>(dataset.n_users));
    for (std::size_t e = 0; e < dataset.edges.size(); ++e) by_user[dataset.edges[e].user].push_back(e);

    std::vector<SplitLabel> assignment(dataset.edges.size(), SplitLabel::train);
    std::mt19937_64 rng(seed);
    // Tolerance keeps e.g. 10 * 0.1 from flooring to 0 due to representation error.
    constexpr double kFloorSlack = 1e-9;
    for (Index u = 0; u < dataset.n_users; ++u) {
        auto& edges = by_user[static_cast<std::size_t>(u)];
        const auto n = static_cast<Index>(edges.size());
        if (n < 3) {
            throw SplitError("user '" + dataset.users.raw_id(u) + "' has " + std::to_string(n) +
                             " interactions; at least 3 are required");
        }
        std::shuffle(edges.begin(), edges.end(), rng);
        auto n_train = static_cast<Index>(std::floor(static_cast<double>(n) * ratios.train + kFloorSlack));
        auto n_val = static_cast<Index>(std::floor(static_cast<double>(n) * ratios.val + kFloorSlack));
        n_train = std::clamp<Index>(n_train, 1, n);
        n_val = std::clamp<Index>(n_val, 0, n - n_train);
        for (Index k = 0; k < n; ++k) {
            const SplitLabel label = k < n_train ? SplitLabel::train
                                     : k < n_train + n_val ? SplitLabel::val
                                                           : SplitLabel::test;
            assignment[edges[static_cast<std::size_t>(k)]] = label;
        }
    }
    return SplitDataset(dataset, std::move(assignment));
}

// ---------------------------------------------------------------------------
// Feature files

namespace {
constexpr std::string_view kFeatureMagic = "SGFM";
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, Index expected_items,
                                  Modality modality) {
    detail::BinaryReader in(path);
    in.expect_magic(kFeatureMagic);
    const auto version = in.le<std::uint32_t>();
    if (version != kFeatureVersion) {
        throw LoadError(path.string() + ": unsupported SGFM version " + std::to_string(version));
    }
    const auto rows = in.le<std::uint32_t>();
    const auto cols = in.le<std::uint32_t>();
    if (static_cast<Index>(rows) != expected_items) {
        throw LoadError(path.string() + ": file has " + std::to_string(rows) + " rows but dataset has " +
                        std::to_string(expected_items) + " items");
    }
    if (cols == 0) throw LoadError(path.string() + ": zero feature columns");

    FeatureMatrix fm;
    fm.modality = modality;
    fm.data.resize(rows, cols);
    for (Index r = 0; r < static_cast<Index>(rows); ++r) {
        for (Index c = 0; c < static_cast<Index>(cols); ++c) {
            const float v = in.f32();
            if (!std::isfinite(v)) {
                throw LoadError(path.string() + ": non-finite value at row " + std::to_string(r) +
                                ", col " + std::to_string(c));
            }
            fm.data(r, c) = v;
        }
    }
    return fm;
}

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& features) {
    detail::BinaryWriter out(path);
    out.bytes(kFeatureMagic);
    out.le<std::uint32_t>(kFeatureVersion);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(features.rows()));
    out.le<std::uint32_t>(static_cast<std::uint32_t>(features.cols()));
    for (Index r = 0; r < features.rows(); ++r) {
        for (Index c = 0; c < features.cols(); ++c) out.f32(static_cast<float>(features.data(r, c)));
    }
    out.finish();
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    for (Index k = 0; k < vocab.size(); ++k) out << vocab.raw_id(k) << '\t' << k << '\n';
}

void write_interactions(const std::filesystem::path& path, const InteractionDataset& dataset) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    for (const auto& e : dataset.edges) {
        out << dataset.users.raw_id(e.user) << '\t' << dataset.items.raw_id(e.item) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Synthetic fixture

int synth_cluster_count(Index n_items) {
    return static_cast<int>(std::clamp<Index>(n_items / 10, 2, 8));
}

SyntheticData synth_dataset(const SynthConfig& cfg) {
    if (cfg.edges_per_user < 3) throw Error("synth_dataset: edges_per_user must be >= 3");
    if (cfg.n_items < cfg.edges_per_user) throw Error("synth_dataset: n_items must be >= edges_per_user");
    if (cfg.n_users < 1 || cfg.visual_dim < 1 || cfg.textual_dim < 1) {
        throw Error("synth_dataset: sizes must be positive");
    }

    std::mt19937_64 rng(cfg.seed);
    const int n_clusters = synth_cluster_count(cfg.n_items);

    // Balanced random item -> cluster assignment.
    std::vector<Index> perm(static_cast<std::size_t>(cfg.n_items));
    for (Index i = 0; i < cfg.n_items; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> item_cluster(static_cast<std::size_t>(cfg.n_items));
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_clusters));
    for (Index k = 0; k < cfg.n_items; ++k) {
        const int c = static_cast<int>(k % n_clusters);
        item_cluster[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = c;
    }
    for (Index i = 0; i < cfg.n_items; ++i) members[static_cast<std::size_t>(item_cluster[i])].push_back(i);

    SyntheticData out;
    auto& ds = out.dataset;
    for (Index u = 0; u < cfg.n_users; ++u) ds.users.intern("u" + std::to_string(u));
    for (Index i = 0; i < cfg.n_items; ++i) ds.items.intern("i" + std::to_string(i));
    ds.n_users = cfg.n_users;
    ds.n_items = cfg.n_items;

    std::uniform_int_distribution<int> pick_cluster(0, n_clusters - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<char> taken(static_cast<std::size_t>(cfg.n_items));
    for (Index u = 0; u < cfg.n_users; ++u) {
        const int home = pick_cluster(rng);
        std::fill(taken.begin(), taken.end(), 0);
        for (Index e = 0; e < cfg.edges_per_user; ++e) {
            std::vector<Index> pool;
            if (coin(rng) < 0.9) {
                for (Index i : members[static_cast<std::size_t>(home)]) {
                    if (!taken[static_cast<std::size_t>(i)]) pool.push_back(i);
                }
            }
            if (pool.empty()) {
                for (Index i = 0; i < cfg.n_items; ++i) {
                    if (!taken[static_cast<std::size_t>(i)]) pool.push_back(i);
                }
            }
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            const Index item = pool[pick(rng)];
            taken[static_cast<std::size_t>(item)] = 1;
            ds.edges.push_back({static_cast<std::int32_t>(u), static_cast<std::int32_t>(item)});
        }
    }

    auto make_features = [&](Modality m, Index dim, double noise) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        Matrix centroids(n_clusters, dim);
        // Each cluster owns the coordinates k with k % n_clusters == c and is
        // strong there; elsewhere its centroid is small.
        for (Index c = 0; c < n_clusters; ++c) {
            for (Index k = 0; k < dim; ++k) {
                const double base = std::abs(gauss(rng));
                centroids(c, k) = k % n_clusters == c ? 3.0 + base : 0.5 * base;
            }
        }
        FeatureMatrix fm;
        fm.modality = m;
        fm.data.resize(cfg.n_items, dim);
        for (Index i = 0; i < cfg.n_items; ++i) {
            for (Index k = 0; k < dim; ++k) {
                // Non-negative like pooled CNN / ReLU features, so all cosines are >= 0.
                fm.data(i, k) =
                    std::abs(centroids(item_cluster[static_cast<std::size_t>(i)], k) + noise * gauss(rng));
            }
            // SGFM stores f32; keep the in-memory copy identical to what a round trip yields.
            for (Index k = 0; k < dim; ++k) fm.data(i, k) = static_cast<float>(fm.data(i, k));
        }
        return fm;
    };
    out.visual = make_features(Modality::visual, cfg.visual_dim, 1.0);
    out.textual = make_features(Modality::textual, cfg.textual_dim, 0.5);
    out.item_cluster = std::move(item_cluster);
    return out;
}

}  // namespace synergraph

#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace synergraph::cli {

using nlohmann::json;

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_mp: return "no-mp";
        case Ablation::no_iiv: return "no-iiv";
        case Ablation::no_circle: return "no-circle";
    }
    return "?";
}

Ablation parse_ablation(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "no-mp") return Ablation::no_mp;
    if (s == "no-iiv") return Ablation::no_iiv;
    if (s == "no-circle") return Ablation::no_circle;
    throw UsageError("unknown ablation '" + s + "' (expected none|no-mp|no-iiv|no-circle)");
}

Index default_top_k(const std::string& dataset) {
    if (dataset == "baby") return 35;
    if (dataset == "sports" || dataset == "clothing") return 30;
    return 10;
}

namespace {

bool is_named(const std::string& d) {
    return d == "baby" || d == "sports" || d == "clothing" || d == "synthetic";
}

Modality parse_modality(const std::string& s) {
    if (s == "v" || s == "visual") return Modality::visual;
    if (s == "t" || s == "textual") return Modality::textual;
    throw UsageError("unknown modality '" + s + "' (expected v|t|visual|textual)");
}

// Visits every key of `obj`; `handle` returns false for keys it does not know.
template <class F>
void strict_object(const json& obj, const std::string& where, F handle) {
    if (!obj.is_object()) throw UsageError(where + ": expected a JSON object");
    for (const auto& [key, value] : obj.items()) {
        if (!handle(key, value)) throw UsageError("unknown key '" + key + "' in " + where);
    }
}

void read_model(const json& j, ModelConfig& m, Index& knn) {
    strict_object(j, "model", [&](const std::string& k, const json& v) {
        if (k == "dim") m.dim = v.get<Index>();
        else if (k == "ui_layers") m.ui_layers = v.get<int>();
        else if (k == "ii_layers") m.ii_layers = v.get<int>();
        else if (k == "use_purifier") m.use_purifier = v.get<bool>();
        else if (k == "use_item_item") m.use_item_item = v.get<bool>();
        else if (k == "use_circle") m.use_circle = v.get<bool>();
        else if (k == "knn_neighbors") knn = v.get<Index>();
        else return false;
        return true;
    });
}

void read_circle(const json& j, CircleParams& c) {
    strict_object(j, "train.circle", [&](const std::string& k, const json& v) {
        if (k == "margin") c.margin = v.get<double>();
        else if (k == "scale") c.scale = v.get<double>();
        else if (k == "conf_textual") c.conf_textual = v.get<double>();
        else if (k == "conf_visual") c.conf_visual = v.get<double>();
        else if (k == "coefficient") c.coefficient = v.get<double>();
        else return false;
        return true;
    });
}

void read_train(const json& j, TrainConfig& t, std::vector<double>& grid) {
    strict_object(j, "train", [&](const std::string& k, const json& v) {
        if (k == "lr") t.lr = v.get<double>();
        else if (k == "lr_grid") grid = v.get<std::vector<double>>();
        else if (k == "batch_size") t.batch_size = v.get<Index>();
        else if (k == "epochs") t.epochs = v.get<int>();
        else if (k == "weight_decay") t.weight_decay = v.get<double>();
        else if (k == "seed") t.seed = v.get<std::uint64_t>();
        else if (k == "reg_lambda") t.loss.reg_lambda = v.get<double>();
        else if (k == "circle") read_circle(v, t.loss.circle);
        else if (k == "early_stop_patience") t.early_stop_patience = v.get<int>();
        else if (k == "eval_every") t.eval_every = v.get<int>();
        else if (k == "eval_k") t.eval_k = v.get<Index>();
        else return false;
        return true;
    });
}

void read_synth(const json& j, SynthConfig& s) {
    strict_object(j, "synth", [&](const std::string& k, const json& v) {
        if (k == "n_users") s.n_users = v.get<Index>();
        else if (k == "n_items") s.n_items = v.get<Index>();
        else if (k == "edges_per_user") s.edges_per_user = v.get<Index>();
        else if (k == "visual_dim") s.visual_dim = v.get<Index>();
        else if (k == "textual_dim") s.textual_dim = v.get<Index>();
        else if (k == "seed") s.seed = v.get<std::uint64_t>();
        else return false;
        return true;
    });
}

}  // namespace

ModelConfig RunConfig::effective_model() const {
    ModelConfig m = model;
    if (ablation == Ablation::no_mp) m.use_purifier = false;
    if (ablation == Ablation::no_iiv) m.use_item_item = false;
    if (ablation == Ablation::no_circle) m.use_circle = false;
    return m;
}

Index RunConfig::effective_top_k() const { return top_k ? *top_k : default_top_k(dataset); }

std::filesystem::path RunConfig::effective_dataset_dir() const {
    if (!dataset_dir.empty()) return dataset_dir;
    if (dataset == "synthetic") return {};
    if (is_named(dataset)) {
        const char* root = std::getenv("SYNERGRAPH_DATA");
        return std::filesystem::path(root && *root ? root : "data") / dataset;
    }
    return dataset;
}

std::string RunConfig::dataset_label() const {
    if (is_named(dataset)) return dataset;
    const std::string s = std::filesystem::path(dataset).lexically_normal().parent_path().filename().string();
    const std::string f = std::filesystem::path(dataset).filename().string();
    return !f.empty() ? f : (!s.empty() ? s : "data");
}

std::string RunConfig::effective_run_name() const {
    if (!run_name.empty()) return run_name;
    std::string name = dataset_label() + "-" + (baseline ? to_string(*baseline) : "synergraph");
    if (!baseline && ablation != Ablation::none) name += std::string("-") + to_string(ablation);
    if (!baseline && model.modalities.size() == 1) name += std::string("-") + synergraph::to_string(model.modalities[0]);
    return name + "-s" + std::to_string(train.seed);
}

void RunConfig::validate() const {
    try {
        model.validate();
        train.validate();
        train.loss.circle.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    for (double lr : lr_grid) {
        if (!(lr > 0.0)) throw UsageError("lr_grid entries must be positive");
    }
    if (top_k && *top_k < 1) throw UsageError("top_k must be >= 1");
    if (knn_neighbors < 1) throw UsageError("knn_neighbors must be >= 1");
    if (dataset.empty()) throw UsageError("dataset must not be empty");
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        strict_object(j, "config", [&](const std::string& k, const json& v) {
            if (k == "dataset") c.dataset = v.get<std::string>();
            else if (k == "dataset_dir") c.dataset_dir = v.get<std::string>();
            else if (k == "output_dir") c.output_dir = v.get<std::string>();
            else if (k == "run_name") c.run_name = v.get<std::string>();
            else if (k == "model") read_model(v, c.model, c.knn_neighbors);
            else if (k == "train") read_train(v, c.train, c.lr_grid);
            else if (k == "top_k") c.top_k = v.is_null() ? std::nullopt : std::optional<Index>(v.get<Index>());
            else if (k == "modalities") {
                c.model.modalities.clear();
                for (const auto& m : v) c.model.modalities.push_back(parse_modality(m.get<std::string>()));
            } else if (k == "ablation") c.ablation = parse_ablation(v.get<std::string>());
            else if (k == "baseline") {
                if (v.is_null()) {
                    c.baseline.reset();
                } else {
                    c.baseline = parse_baseline(v.get<std::string>());
                    if (!c.baseline) throw UsageError("unknown baseline '" + v.get<std::string>() + "'");
                }
            } else if (k == "synth") read_synth(v, c.synth);
            else if (k == "graph_cache") c.graph_cache = v.get<bool>();
            else return false;
            return true;
        });
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const RunConfig& c) {
    json modalities = json::array();
    for (Modality m : c.model.modalities) modalities.push_back(synergraph::to_string(m));
    const auto& t = c.train;
    const auto& cp = t.loss.circle;
    return json{
        {"dataset", c.dataset},
        {"dataset_dir", c.effective_dataset_dir().string()},
        {"output_dir", c.output_dir.string()},
        {"run_name", c.effective_run_name()},
        {"model",
         {{"dim", c.model.dim},
          {"ui_layers", c.model.ui_layers},
          {"ii_layers", c.model.ii_layers},
          {"use_purifier", c.model.use_purifier},
          {"use_item_item", c.model.use_item_item},
          {"use_circle", c.model.use_circle},
          {"knn_neighbors", c.knn_neighbors}}},
        {"train",
         {{"lr", t.lr},
          {"lr_grid", c.lr_grid},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"weight_decay", t.weight_decay},
          {"seed", t.seed},
          {"reg_lambda", t.loss.reg_lambda},
          {"circle",
           {{"margin", cp.margin},
            {"scale", cp.scale},
            {"conf_textual", cp.conf_textual},
            {"conf_visual", cp.conf_visual},
            {"coefficient", cp.coefficient}}},
          {"early_stop_patience", t.early_stop_patience},
          {"eval_every", t.eval_every},
          {"eval_k", t.eval_k}}},
        {"top_k", c.effective_top_k()},
        {"modalities", modalities},
        {"ablation", to_string(c.ablation)},
        {"baseline", c.baseline ? json(to_string(*c.baseline)) : json(nullptr)},
        {"synth",
         {{"n_users", c.synth.n_users},
          {"n_items", c.synth.n_items},
          {"edges_per_user", c.synth.edges_per_user},
          {"visual_dim", c.synth.visual_dim},
          {"textual_dim", c.synth.textual_dim},
          {"seed", c.synth.seed}}},
        {"graph_cache", c.graph_cache},
    };
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << config_to_json(cfg).dump(2) << '\n';
}

namespace {

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    if (parts.empty()) throw UsageError("empty list '" + text + "'");
    return parts;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& p : split_commas(text)) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(p, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != p.size()) throw UsageError("not a number: '" + p + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<Index> parse_index_list(const std::string& text) {
    std::vector<Index> out;
    for (const auto& p : split_commas(text)) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(p, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != p.size()) throw UsageError("not an integer: '" + p + "'");
        out.push_back(static_cast<Index>(v));
    }
    return out;
}

std::vector<Modality> parse_modalities(const std::string& text) {
    std::vector<Modality> out;
    for (const auto& p : split_commas(text)) {
        const Modality m = parse_modality(p);
        for (Modality seen : out) {
            if (seen == m) throw UsageError("duplicate modality '" + p + "'");
        }
        out.push_back(m);
    }
    return out;
}

}  // namespace synergraph::cli

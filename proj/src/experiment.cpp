#include "aebound/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "aebound/checkpoint.hpp"
#include "aebound/errors.hpp"
#include "aebound/report.hpp"
#include "aebound/rng.hpp"
#include "json.hpp"

namespace aebound {

using nlohmann::json;

namespace {

enum Stage : std::uint64_t {
    kStageGenerate = 1,
    kStagePermute = 2,
    kStageTrain = 3,
    kStageSsl = 4,
    kStageProbe = 5,
};

// --- config JSON ------------------------------------------------------------

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
    if (auto it = j.find(key); it != j.end()) {
        if (it->is_null())
            out.reset();
        else
            out = it->get<T>();
    }
}

void read_path(const json& j, const char* key, std::filesystem::path& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<std::string>();
}

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

json to_json_value(const ExperimentConfig& cfg) {
    const auto& ds = cfg.dataset;
    json acts = json::array();
    for (Activation a : cfg.activations) acts.push_back(std::string(to_string(a)));
    return {
        {"seed", cfg.seed},
        {"dataset",
         {{"kind", ds.kind == DatasetConfig::Kind::synthetic ? "synthetic" : "idx"},
          {"train_size", ds.train_size},
          {"test_size", ds.test_size},
          {"synthetic",
           {{"clusters", ds.synthetic.clusters},
            {"dim", ds.synthetic.dim},
            {"flips", ds.synthetic.flips},
            {"min_hamming", optional_json(ds.synthetic.min_hamming)}}},
          {"idx",
           {{"train_images", ds.idx.train_images.string()},
            {"train_labels", ds.idx.train_labels.string()},
            {"test_images", ds.idx.test_images.string()},
            {"test_labels", ds.idx.test_labels.string()},
            {"binarize_threshold", ds.idx.binarize_threshold}}}}},
        {"architecture", {{"dims", cfg.dims}, {"activations", acts}}},
        {"train",
         {{"learning_rate", cfg.train.learning_rate},
          {"epochs", cfg.train.epochs},
          {"batch_size", cfg.train.batch_size},
          {"surrogate", std::string(to_string(cfg.train.surrogate))},
          {"use_bias", cfg.train.use_bias}}},
        {"margins", {{"gamma1", cfg.margins.gamma1}, {"gamma2", cfg.margins.gamma2}}},
        {"delta", cfg.delta},
        {"sample_fractions", cfg.sample_fractions},
        {"epsilon_grid", cfg.epsilon_grid},
        {"geometry",
         {{"epsilon_over_mu", cfg.geometry.epsilon_over_mu},
          {"mu_from_bound", cfg.geometry.mu_from_bound},
          {"max_points", cfg.geometry.max_points},
          {"max_probe_pairs", cfg.geometry.max_probe_pairs},
          {"perturbation_step", cfg.geometry.perturbation_step}}},
        {"ssl",
         {{"cutoff", optional_json(cfg.ssl.cutoff)},
          {"k_baseline", cfg.ssl.k_baseline},
          {"num_seeds", cfg.ssl.num_seeds},
          {"n_labeled", cfg.ssl.n_labeled},
          {"m_unlabeled", cfg.ssl.m_unlabeled},
          {"n_test", cfg.ssl.n_test}}},
        {"output_dir", cfg.output_dir.string()},
    };
}

ExperimentConfig from_json_value(const json& j) {
    ExperimentConfig cfg;
    check_keys(j, "", {"seed", "dataset", "architecture", "train", "margins", "delta", "sample_fractions",
                       "epsilon_grid", "geometry", "ssl", "output_dir"});
    read(j, "seed", cfg.seed);
    if (auto it = j.find("dataset"); it != j.end()) {
        const json& d = *it;
        check_keys(d, "dataset", {"kind", "train_size", "test_size", "synthetic", "idx"});
        std::string kind = "synthetic";
        read(d, "kind", kind);
        if (kind == "synthetic")
            cfg.dataset.kind = DatasetConfig::Kind::synthetic;
        else if (kind == "idx")
            cfg.dataset.kind = DatasetConfig::Kind::idx;
        else
            throw ConfigError("dataset.kind must be 'synthetic' or 'idx', got '" + kind + "'");
        read(d, "train_size", cfg.dataset.train_size);
        read(d, "test_size", cfg.dataset.test_size);
        if (auto s = d.find("synthetic"); s != d.end()) {
            check_keys(*s, "dataset.synthetic", {"clusters", "dim", "flips", "min_hamming"});
            read(*s, "clusters", cfg.dataset.synthetic.clusters);
            read(*s, "dim", cfg.dataset.synthetic.dim);
            read(*s, "flips", cfg.dataset.synthetic.flips);
            read_optional(*s, "min_hamming", cfg.dataset.synthetic.min_hamming);
        }
        if (auto s = d.find("idx"); s != d.end()) {
            check_keys(*s, "dataset.idx",
                       {"train_images", "train_labels", "test_images", "test_labels", "binarize_threshold"});
            read_path(*s, "train_images", cfg.dataset.idx.train_images);
            read_path(*s, "train_labels", cfg.dataset.idx.train_labels);
            read_path(*s, "test_images", cfg.dataset.idx.test_images);
            read_path(*s, "test_labels", cfg.dataset.idx.test_labels);
            read(*s, "binarize_threshold", cfg.dataset.idx.binarize_threshold);
        }
    }
    if (auto it = j.find("architecture"); it != j.end()) {
        check_keys(*it, "architecture", {"dims", "activations"});
        read(*it, "dims", cfg.dims);
        if (auto a = it->find("activations"); a != it->end()) {
            cfg.activations.clear();
            for (const auto& name : a->get<std::vector<std::string>>()) {
                try {
                    cfg.activations.push_back(parse_activation(name));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("architecture.activations: ") + e.what());
                }
            }
        }
    }
    if (auto it = j.find("train"); it != j.end()) {
        check_keys(*it, "train", {"learning_rate", "epochs", "batch_size", "surrogate", "use_bias"});
        read(*it, "learning_rate", cfg.train.learning_rate);
        read(*it, "epochs", cfg.train.epochs);
        read(*it, "batch_size", cfg.train.batch_size);
        read(*it, "use_bias", cfg.train.use_bias);
        if (auto s = it->find("surrogate"); s != it->end()) {
            try {
                cfg.train.surrogate = parse_surrogate(s->get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("train.surrogate: ") + e.what());
            }
        }
    }
    if (auto it = j.find("margins"); it != j.end()) {
        check_keys(*it, "margins", {"gamma1", "gamma2"});
        read(*it, "gamma1", cfg.margins.gamma1);
        read(*it, "gamma2", cfg.margins.gamma2);
    }
    read(j, "delta", cfg.delta);
    read(j, "sample_fractions", cfg.sample_fractions);
    read(j, "epsilon_grid", cfg.epsilon_grid);
    if (auto it = j.find("geometry"); it != j.end()) {
        check_keys(*it, "geometry",
                   {"epsilon_over_mu", "mu_from_bound", "max_points", "max_probe_pairs", "perturbation_step"});
        read(*it, "epsilon_over_mu", cfg.geometry.epsilon_over_mu);
        read(*it, "mu_from_bound", cfg.geometry.mu_from_bound);
        read(*it, "max_points", cfg.geometry.max_points);
        read(*it, "max_probe_pairs", cfg.geometry.max_probe_pairs);
        read(*it, "perturbation_step", cfg.geometry.perturbation_step);
    }
    if (auto it = j.find("ssl"); it != j.end()) {
        check_keys(*it, "ssl", {"cutoff", "k_baseline", "num_seeds", "n_labeled", "m_unlabeled", "n_test"});
        read_optional(*it, "cutoff", cfg.ssl.cutoff);
        read(*it, "k_baseline", cfg.ssl.k_baseline);
        read(*it, "num_seeds", cfg.ssl.num_seeds);
        read(*it, "n_labeled", cfg.ssl.n_labeled);
        read(*it, "m_unlabeled", cfg.ssl.m_unlabeled);
        read(*it, "n_test", cfg.ssl.n_test);
    }
    read_path(j, "output_dir", cfg.output_dir);
    return cfg;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string real_key(double v) { return json(v).dump(); }

// --- files ------------------------------------------------------------------

const char* const kDatasetMeta = "dataset.json";

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw DataError(DataErrorCode::malformed, path.string() + ": invalid JSON: " + e.what());
    }
}

// Every command records the effective config next to its outputs.
OutputPaths prepare_output(const ExperimentConfig& cfg) {
    cfg.validate();
    OutputPaths out{cfg.output_dir};
    std::filesystem::create_directories(out.root);
    json j = json::parse(config_to_json(cfg));
    j["config_hash"] = config_hash(cfg);
    write_json(out.root / "config.json", j);
    return out;
}

void write_checkpoint(const std::filesystem::path& path, const NetworkParams& params, const std::string& hash,
                      double sample_frac, std::size_t m) {
    json j = json::parse(checkpoint_to_string(params));
    j["config_hash"] = hash;
    j["sample_frac"] = sample_frac;
    j["m"] = m;
    write_text(path, j.dump(1) + "\n");
}

struct LoadedModel {
    NetworkParams params;
    double sample_frac = 0.0;
    std::size_t m = 0;
};

LoadedModel load_model(const std::filesystem::path& path, std::size_t data_dim) {
    const std::string text = read_text(path);
    LoadedModel out{checkpoint_from_string(text)};
    const json j = json::parse(text);
    out.sample_frac = j.value("sample_frac", 1.0);
    out.m = j.value("m", std::size_t{0});
    if (out.params.input_dim() != data_dim)
        throw DataError(DataErrorCode::dimension_mismatch,
                        path.string() + ": checkpoint expects inputs of dimension " +
                            std::to_string(out.params.input_dim()) + ", dataset has " + std::to_string(data_dim));
    return out;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

std::size_t fraction_size(double f, std::size_t n) {
    return static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
}

// Models listed by fraction, or just the one checkpoint when given.
std::vector<LoadedModel> models_for(const ExperimentConfig& cfg, const ExperimentData& data,
                                    const std::optional<std::filesystem::path>& checkpoint) {
    std::vector<LoadedModel> out;
    if (checkpoint) {
        out.push_back(load_model(*checkpoint, data.train.dim()));
        if (out.back().m == 0) out.back().m = data.train.size();
        return out;
    }
    const OutputPaths paths{cfg.output_dir};
    for (std::size_t i = 0; i < cfg.sample_fractions.size(); ++i)
        out.push_back(load_model(paths.model_for_fraction(i), data.train.dim()));
    return out;
}

LoadedModel final_model(const ExperimentConfig& cfg, const ExperimentData& data,
                        const std::optional<std::filesystem::path>& checkpoint) {
    const auto path = checkpoint ? *checkpoint : OutputPaths{cfg.output_dir}.final_model();
    LoadedModel out = load_model(path, data.train.dim());
    if (out.m == 0) out.m = data.train.size();
    return out;
}

Dataset concatenate(const Dataset& a, const Dataset& b) {
    std::vector<Vector> rows;
    std::vector<int> labels;
    for (const Dataset* d : {&a, &b})
        for (std::size_t i = 0; i < d->size(); ++i) {
            rows.emplace_back(d->samples().row(i).begin(), d->samples().row(i).end());
            labels.push_back(d->labels()->at(i));
        }
    return Dataset(Matrix::from_rows(rows), std::move(labels));
}

ImageSet to_image_set(const Dataset& d, std::uint32_t rows, std::uint32_t cols) {
    ImageSet img{static_cast<std::uint32_t>(d.size()), rows, cols, {}};
    img.pixels.reserve(d.samples().values().size());
    for (double v : d.samples().values()) img.pixels.push_back(v == 1.0 ? 255 : 0);
    return img;
}

LabelSet to_label_set(const Dataset& d) {
    LabelSet out;
    for (int l : *d.labels()) {
        if (l < 0 || l > 255) throw ConfigError("labels must fit in one byte, found " + std::to_string(l));
        out.labels.push_back(static_cast<std::uint8_t>(l));
    }
    return out;
}

Dataset seeded_subset(const Dataset& d, std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx = iota_indices(d.size());
    rng.shuffle(idx);
    if (n > 0 && n < idx.size()) idx.resize(n);
    return d.subset(idx);
}

json report_to_json(const BoundReport& r, double sample_frac) {
    return {
        {"sample_frac", sample_frac},
        {"spectral_norms", r.spectral_norms},
        {"frobenius_norms", r.frobenius_norms},
        {"spectral_converged", r.spectral_converged},
        {"B", r.B},
        {"m", r.m},
        {"d", r.d},
        {"h", r.h},
        {"M", r.M},
        {"N_b", r.N_b},
        {"delta", r.delta},
        {"gamma1", r.gamma1},
        {"gamma2", r.gamma2},
        {"complexity", r.complexity},
        {"delta_term", r.delta_term},
        {"delta_term_normalized", r.delta_term_normalized},
        {"margin_loss_hat_g2", r.margin_loss_hat_g2},
        {"margin_bound_g1", r.margin_bound_g1},
        {"test_margin_loss_g1", r.test_margin_loss_g1},
        {"mu_hat", r.mu_hat},
        {"R_worst", r.R_worst},
        {"mu_bound_worst", r.mu_bound_worst},
        {"mu_bound_symmetric", r.mu_bound_symmetric},
        {"outside_theorem_assumptions", r.outside_theorem_assumptions},
        {"notes", r.notes},
    };
}

std::string geps_column(double eps_over_mu) { return "geps_fraction@" + real_key(eps_over_mu); }

CsvTable read_checked(const std::filesystem::path& dir, const std::string& file, const std::string& hash,
                      const std::vector<double>& epsilon_grid) {
    CsvTable t = read_csv(dir / file);
    require_columns(t, expected_columns(file, epsilon_grid), file);
    if (t.config_hash != hash)
        throw DataError(DataErrorCode::malformed, file + " was written for config " + t.config_hash +
                                                      ", the output directory holds config " + hash);
    return t;
}

}  // namespace

// --- config -------------------------------------------------------------------

std::vector<LayerSpec> ExperimentConfig::architecture() const {
    std::vector<LayerSpec> arch;
    for (std::size_t i = 0; i + 1 < dims.size() && i < activations.size(); ++i)
        arch.push_back({dims[i], dims[i + 1], activations[i]});
    return arch;
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    const auto& ds = dataset;
    if (ds.kind == DatasetConfig::Kind::synthetic) {
        if (ds.train_size < 2 || ds.test_size < 1) fail("synthetic data needs train_size >= 2 and test_size >= 1");
        if (ds.synthetic.clusters < 2 || ds.synthetic.clusters > 256)
            fail("dataset.synthetic.clusters must lie in [2, 256]");
        if (ds.synthetic.dim != dims.front())
            fail("dataset.synthetic.dim " + std::to_string(ds.synthetic.dim) + " differs from the input width " +
                 std::to_string(dims.front()));
    } else {
        if (ds.idx.train_images.empty() || ds.idx.train_labels.empty() || ds.idx.test_images.empty() ||
            ds.idx.test_labels.empty())
            fail("dataset.idx needs train/test image and label paths");
        if (!(ds.idx.binarize_threshold > 0.0 && ds.idx.binarize_threshold <= 1.0))
            fail("dataset.idx.binarize_threshold must lie in (0, 1]");
    }
    if (dims.size() < 3) fail("architecture.dims needs at least three widths");
    if (activations.size() != dims.size() - 1)
        fail("architecture.activations needs " + std::to_string(dims.size() - 1) + " entries, got " +
             std::to_string(activations.size()));
    try {
        const auto arch = architecture();
        validate_autoencoder(arch);
    } catch (const std::invalid_argument& e) {
        fail(std::string("architecture: ") + e.what());
    }
    if (!(train.learning_rate > 0.0) || train.epochs == 0 || train.batch_size == 0)
        fail("train needs a positive learning_rate, epochs and batch_size");
    try {
        margins.validate();
    } catch (const std::invalid_argument& e) {
        fail(std::string("margins: ") + e.what());
    }
    if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
    if (sample_fractions.empty()) fail("sample_fractions must not be empty");
    for (std::size_t i = 0; i < sample_fractions.size(); ++i) {
        const double f = sample_fractions[i];
        if (!(f > 0.0 && f <= 1.0)) fail("sample_fractions must lie in (0, 1], got " + real_key(f));
        if (i > 0 && !(f > sample_fractions[i - 1])) fail("sample_fractions must be strictly ascending");
    }
    if (epsilon_grid.empty()) fail("epsilon_grid must not be empty");
    for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
        if (!(epsilon_grid[i] > 0.0) || !std::isfinite(epsilon_grid[i])) fail("epsilon_grid entries must be positive");
        if (i > 0 && !(epsilon_grid[i] > epsilon_grid[i - 1])) fail("epsilon_grid must be strictly ascending");
    }
    if (!(geometry.epsilon_over_mu > 0.0)) fail("geometry.epsilon_over_mu must be positive");
    if (geometry.max_points < 2) fail("geometry.max_points must be at least 2");
    if (geometry.max_probe_pairs == 0) fail("geometry.max_probe_pairs must be positive");
    if (!(geometry.perturbation_step >= 0.0)) fail("geometry.perturbation_step must be non-negative");
    if (ssl.cutoff && !(*ssl.cutoff > 0.0)) fail("ssl.cutoff must be positive");
    if (ssl.k_baseline == 0 || ssl.k_baseline > ssl.n_labeled) fail("ssl.k_baseline must lie in [1, n_labeled]");
    if (ssl.num_seeds == 0 || ssl.n_labeled == 0 || ssl.n_test == 0)
        fail("ssl needs positive num_seeds, n_labeled and n_test");
    if (output_dir.empty()) fail("output_dir must not be empty");
}

ExperimentConfig config_from_json(const std::string& text) {
    try {
        return from_json_value(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json_value(cfg).dump(2) + "\n"; }

std::string apply_override(const std::string& config_text, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json j;
    try {
        j = json::parse(config_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    std::string pointer = "/" + key;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    try {
        j[json::json_pointer(pointer)] = value;
    } catch (const json::exception& e) {
        throw ConfigError("override " + key + ": " + e.what());
    }
    return j.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json_value(cfg);
    j.erase("output_dir");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t index) {
    std::uint64_t z = seed ^ (stage * 0x9e3779b97f4a7c15ULL) ^ (index * 0xd1b54a32d192ed03ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::filesystem::path OutputPaths::model_for_fraction(std::size_t i) const {
    char name[32];
    std::snprintf(name, sizeof name, "frac_%02zu.json", i);
    return models_dir() / name;
}

// --- gen-data -------------------------------------------------------------------

GenDataResult cmd_gen_data(const ExperimentConfig& cfg) {
    const OutputPaths out = prepare_output(cfg);
    const auto& ds = cfg.dataset;
    Rng rng(stage_seed(cfg.seed, kStagePermute));
    GenDataResult result;
    json meta;
    std::uint32_t img_rows = 1, img_cols = 0;
    std::optional<Dataset> train, test;

    if (ds.kind == DatasetConfig::Kind::synthetic) {
        const std::size_t total = ds.train_size + ds.test_size;
        const std::size_t k = ds.synthetic.clusters;
        ClusteredData cd = [&] {
            try {
                return gen_clustered(k, ds.synthetic.dim, ds.synthetic.flips, (total + k - 1) / k,
                                     stage_seed(cfg.seed, kStageGenerate), ds.synthetic.min_hamming);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("dataset.synthetic: ") + e.what());
            }
        }();
        std::vector<std::size_t> idx = iota_indices(cd.data.size());
        rng.shuffle(idx);
        train = cd.data.subset(std::span(idx).first(ds.train_size));
        test = cd.data.subset(std::span(idx).subspan(ds.train_size, ds.test_size));
        img_cols = static_cast<std::uint32_t>(ds.synthetic.dim);
        result.guaranteed_margin = cd.guaranteed_margin;
        meta["guaranteed_margin"] = cd.guaranteed_margin;
        meta["min_prototype_hamming"] = cd.min_prototype_hamming;
    } else {
        const LabeledImages tr = load_idx(ds.idx.train_images, ds.idx.train_labels);
        const LabeledImages te = load_idx(ds.idx.test_images, ds.idx.test_labels);
        if (tr.images.rows != te.images.rows || tr.images.cols != te.images.cols)
            throw DataError(DataErrorCode::dimension_mismatch, "train and test images differ in size");
        train = seeded_subset(binarize(tr.images, ds.idx.binarize_threshold, tr.labels), ds.train_size, rng);
        test = seeded_subset(binarize(te.images, ds.idx.binarize_threshold, te.labels), ds.test_size, rng);
        img_rows = tr.images.rows;
        img_cols = tr.images.cols;
        if (train->dim() != cfg.dims.front())
            throw DataError(DataErrorCode::dimension_mismatch,
                            "images have " + std::to_string(train->dim()) + " pixels, the network expects " +
                                std::to_string(cfg.dims.front()));
    }

    std::filesystem::create_directories(out.data_dir());
    write_file(out.data_dir() / "train-images.idx", write_idx(to_image_set(*train, img_rows, img_cols)));
    write_file(out.data_dir() / "train-labels.idx", write_idx(to_label_set(*train)));
    write_file(out.data_dir() / "test-images.idx", write_idx(to_image_set(*test, img_rows, img_cols)));
    write_file(out.data_dir() / "test-labels.idx", write_idx(to_label_set(*test)));

    result.train_size = train->size();
    result.test_size = test->size();
    result.dim = train->dim();
    meta["config_hash"] = config_hash(cfg);
    meta["train_size"] = result.train_size;
    meta["test_size"] = result.test_size;
    meta["dim"] = result.dim;
    meta["num_classes"] = train->num_classes();
    write_json(out.data_dir() / kDatasetMeta, meta);
    return result;
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    const OutputPaths paths{cfg.output_dir};
    const json meta = read_json(paths.data_dir() / kDatasetMeta);
    if (meta.value("config_hash", std::string{}) != config_hash(cfg))
        throw DataError(DataErrorCode::malformed,
                        "cached data in " + paths.data_dir().string() + " was generated for another config; rerun gen-data");
    auto load = [&](const char* images, const char* labels) {
        const LabeledImages li = load_idx(paths.data_dir() / images, paths.data_dir() / labels);
        return binarize(li.images, kDefaultBinarizeThreshold, li.labels);
    };
    ExperimentData data{load("train-images.idx", "train-labels.idx"), load("test-images.idx", "test-labels.idx")};
    if (data.train.dim() != data.test.dim())
        throw DataError(DataErrorCode::dimension_mismatch, "cached train and test sets differ in dimension");
    if (data.train.dim() != cfg.dims.front())
        throw DataError(DataErrorCode::dimension_mismatch,
                        "cached data has dimension " + std::to_string(data.train.dim()) +
                            ", the network expects " + std::to_string(cfg.dims.front()));
    return data;
}

// --- train ----------------------------------------------------------------------

std::vector<TrainedModel> cmd_train(const ExperimentConfig& cfg) {
    const OutputPaths out = prepare_output(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const std::string hash = config_hash(cfg);
    const auto arch = cfg.architecture();
    TrainConfig tc = cfg.train;
    tc.seed = stage_seed(cfg.seed, kStageTrain);

    CsvTable history{hash, {"sample_frac", "m", "epoch", "surrogate_loss"}, {}};
    std::vector<TrainedModel> models;
    for (std::size_t i = 0; i < cfg.sample_fractions.size(); ++i) {
        const double f = cfg.sample_fractions[i];
        const std::size_t m = fraction_size(f, data.train.size());
        if (m < 2)
            throw ConfigError("sample fraction " + real_key(f) + " leaves " + std::to_string(m) +
                              " training samples; need at least 2");
        const auto idx = iota_indices(m);
        const Dataset sub = data.train.subset(idx);
        TrainResult r = [&] {
            try {
                return train(arch, sub.samples(), tc);
            } catch (const std::runtime_error& e) {
                throw NumericError(std::string("training: ") + e.what());
            }
        }();
        for (std::size_t e = 0; e < r.loss_history.size(); ++e)
            history.add_row({real_key(f), std::to_string(m), std::to_string(e), format_real(r.loss_history[e])});
        write_checkpoint(out.model_for_fraction(i), r.params, hash, f, m);
        if (i + 1 == cfg.sample_fractions.size()) write_checkpoint(out.final_model(), r.params, hash, f, m);
        models.push_back({f, m, std::move(r.params), std::move(r.loss_history)});
    }
    write_csv(out.root / "history.csv", history);
    return models;
}

// --- bounds ---------------------------------------------------------------------

std::vector<FractionBounds> cmd_bounds(const ExperimentConfig& cfg) {
    const OutputPaths out = prepare_output(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const std::string hash = config_hash(cfg);
    const auto models = models_for(cfg, data, std::nullopt);

    CsvTable bounds{hash,
                    {"sample_frac", "m", "margin_loss_hat_g2", "test_margin_loss_g1", "complexity", "delta_term",
                     "delta_term_normalized", "mu_hat", "mu_bound_worst", "mu_bound_symmetric", "margin_bound_g1",
                     "B", "spectral_converged"},
                    {}};
    CsvTable metrics{hash, {"sample_frac", "margin_loss_g1", "margin_loss_g2", "se_mean", "mu_hat"}, {}};
    for (double r : cfg.epsilon_grid) metrics.columns.push_back(geps_column(r));
    json reports = json::array();
    std::vector<FractionBounds> rows;

    for (const LoadedModel& lm : models) {
        const Dataset sub = data.train.subset(iota_indices(std::min(lm.m, data.train.size())));
        const ReconMetrics train_m = reconstruction_metrics(lm.params, sub, cfg.margins);
        ReconMetrics test_m = reconstruction_metrics(lm.params, data.test, cfg.margins);
        BoundInputs in{sub.max_norm(),        sub.size(),
                       cfg.delta,             cfg.margins,
                       lm.params.depth(),     lm.params.max_width(),
                       lm.params.input_dim()};
        FractionBounds fb{lm.sample_frac, {}, {}, {}};
        try {
            fb.report = compute_bound_report(lm.params, in, train_m, test_m);
        } catch (const std::invalid_argument& e) {
            throw NumericError(std::string("bounds: ") + e.what());
        }
        for (double r : cfg.epsilon_grid)
            fb.geps_fraction.push_back(g_epsilon(test_m.per_sample_l2, r * test_m.mu_hat, test_m.mu_hat).fraction);

        const BoundReport& br = fb.report;
        const std::string f = real_key(lm.sample_frac);
        bounds.add_row({f, std::to_string(br.m), format_real(br.margin_loss_hat_g2),
                        format_real(br.test_margin_loss_g1), format_real(br.complexity), format_real(br.delta_term),
                        format_real(br.delta_term_normalized), format_real(br.mu_hat),
                        format_real(br.mu_bound_worst), format_real(br.mu_bound_symmetric),
                        format_real(br.margin_bound_g1), format_real(br.B), br.spectral_converged ? "1" : "0"});
        std::vector<std::string> mrow{f, format_real(test_m.margin_loss_g1), format_real(test_m.margin_loss_g2),
                                      format_real(test_m.se_loss_mean), format_real(test_m.mu_hat)};
        for (double g : fb.geps_fraction) mrow.push_back(format_real(g));
        metrics.add_row(std::move(mrow));
        reports.push_back(report_to_json(br, lm.sample_frac));
        fb.test_metrics = std::move(test_m);
        rows.push_back(std::move(fb));
    }
    write_csv(out.root / "bounds.csv", bounds);
    write_csv(out.root / "metrics.csv", metrics);
    write_json(out.root / "bounds.json", {{"config_hash", hash}, {"reports", reports}});
    return rows;
}

// --- geometry -------------------------------------------------------------------

GeometryResult cmd_geometry(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint) {
    const OutputPaths out = prepare_output(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const std::string hash = config_hash(cfg);
    const LoadedModel lm = final_model(cfg, data, checkpoint);
    const NetworkParams& f = lm.params;

    const ReconMetrics test_m = reconstruction_metrics(f, data.test, cfg.margins);
    GeometryResult g;
    g.N = f.input_dim();
    g.N_b = f.code_dim();
    g.m = lm.m;
    g.mu = cfg.geometry.mu_from_bound ? mu_bound_worst(test_m.margin_loss_g1, cfg.margins.gamma1, g.N)
                                      : test_m.mu_hat;
    g.epsilon = cfg.geometry.epsilon_over_mu * g.mu;
    if (!(g.epsilon > 0.0)) throw NumericError("geometry: mu is zero, so epsilon = ratio * mu is zero");

    const std::size_t n = std::min(cfg.geometry.max_points, data.test.size());
    g.points = n;
    const auto idx = iota_indices(n);
    const GEpsilon mask = g_epsilon(std::span(test_m.per_sample_l2).first(n), g.epsilon, g.mu);
    ClusteredSample sample{data.test.samples().select_rows(idx), std::vector<int>(data.test.labels()->begin(),
                                                                                  data.test.labels()->begin() +
                                                                                      static_cast<std::ptrdiff_t>(n)),
                           mask.mask};
    g.geps_points = static_cast<std::size_t>(std::count(mask.mask.begin(), mask.mask.end(), true));

    try {
        g.eta_hat = empirical_cluster_margin({sample.points, sample.cluster_id, {}}).eta_hat;
        const EncodedMargin restricted = encoded_cluster_margin(f, sample, true);
        g.eta_prime_hat = restricted.estimate.eta_hat;
        g.excluded_clusters = restricted.excluded_clusters.size();
        g.eta_prime_hat_all = encoded_cluster_margin(f, sample, false).estimate.eta_hat;
        g.lipschitz_upper = lipschitz_upper(f);
        const Matrix codes = encode_batch(f, sample.points);
        const auto pairs = make_probe_pairs(codes, cfg.geometry.max_probe_pairs, cfg.geometry.perturbation_step,
                                            stage_seed(cfg.seed, kStageProbe));
        g.lipschitz_empirical = lipschitz_empirical(f, pairs);
        g.eta_prime_theoretical = eta_prime_theoretical(g.eta_hat, g.mu, g.epsilon, g.lipschitz_upper);
        g.audit = three_eps_audit(f, sample, g.mu, g.epsilon, g.lipschitz_upper, true);
        g.ssl_term_input = ssl_term(g.m, g.N);
        g.ssl_term_code = ssl_term(g.m, g.N_b);
        g.improvement_factor = improvement_factor(g.m, g.N, g.N_b);
    } catch (const std::invalid_argument& e) {
        throw NumericError(std::string("geometry: ") + e.what());
    }

    CsvTable t{hash,
               {"N", "N_b", "m", "points", "geps_points", "mu", "epsilon", "eta_hat", "eta_prime_hat",
                "eta_prime_hat_all", "eta_prime_theoretical", "eta_prime_vacuous", "lipschitz_upper",
                "lipschitz_empirical", "audit_pairs", "audit_decoded_violations", "audit_encoded_violations",
                "audit_min_slack", "audit_min_encoded_slack", "excluded_clusters", "ssl_term_input",
                "ssl_term_code", "improvement_factor"},
               {}};
    t.add_row({std::to_string(g.N), std::to_string(g.N_b), std::to_string(g.m), std::to_string(g.points),
               std::to_string(g.geps_points), format_real(g.mu), format_real(g.epsilon), format_real(g.eta_hat),
               format_real(g.eta_prime_hat), format_real(g.eta_prime_hat_all),
               format_real(g.eta_prime_theoretical.value), g.eta_prime_theoretical.vacuous ? "1" : "0",
               format_real(g.lipschitz_upper), format_real(g.lipschitz_empirical),
               std::to_string(g.audit.pairs_checked), std::to_string(g.audit.decoded_violations),
               std::to_string(g.audit.encoded_violations), format_real(g.audit.min_slack),
               format_real(g.audit.min_encoded_slack), std::to_string(g.excluded_clusters),
               format_real(g.ssl_term_input), format_real(g.ssl_term_code), format_real(g.improvement_factor)});
    write_csv(out.root / "geometry.csv", t);

    json j;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        // Non-finite cells ("nan", "inf") become null.
        const json v = json::parse(t.rows[0][c], nullptr, false);
        j[t.columns[c]] = v.is_discarded() ? json(nullptr) : v;
    }
    j["config_hash"] = hash;
    j["mu_reference"] = cfg.geometry.mu_from_bound ? "mu_bound_worst" : "mu_hat";
    write_json(out.root / "geometry.json", j);
    return g;
}

// --- geps -----------------------------------------------------------------------

std::vector<GepsRow> cmd_geps(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint) {
    const OutputPaths out = prepare_output(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const std::string hash = config_hash(cfg);

    CsvTable t{hash, {"sample_frac", "eps_over_mu", "epsilon", "mu_hat", "fraction_in", "markov_bound"}, {}};
    std::vector<GepsRow> rows;
    for (const LoadedModel& lm : models_for(cfg, data, checkpoint)) {
        const ReconMetrics test_m = reconstruction_metrics(lm.params, data.test, cfg.margins);
        if (!(test_m.mu_hat > 0.0))
            throw NumericError("geps: mu_hat is zero, so the epsilon grid relative to mu_hat is degenerate");
        for (double r : cfg.epsilon_grid) {
            GepsRow row{lm.sample_frac, r, r * test_m.mu_hat, test_m.mu_hat, 0.0, 0.0};
            row.fraction_in = g_epsilon(test_m.per_sample_l2, row.epsilon, test_m.mu_hat).fraction;
            row.markov_bound = markov_geps_bound(test_m.mu_hat, row.epsilon);
            t.add_row({real_key(row.sample_frac), real_key(r), format_real(row.epsilon), format_real(row.mu_hat),
                       format_real(row.fraction_in), format_real(row.markov_bound)});
            rows.push_back(row);
        }
    }
    write_csv(out.root / "geps.csv", t);
    return rows;
}

// --- ssl ------------------------------------------------------------------------

SSLSummary cmd_ssl(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& checkpoint) {
    const OutputPaths out = prepare_output(cfg);
    const ExperimentData data = load_experiment_data(cfg);
    const std::string hash = config_hash(cfg);
    const LoadedModel lm = final_model(cfg, data, checkpoint);
    const Dataset pool = concatenate(data.train, data.test);

    const auto& s = cfg.ssl;
    if (s.n_labeled + s.m_unlabeled + s.n_test > pool.size())
        throw ConfigError("ssl asks for " + std::to_string(s.n_labeled + s.m_unlabeled + s.n_test) +
                          " points but the data holds " + std::to_string(pool.size()));
    SSLConfig sc{s.cutoff, s.k_baseline, {}};
    for (std::size_t i = 0; i < s.num_seeds; ++i) sc.seeds.push_back(stage_seed(cfg.seed, kStageSsl, i));
    const SSLSummary summary = ssl_compare(lm.params, pool, {s.n_labeled, s.m_unlabeled, s.n_test, 0}, sc);

    CsvTable t{hash,
               {"seed", "m", "n", "cutoff", "ssl_error", "supervised_error", "n_clusters_found",
                "n_unmatched_clusters", "degenerate"},
               {}};
    for (const SSLResult& r : summary.runs)
        t.add_row({std::to_string(r.seed), std::to_string(r.m), std::to_string(r.n), format_real(r.cutoff),
                   format_real(r.ssl_error), format_real(r.supervised_error), std::to_string(r.n_clusters_found),
                   std::to_string(r.n_unmatched_clusters), r.degenerate ? "1" : "0"});
    write_csv(out.root / "ssl.csv", t);
    write_json(out.root / "ssl.json", {{"config_hash", hash},
                                       {"runs", summary.runs.size()},
                                       {"ssl_error_mean", summary.ssl_error_mean},
                                       {"ssl_error_std", summary.ssl_error_std},
                                       {"supervised_error_mean", summary.supervised_error_mean},
                                       {"supervised_error_std", summary.supervised_error_std}});
    return summary;
}

// --- report ---------------------------------------------------------------------

std::vector<std::string> expected_columns(const std::string& file, const std::vector<double>& epsilon_grid) {
    if (file == "bounds.csv")
        return {"sample_frac",   "m",          "margin_loss_hat_g2",    "test_margin_loss_g1",
                "complexity",    "delta_term", "delta_term_normalized", "mu_hat",
                "mu_bound_worst", "mu_bound_symmetric"};
    if (file == "metrics.csv") {
        std::vector<std::string> cols{"sample_frac", "margin_loss_g1", "margin_loss_g2", "se_mean", "mu_hat"};
        for (double r : epsilon_grid) cols.push_back(geps_column(r));
        return cols;
    }
    if (file == "geps.csv") return {"sample_frac", "eps_over_mu", "fraction_in", "markov_bound", "mu_hat", "epsilon"};
    if (file == "ssl.csv")
        return {"seed", "m", "n", "cutoff", "ssl_error", "supervised_error", "n_clusters_found"};
    if (file == "geometry.csv")
        return {"N",
                "N_b",
                "m",
                "eta_hat",
                "eta_prime_hat",
                "eta_prime_theoretical",
                "eta_prime_vacuous",
                "lipschitz_upper",
                "lipschitz_empirical",
                "audit_decoded_violations",
                "audit_encoded_violations",
                "improvement_factor"};
    if (file == "history.csv") return {"sample_frac", "m", "epoch", "surrogate_loss"};
    throw std::invalid_argument("no schema for " + file);
}

std::string cmd_report(const std::filesystem::path& output_dir) {
    const json stored = read_json(output_dir / "config.json");
    const std::string hash = stored.value("config_hash", std::string{});
    json cfg_json = stored;
    cfg_json.erase("config_hash");
    const ExperimentConfig cfg = config_from_json(cfg_json.dump());
    const auto& grid = cfg.epsilon_grid;

    const CsvTable bounds = read_checked(output_dir, "bounds.csv", hash, grid);
    const CsvTable metrics = read_checked(output_dir, "metrics.csv", hash, grid);
    const CsvTable geps = read_checked(output_dir, "geps.csv", hash, grid);
    const CsvTable geometry = read_checked(output_dir, "geometry.csv", hash, grid);
    const CsvTable ssl = read_checked(output_dir, "ssl.csv", hash, grid);
    if (geometry.rows.size() != 1) throw DataError(DataErrorCode::malformed, "geometry.csv must hold one row");
    if (bounds.rows.empty() || ssl.rows.empty() || geps.rows.empty())
        throw DataError(DataErrorCode::malformed, "bounds.csv, geps.csv and ssl.csv must not be empty");

    json table1;
    for (const char* c : {"N", "N_b", "m", "eta_hat", "eta_prime_hat", "eta_prime_theoretical", "lipschitz_upper",
                          "lipschitz_empirical", "improvement_factor"})
        table1[c] = geometry.number(0, c);
    table1["eta_prime_vacuous"] = geometry.number(0, "eta_prime_vacuous") != 0.0;
    table1["C_upper"] = table1["lipschitz_upper"];
    table1["C_empirical"] = table1["lipschitz_empirical"];

    json series = json::array();
    bool normalized_decreasing = true;
    double max_loss_increase = 0.0;
    std::size_t mu_ordering_violations = 0;
    for (std::size_t i = 0; i < bounds.rows.size(); ++i) {
        const double mu = bounds.number(i, "mu_hat");
        const double worst = bounds.number(i, "mu_bound_worst");
        const double sym = bounds.number(i, "mu_bound_symmetric");
        const double loss = bounds.number(i, "test_margin_loss_g1");
        if (!(mu <= worst)) ++mu_ordering_violations;
        for (std::size_t k = 0; k < i; ++k)
            max_loss_increase = std::max(max_loss_increase, loss - bounds.number(k, "test_margin_loss_g1"));
        if (i > 0 && !(bounds.number(i, "delta_term_normalized") < bounds.number(i - 1, "delta_term_normalized")))
            normalized_decreasing = false;
        series.push_back({{"sample_frac", bounds.number(i, "sample_frac")},
                          {"m", bounds.number(i, "m")},
                          {"delta_term_normalized", bounds.number(i, "delta_term_normalized")},
                          {"test_margin_loss_g1", loss},
                          {"mu_hat", mu},
                          {"mu_bound_worst", worst},
                          {"mu_bound_symmetric", sym},
                          {"looseness_worst", mu > 0.0 ? json(worst / mu) : json(nullptr)},
                          {"looseness_symmetric", mu > 0.0 ? json(sym / mu) : json(nullptr)}});
    }

    // Coverage curve of the last (largest-fraction) model.
    const double last_frac = geps.number(geps.rows.size() - 1, "sample_frac");
    std::size_t markov_violations = 0;
    bool coverage_nondecreasing = true;
    double prev_fraction = -1.0;
    json coverage_at_mu = nullptr;
    for (std::size_t i = 0; i < geps.rows.size(); ++i) {
        const double fraction = geps.number(i, "fraction_in");
        if (1.0 - fraction > geps.number(i, "markov_bound")) ++markov_violations;
        if (geps.number(i, "sample_frac") != last_frac) continue;
        if (fraction < prev_fraction) coverage_nondecreasing = false;
        prev_fraction = fraction;
        if (geps.number(i, "eps_over_mu") == 1.0) coverage_at_mu = fraction;
    }

    std::vector<double> ssl_err, sup_err;
    for (std::size_t i = 0; i < ssl.rows.size(); ++i) {
        ssl_err.push_back(ssl.number(i, "ssl_error"));
        sup_err.push_back(ssl.number(i, "supervised_error"));
    }
    const auto avg = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };

    const json summary = {
        {"config_hash", hash},
        {"table1", table1},
        {"bound_vs_fraction", series},
        {"ssl",
         {{"runs", ssl.rows.size()},
          {"ssl_error_mean", avg(ssl_err)},
          {"supervised_error_mean", avg(sup_err)},
          {"m", ssl.number(0, "m")},
          {"n", ssl.number(0, "n")}}},
        {"checks",
         {{"normalized_bound_strictly_decreasing", normalized_decreasing},
          {"max_test_margin_loss_increase", max_loss_increase},
          {"mu_ordering_violations", mu_ordering_violations},
          {"markov_violations", markov_violations},
          {"geps_fraction_at_mu", coverage_at_mu},
          {"geps_curve_nondecreasing", coverage_nondecreasing},
          {"audit_decoded_violations", geometry.number(0, "audit_decoded_violations")},
          {"audit_encoded_violations", geometry.number(0, "audit_encoded_violations")},
          {"metrics_rows", metrics.rows.size()}}},
    };
    const std::string text = summary.dump(2) + "\n";
    write_text(output_dir / "summary.json", text);
    return text;
}

}  // namespace aebound

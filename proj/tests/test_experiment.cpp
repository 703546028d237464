#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "aebound/errors.hpp"
#include "aebound/experiment.hpp"
#include "aebound/report.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace aebound;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(AEBOUND_SOURCE_DIR) / "tests/fixtures";

ExperimentConfig tiny_config(const fs::path& out) {
    ExperimentConfig cfg = config_from_json(read_text(kFixtures / "tiny.json"));
    cfg.output_dir = out;
    return cfg;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("aebound_test_experiment_" + name);
    fs::remove_all(dir);
    return dir;
}

void run_all(const ExperimentConfig& cfg) {
    cmd_gen_data(cfg);
    cmd_train(cfg);
    cmd_bounds(cfg);
    cmd_geometry(cfg);
    cmd_geps(cfg);
    cmd_ssl(cfg);
    cmd_report(cfg.output_dir);
}

std::set<fs::path> files_under(const fs::path& root) {
    std::set<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.insert(fs::relative(e.path(), root));
    return out;
}

}  // namespace

TEST_CASE("config parsing") {
    const ExperimentConfig defaults = config_from_json("{}");
    CHECK(config_to_json(defaults) == config_to_json(ExperimentConfig{}));
    CHECK(config_to_json(config_from_json(config_to_json(defaults))) == config_to_json(defaults));

    const ExperimentConfig tiny = config_from_json(read_text(kFixtures / "tiny.json"));
    CHECK(tiny.seed == 3);
    CHECK(tiny.dims == std::vector<std::size_t>{20, 16, 2, 16, 20});
    CHECK(tiny.train.epochs == 6);
    CHECK(tiny.ssl.num_seeds == 3);
    CHECK(tiny.margins.gamma1 == 0.45);
    CHECK(tiny.architecture().size() == 4);
    CHECK_NOTHROW(tiny.validate());

    CHECK_THROWS_AS(config_from_json("{\"sed\": 1}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"train\": {\"epoch\": 1}}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"seed\": \"x\"}"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"architecture\": {\"dims\": [20, 4, 19]}}").validate(), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"margins\": {\"gamma1\": 0.49, \"gamma2\": 0.45}}").validate(), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"sample_fractions\": [0.5, 0.2]}").validate(), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"dataset\": {\"kind\": \"svhn\"}}"), ConfigError);
}

TEST_CASE("config overrides") {
    const std::string base = read_text(kFixtures / "tiny.json");
    CHECK(config_from_json(apply_override(base, "train.epochs=2")).train.epochs == 2);
    CHECK(config_from_json(apply_override(base, "architecture.dims=[20,8,3,8,20]")).dims ==
          std::vector<std::size_t>{20, 8, 3, 8, 20});
    CHECK(config_from_json(apply_override(base, "ssl.cutoff=0.75")).ssl.cutoff == 0.75);
    // Bare words become strings.
    CHECK(config_from_json(apply_override(base, "dataset.idx.train_images=a/b.idx")).dataset.idx.train_images ==
          fs::path("a/b.idx"));
    CHECK_THROWS_AS(config_from_json(apply_override(base, "seed=abc")), ConfigError);
    CHECK_THROWS_AS(apply_override(base, "seed"), ConfigError);
    CHECK_THROWS_AS(config_from_json(apply_override(base, "train.nope=1")), ConfigError);
}

TEST_CASE("config hash and stage seeds") {
    const ExperimentConfig a = config_from_json("{}");
    const std::string h = config_hash(a);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(config_hash(a) == h);

    ExperimentConfig moved = a;
    moved.output_dir = "elsewhere";
    CHECK(config_hash(moved) == h);
    ExperimentConfig reseeded = a;
    reseeded.seed = 8;
    CHECK(config_hash(reseeded) != h);

    std::set<std::uint64_t> seen;
    for (std::uint64_t stage = 1; stage <= 5; ++stage)
        for (std::uint64_t i = 0; i < 20; ++i) seen.insert(stage_seed(7, stage, i));
    CHECK(seen.size() == 100);
    CHECK(stage_seed(7, 3, 2) == stage_seed(7, 3, 2));
    CHECK(stage_seed(7, 3, 2) != stage_seed(8, 3, 2));
}

TEST_CASE("csv tables") {
    const fs::path dir = scratch("csv");
    CsvTable t{"00112233aabbccdd", {"a", "b"}, {}};
    t.add_row({format_real(0.1), format_real(-3.0)});
    t.add_row({format_real(std::numeric_limits<double>::quiet_NaN()), format_real(INFINITY)});
    CHECK_THROWS(t.add_row({"1"}));
    write_csv(dir / "t.csv", t);
    CHECK(read_text(dir / "t.csv").rfind("# config_hash=00112233aabbccdd\na,b\n", 0) == 0);

    const CsvTable back = read_csv(dir / "t.csv");
    CHECK(back.config_hash == t.config_hash);
    CHECK(back.number(0, "a") == 0.1);
    CHECK(back.number(0, "b") == -3.0);
    CHECK(std::isnan(back.number(1, "a")));
    CHECK(std::isinf(back.number(1, "b")));
    CHECK_THROWS_AS(back.column("c"), DataError);
    CHECK_THROWS_AS(require_columns(back, {"a", "c"}, "t.csv"), DataError);
    CHECK_NOTHROW(require_columns(back, {"b"}, "t.csv"));
    CHECK_THROWS_AS(read_csv(dir / "missing.csv"), DataError);

    for (double v : {1.0 / 3.0, 1e-300, 123456789.123456789, -0.0})
        CHECK(std::stod(format_real(v)) == v);
    fs::remove_all(dir);
}

TEST_CASE("small pipeline end to end") {
    const fs::path a = scratch("a");
    const fs::path b = scratch("b");
    const ExperimentConfig cfg = tiny_config(a);
    run_all(cfg);

    for (const char* f : {"config.json", "bounds.csv", "metrics.csv", "geps.csv", "geometry.csv", "ssl.csv",
                          "history.csv", "summary.json", "model.json", "data/dataset.json"})
        CHECK_MESSAGE(fs::exists(a / f), f);

    const CsvTable bounds = read_csv(a / "bounds.csv");
    CHECK(bounds.rows.size() == 10);
    CHECK(bounds.config_hash == config_hash(cfg));
    CHECK_NOTHROW(require_columns(bounds, expected_columns("bounds.csv"), "bounds.csv"));
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(bounds.number(i, "m") == 40.0 * static_cast<double>(i + 1));
        CHECK(bounds.number(i, "mu_hat") <= bounds.number(i, "mu_bound_worst"));
        CHECK(bounds.number(i, "mu_bound_symmetric") <= bounds.number(i, "mu_bound_worst"));
    }
    CHECK(read_csv(a / "geps.csv").rows.size() == 10 * cfg.epsilon_grid.size());
    CHECK(read_csv(a / "ssl.csv").rows.size() == 3);
    CHECK(read_csv(a / "history.csv").rows.size() == 10 * 7);

    const json summary = json::parse(read_text(a / "summary.json"));
    for (const char* k : {"N", "N_b", "eta_hat", "eta_prime_hat", "eta_prime_theoretical", "eta_prime_vacuous",
                          "C_upper", "C_empirical", "improvement_factor"})
        CHECK_MESSAGE(summary["table1"].contains(k), k);
    CHECK(summary["table1"]["N"] == 20);
    CHECK(summary["table1"]["N_b"] == 2);
    CHECK(summary["checks"]["markov_violations"] == 0);
    CHECK(summary["checks"]["mu_ordering_violations"] == 0);
    CHECK(summary["checks"]["audit_decoded_violations"] == 0);
    CHECK(summary["checks"]["audit_encoded_violations"] == 0);
    CHECK(summary["bound_vs_fraction"].size() == 10);

    SUBCASE("reruns and relocated runs write identical bytes") {
        const std::string first = read_text(a / "summary.json");
        const std::string first_bounds = read_text(a / "bounds.csv");
        run_all(cfg);
        CHECK(read_text(a / "summary.json") == first);
        CHECK(read_text(a / "bounds.csv") == first_bounds);

        run_all(tiny_config(b));
        const auto files = files_under(a);
        CHECK(files == files_under(b));
        for (const fs::path& f : files) {
            if (f == "config.json") continue;  // records output_dir
            CHECK_MESSAGE(read_text(a / f) == read_text(b / f), f.string());
        }
    }

    SUBCASE("report rejects a missing column") {
        const CsvTable t = read_csv(a / "bounds.csv");
        CsvTable cut{t.config_hash, {}, {}};
        const std::size_t drop = t.column("mu_hat");
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            if (c != drop) cut.columns.push_back(t.columns[c]);
        for (const auto& row : t.rows) {
            std::vector<std::string> r;
            for (std::size_t c = 0; c < row.size(); ++c)
                if (c != drop) r.push_back(row[c]);
            cut.add_row(r);
        }
        write_csv(a / "bounds.csv", cut);
        try {
            cmd_report(a);
            FAIL("report accepted a missing column");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("mu_hat") != std::string::npos);
        }
    }

    SUBCASE("report rejects outputs of a different config") {
        CsvTable t = read_csv(a / "ssl.csv");
        t.config_hash = "0000000000000000";
        write_csv(a / "ssl.csv", t);
        CHECK_THROWS_AS(cmd_report(a), DataError);
    }

    SUBCASE("stages after gen-data refuse a mismatched cache") {
        ExperimentConfig other = cfg;
        other.dataset.synthetic.dim = 24;
        other.dims = {24, 16, 2, 16, 24};
        CHECK_THROWS_AS(cmd_train(other), DataError);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

// Command-line driver: each subcommand runs one experiment stage and writes
// its outputs under the configured output directory.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aebound/errors.hpp"
#include "aebound/experiment.hpp"
#include "aebound/parallel.hpp"
#include "aebound/report.hpp"
#include "json.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t threads = 1;
    std::vector<std::string> overrides;
    std::string checkpoint;
};

aebound::ExperimentConfig load_config(const Options& opt) {
    std::string text = "{}";
    if (!opt.config_path.empty()) {
        try {
            text = aebound::read_text(opt.config_path);
        } catch (const aebound::DataError& e) {
            throw aebound::ConfigError(e.what());
        }
    }
    for (const auto& o : opt.overrides) text = aebound::apply_override(text, o);
    if (opt.seed) text = aebound::apply_override(text, "seed=" + std::to_string(*opt.seed));
    if (!opt.out.empty()) text = aebound::apply_override(text, "output_dir=" + nlohmann::json(opt.out).dump());
    auto cfg = aebound::config_from_json(text);
    cfg.validate();
    return cfg;
}

std::optional<std::filesystem::path> checkpoint_of(const Options& opt) {
    if (opt.checkpoint.empty()) return std::nullopt;
    return opt.checkpoint;
}

void print_ssl(const aebound::SSLSummary& s) {
    std::printf("ssl_error %.4f +- %.4f, supervised_error %.4f +- %.4f over %zu seeds\n", s.ssl_error_mean,
                s.ssl_error_std, s.supervised_error_mean, s.supervised_error_std, s.runs.size());
}

int run(const std::string& command, const Options& opt) {
    if (command == "report") {
        std::filesystem::path dir = opt.out;
        if (dir.empty()) dir = load_config(opt).output_dir;
        std::fputs(aebound::cmd_report(dir).c_str(), stdout);
        return kOk;
    }
    const auto cfg = load_config(opt);
    const auto ckpt = checkpoint_of(opt);
    std::printf("config %s -> %s\n", aebound::config_hash(cfg).c_str(), cfg.output_dir.string().c_str());
    const bool all = command == "run";
    if (all || command == "gen-data") {
        const auto r = aebound::cmd_gen_data(cfg);
        std::printf("gen-data: %zu train, %zu test, dimension %zu\n", r.train_size, r.test_size, r.dim);
    }
    if (all || command == "train") {
        for (const auto& m : aebound::cmd_train(cfg))
            std::printf("train: fraction %.3g, m=%zu, surrogate loss %.5f -> %.5f\n", m.sample_frac, m.m,
                        m.loss_history.front(), m.loss_history.back());
    }
    if (all || command == "bounds") {
        for (const auto& b : aebound::cmd_bounds(cfg))
            std::printf("bounds: m=%zu normalized gap %.5f, test loss %.4f, mu_hat %.4f <= %.4f\n", b.report.m,
                        b.report.delta_term_normalized, b.report.test_margin_loss_g1, b.report.mu_hat,
                        b.report.mu_bound_worst);
    }
    if (all || command == "geometry") {
        const auto g = aebound::cmd_geometry(cfg, ckpt);
        std::printf("geometry: eta %.4f, eta' %.4f (theory %.4f%s), C %.4g / %.4g, audit violations %zu/%zu\n",
                    g.eta_hat, g.eta_prime_hat, g.eta_prime_theoretical.value,
                    g.eta_prime_theoretical.vacuous ? ", vacuous" : "", g.lipschitz_upper, g.lipschitz_empirical,
                    g.audit.decoded_violations, g.audit.encoded_violations);
    }
    if (all || command == "geps") std::printf("geps: %zu rows\n", aebound::cmd_geps(cfg, ckpt).size());
    if (all || command == "ssl") print_ssl(aebound::cmd_ssl(cfg, ckpt));
    if (all) aebound::cmd_report(cfg.output_dir);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Autoencoder margin-loss bounds and cluster-preservation experiments"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("-c,--config", opt.config_path, "experiment config (JSON); defaults apply when omitted");
    app.add_option("--seed", opt.seed, "seed for every stochastic stage (overrides the config)");
    app.add_option("-o,--out", opt.out, "output directory (overrides the config)");
    app.add_option("--threads", opt.threads, "worker thread cap, 0 = hardware concurrency")->capture_default_str();
    app.add_option("--set", opt.overrides, "config override key.path=<json value>, repeatable");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"gen-data", "generate or ingest the dataset and cache it as IDX"},
        {"train", "train one autoencoder per sample fraction"},
        {"bounds", "generalization and mu bounds per trained model"},
        {"geometry", "cluster margins, Lipschitz estimates and the 3-epsilon audit"},
        {"geps", "G_epsilon coverage curve per trained model"},
        {"ssl", "cluster-then-label versus nearest-neighbour over seeds"},
        {"report", "merge outputs into summary.json"},
        {"run", "every stage in order"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        if (name == "geometry" || name == "geps" || name == "ssl")
            sub->add_option("--checkpoint", opt.checkpoint, "model to analyse instead of the final one");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    aebound::set_max_threads(opt.threads);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, opt);
    } catch (const aebound::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const aebound::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const aebound::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kNumeric;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kNumeric;
    }
}

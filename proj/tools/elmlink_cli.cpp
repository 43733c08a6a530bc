// elmlink: sweep runner for the PAM-4 link / photonic reservoir simulator.
//
//   elmlink run <config> [--threads n] [--out dir] [--seed-offset k]
//   elmlink validate <config>
//   elmlink report <csv> --group-by col[,col...] [--out dir]
//   elmlink keys

#include "elmlink/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

std::vector<std::string> split_columns(const std::vector<std::string>& raw) {
    std::vector<std::string> out;
    for (const auto& item : raw) {
        std::string cur;
        for (char c : item) {
            if (c == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAM-4 SSB link simulator with a photonic ELM/TDRC readout"};
    app.require_subcommand(1);

    int threads = 1;
    std::string out_dir;
    std::uint64_t seed_offset = 0;
    bool quiet = false;
    app.add_option("--threads", threads, "Worker threads for sweep points")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed-offset", seed_offset, "Added to every configured seed");
    app.add_flag("-q,--quiet", quiet, "No per-point progress on stderr");

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run every sweep point x seed and write results.csv");
    run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    run->fallthrough();

    auto* validate = app.add_subcommand("validate", "Parse and check a config without running it");
    validate->add_option("config", config_path, "Config file")->required();

    std::string csv_path;
    std::vector<std::string> group_by;
    auto* report = app.add_subcommand("report", "Median/quartile/extreme log10 BER per group");
    report->add_option("csv", csv_path, "results.csv")->required()->check(CLI::ExistingFile);
    report->add_option("--group-by", group_by, "Columns to group on (comma separated)")->required();
    report->fallthrough();

    auto* keys = app.add_subcommand("keys", "List every config key");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*keys) {
            for (const auto& k : elmlink::config_keys()) std::cout << k << '\n';
            return 0;
        }
        if (*validate) {
            const auto cfg = elmlink::load_config(config_path);
            elmlink::validate_config(cfg, config_path);
            std::cerr << config_path << ": ok, " << cfg.grid_size() << " sweep points x " << cfg.seeds.size()
                      << " seeds = " << cfg.grid_size() * cfg.seeds.size() << " runs\n";
            return 0;
        }
        if (*run) {
            const auto cfg = elmlink::load_config(config_path);
            elmlink::validate_config(cfg, config_path);
            elmlink::RunOptions opts;
            opts.threads = threads;
            opts.seed_offset = seed_offset;
            opts.quiet = quiet;
            if (!out_dir.empty()) opts.out_dir = out_dir;
            const auto csv = elmlink::run_experiment(cfg, opts);
            std::cerr << "wrote " << csv.string() << '\n';
            return 0;
        }
        if (*report) {
            const auto summary = elmlink::summarize_file(csv_path, split_columns(group_by));
            for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
            std::filesystem::path dir = out_dir.empty() ? std::filesystem::path(csv_path).parent_path()
                                                        : std::filesystem::path(out_dir);
            if (!dir.empty()) std::filesystem::create_directories(dir);
            const auto path = dir / "summary.csv";
            std::ofstream os(path, std::ios::trunc);
            os << elmlink::summary_csv(summary);
            if (!os) throw elmlink::SimulationError("cannot write " + path.string());
            std::cerr << "wrote " << path.string() << " (" << summary.rows.size() << " groups)\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

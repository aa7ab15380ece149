#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qsanov/experiments.hpp"

using namespace qsanov;

int main(int argc, char** argv) {
    CLI::App app{"finite-blocklength laboratory for quantum hypothesis testing"};
    app.require_subcommand(1);

    std::string config_path, out_path, format;
    std::uint64_t seed = 0;
    int max_dim = 0;
    bool quiet = false;

    struct Sub {
        const char* name;
        ExperimentKind kind;
        const char* blurb;
        CLI::App* cmd = nullptr;
    } subs[] = {
        {"stein", ExperimentKind::stein, "null-vs-reference error exponent sweep"},
        {"sanov", ExperimentKind::sanov, "family separating projector masses"},
        {"aep", ExperimentKind::aep, "relative AEP window mass sweep"},
        {"mixing", ExperimentKind::mixing_audit, "mixing coefficients and rate probes"},
        {"stationary", ExperimentKind::stationary, "mixture null against an ergodic reference"},
    };
    for (Sub& s : subs) {
        s.cmd = app.add_subcommand(s.name, s.blurb);
        s.cmd->add_option("--config", config_path, "JSON experiment config")
            ->required()
            ->check(CLI::ExistingFile);
        s.cmd->add_option("--out", out_path, "output file (default: stdout)");
        s.cmd->add_option("--seed", seed, "override the config seed");
        s.cmd->add_option("--max-dim", max_dim, "override the dense-dimension guard");
        s.cmd->add_option("--format", format, "csv or jsonl")
            ->check(CLI::IsMember({"csv", "jsonl"}));
        s.cmd->add_flag("--quiet", quiet, "suppress the summary line");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const Sub* active = nullptr;
        for (Sub& s : subs)
            if (s.cmd->parsed()) active = &s;
        ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
        if (cfg.kind != active->kind)
            throw std::invalid_argument(std::string("config.kind: '") + to_string(cfg.kind) +
                                        "' does not match subcommand '" + active->name + "'");
        if (active->cmd->count("--seed")) cfg.seed = seed;
        if (active->cmd->count("--max-dim")) cfg.max_dim = max_dim;
        if (active->cmd->count("--out")) cfg.out_path = out_path;
        if (active->cmd->count("--format")) cfg.format = format;

        std::vector<RunRecord> rows = run_experiment(cfg);
        if (cfg.out_path.empty())
            std::cout << (cfg.format == "jsonl" ? to_jsonl(rows) : to_csv(rows));
        else
            emit(rows, cfg);

        if (!quiet) {
            std::cerr << active->name << ": " << rows.size() << " rows";
            if (!rows.empty())
                std::cerr << ", target " << rows.back().target.str() << ", final gap "
                          << rows.back().gap;
            if (!cfg.out_path.empty()) std::cerr << " -> " << cfg.out_path;
            std::cerr << "\n";
        }
        return 0;
    } catch (const AcceptanceFailure& e) {
        std::cerr << "acceptance check failed: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

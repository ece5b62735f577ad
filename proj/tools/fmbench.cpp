// fmbench: erase-count benchmark and differential verifier for the FM tree.

#include <fmt/format.h>

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fmtree/bench.hpp"
#include "fmtree/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flash-memory tree benchmark"};
    app.require_subcommand(1);

    fmtree::BenchConfig config;
    std::string format = "json";
    std::string out_path;
    unsigned jobs = 1;

    auto* run = app.add_subcommand("run", "Run the erase-count experiment and emit a report");
    run->add_option("--seed", config.seed, "Workload seed");
    run->add_option("--trials", config.trials, "Independent trials");
    run->add_option("--baseline-inserts", config.baseline_inserts, "Initial inserts per trial");
    run->add_option("--ops", config.mixed_ops, "Mixed insert/delete ops per trial");
    run->add_option("--insert-fraction", config.insert_fraction, "Insert probability in the mixed phase")
        ->check(CLI::Range(0.0, 1.0));
    run->add_option("--q", config.q, "Levels per flash cell");
    run->add_option("--blocks", config.blocks, "Blocks per device");
    run->add_option("--slots-per-node", config.slots_per_node, "Slots per node (B)");
    run->add_option("--key-bits", config.key_bits, "Key size in bits");
    run->add_option("--payload-bits", config.payload_bits, "Payload size in bits");
    run->add_option("--gc-fraction", config.gc_barren_fraction, "Garbage fraction that triggers a rebuild");
    run->add_flag("--always-erase-on-rewrite", config.always_erase_on_rewrite,
                  "Baseline erases before every node rewrite");
    run->add_option("--t-read", config.weights.read_us, "Synthetic cost of a cell read (us)");
    run->add_option("--t-write", config.weights.write_us, "Synthetic cost of a cell program (us)");
    run->add_option("--t-erase", config.weights.erase_us, "Synthetic cost of a block erase (us)");
    run->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    run->add_option("--out", out_path, "Report path (stdout when omitted)");
    run->add_option("--jobs", jobs, "Worker threads for trials");

    std::uint64_t verify_seed = 1;
    std::uint32_t verify_seeds = 10;
    std::size_t verify_ops = 10000;
    std::uint32_t verify_blocks = 1024;
    auto* verify = app.add_subcommand("verify", "Differential check of both trees against a reference map");
    verify->add_option("--seed", verify_seed, "First seed");
    verify->add_option("--seeds", verify_seeds, "Number of consecutive seeds");
    verify->add_option("--ops", verify_ops, "Ops per seed");
    verify->add_option("--blocks", verify_blocks, "Blocks per device");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*run) {
        const auto report_format =
            format == "csv" ? fmtree::ReportFormat::Csv : fmtree::ReportFormat::Json;
        try {
            fmtree::validate(config);
        } catch (const fmtree::Error& e) {
            std::cerr << "fmbench: invalid configuration: " << e.what() << '\n';
            return kExitUsage;
        }
        try {
            const auto report = fmtree::run_experiment(config, jobs);
            if (out_path.empty()) {
                std::cout << fmtree::render_report(report, report_format);
            } else {
                fmtree::emit_report(report, report_format, out_path);
            }
        } catch (const fmtree::Error& e) {
            std::cerr << "fmbench: " << e.what() << '\n';
            return kExitFailure;
        }
        return kExitOk;
    }

    const auto failures = fmtree::run_verify(verify_seed, verify_seeds, verify_ops, verify_blocks);
    for (const auto& f : failures) {
        std::cerr << fmt::format("seed {} {} tree: op {} expected {} got {}\n", f.seed,
                                 fmtree::to_string(f.tree), f.divergence.op_index,
                                 f.divergence.expected, f.divergence.actual);
    }
    std::cout << fmt::format("verify: {} seeds x {} ops x 2 trees, {} divergences\n",
                             verify_seeds, verify_ops, failures.size());
    return failures.empty() ? kExitOk : kExitFailure;
}

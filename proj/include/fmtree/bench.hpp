#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fmtree/flash_device.hpp"
#include "fmtree/model_oracle.hpp"
#include "fmtree/tree_config.hpp"

namespace fmtree {

enum class ReportFormat : std::uint8_t { Json, Csv };

struct TimingWeights {
    double read_us = 25.0;
    double write_us = 200.0;
    double erase_us = 1750.0;

    bool operator==(const TimingWeights&) const = default;
};

struct BenchConfig {
    std::uint64_t seed = 1;
    std::uint64_t baseline_inserts = 1000;
    std::uint64_t mixed_ops = 10000;
    std::uint32_t trials = 4;
    double insert_fraction = 0.5;
    std::uint32_t q = 8;
    std::uint32_t blocks = 4096;
    std::uint32_t slots_per_node = 16;
    std::uint32_t key_bits = 32;
    std::uint32_t payload_bits = 32;
    double gc_barren_fraction = 0.25;
    bool always_erase_on_rewrite = false;
    TimingWeights weights;

    bool operator==(const BenchConfig&) const = default;
};

// Throws InvalidConfig / ConfigTooLarge / InvalidGeometry on bad settings.
void validate(const BenchConfig& config);

// Device geometry and tree parameters implied by a BenchConfig: digit widths
// from the bit counts (payloads also wide enough for a block id) and blocks
// sized to exactly one node.
FlashGeometry bench_geometry(const BenchConfig& config);
TreeConfig bench_tree_config(const BenchConfig& config);

// Deterministic in (config.seed, trial): `baseline_inserts` uniform inserts,
// then `mixed_ops` ops that insert with probability insert_fraction and
// otherwise delete a uniformly chosen live key (an insert when nothing is live).
std::vector<WorkloadOp> generate_workload(const BenchConfig& config, std::uint32_t trial);

struct WearSummary {
    std::uint64_t max_erases = 0;
    double mean_erases = 0.0;

    bool operator==(const WearSummary&) const = default;
};

struct TreeReport {
    OpCounters counters;
    WearSummary wear;
    TreeStats stats;
    double synthetic_cost_us = 0.0;

    bool operator==(const TreeReport&) const = default;
};

struct TrialReport {
    std::uint32_t trial = 0;
    TreeReport fm;
    TreeReport baseline;
    double erase_ratio = 0.0;    // baseline / max(fm, 1)
    double read_ratio = 0.0;
    double program_ratio = 0.0;

    bool operator==(const TrialReport&) const = default;
};

struct TreeMeans {
    double cell_reads = 0.0;
    double cell_programs = 0.0;
    double block_erases = 0.0;
    double max_block_erases = 0.0;
    double synthetic_cost_us = 0.0;

    bool operator==(const TreeMeans&) const = default;
};

struct ExperimentMeans {
    TreeMeans fm;
    TreeMeans baseline;
    double erase_ratio = 0.0;
    double read_ratio = 0.0;
    double program_ratio = 0.0;

    bool operator==(const ExperimentMeans&) const = default;
};

struct ExperimentReport {
    BenchConfig config;
    std::vector<TrialReport> trials;
    ExperimentMeans means;

    bool operator==(const ExperimentReport&) const = default;
};

double synthetic_cost(const OpCounters& counters, const TimingWeights& weights) noexcept;

// Replays one workload into a fresh FM tree and a fresh baseline tree. Counters
// cover the workload only. Throws TrialFailure when either tree fails.
TrialReport run_trial(const BenchConfig& config, std::uint32_t trial);

// Trials 0..trials-1 with their means. `jobs` > 1 runs trials on worker
// threads; the report does not depend on it.
ExperimentReport run_experiment(const BenchConfig& config, unsigned jobs = 1);

ExperimentMeans compute_means(const std::vector<TrialReport>& trials);

std::string render_report(const ExperimentReport& report, ReportFormat format);
ExperimentReport parse_json_report(const std::string& text);

// Throws IoFailure when the destination cannot be written.
void emit_report(const ExperimentReport& report, ReportFormat format,
                 const std::filesystem::path& destination);

inline constexpr const char* kCsvHeader =
    "trial,tree,cell_reads,cell_programs,block_erases,max_block_erases,erase_ratio,read_ratio,"
    "program_ratio,synthetic_cost_us";

struct VerifyFailure {
    std::uint64_t seed = 0;
    TreeKind tree = TreeKind::Fm;
    Divergence divergence;
};

// Differential suite: seeds seed .. seed+seeds-1, `ops` mixed ops each, both trees.
std::vector<VerifyFailure> run_verify(std::uint64_t seed, std::uint32_t seeds, std::size_t ops,
                                      std::uint32_t blocks = 1024);

}  // namespace fmtree

#include "fmtree/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "fmtree/btree_baseline.hpp"
#include "fmtree/errors.hpp"
#include "fmtree/fm_tree.hpp"
#include "fmtree/slot_codec.hpp"

namespace fmtree {

using nlohmann::json;

void validate(const BenchConfig& config) {
    if (!(config.insert_fraction >= 0.0 && config.insert_fraction <= 1.0)) {
        throw InvalidConfig("insert_fraction must lie in [0, 1]");
    }
    if (config.key_bits < 1 || config.key_bits > 63 || config.payload_bits < 1 ||
        config.payload_bits > 63) {
        throw InvalidConfig("key_bits and payload_bits must lie in [1, 63]");
    }
    FlashDevice probe(FlashGeometry{config.q, 1, 1});  // q bounds
    const FlashGeometry geometry = bench_geometry(config);
    validate_tree_config(bench_tree_config(config), geometry);
}

TreeConfig bench_tree_config(const BenchConfig& config) {
    TreeConfig tree;
    tree.slots_per_node = config.slots_per_node;
    tree.key_width = digits_for_bits(config.key_bits, config.q);
    std::uint32_t block_digits = 1;
    while (word_capacity(block_digits, config.q) < config.blocks) ++block_digits;
    tree.payload_width = std::max(digits_for_bits(config.payload_bits, config.q), block_digits);
    tree.gc_barren_fraction = config.gc_barren_fraction;
    tree.always_erase_on_rewrite = config.always_erase_on_rewrite;
    return tree;
}

FlashGeometry bench_geometry(const BenchConfig& config) {
    const auto cells = node_cells(bench_tree_config(config));
    return {config.q, static_cast<std::uint32_t>(cells), config.blocks};
}

namespace {

class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint32_t trial) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          trial, 0x464d7472u};
        engine_.seed(seq);
    }
    std::uint64_t bits(std::uint32_t n) { return engine_() >> (64 - n); }
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
    std::mt19937_64 engine_;
};

// Live keys with O(1) uniform sampling and removal.
class LiveKeys {
public:
    void add(std::uint64_t key) {
        if (index_.contains(key)) return;
        index_.emplace(key, keys_.size());
        keys_.push_back(key);
    }
    void remove_at(std::size_t i) {
        const std::uint64_t key = keys_[i];
        keys_[i] = keys_.back();
        index_[keys_[i]] = i;
        keys_.pop_back();
        index_.erase(key);
    }
    bool empty() const { return keys_.empty(); }
    std::size_t size() const { return keys_.size(); }
    std::uint64_t at(std::size_t i) const { return keys_[i]; }

private:
    std::vector<std::uint64_t> keys_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
};

}  // namespace

std::vector<WorkloadOp> generate_workload(const BenchConfig& config, std::uint32_t trial) {
    TrialRng rng(config.seed, trial);
    LiveKeys live;
    std::vector<WorkloadOp> ops;
    ops.reserve(config.baseline_inserts + config.mixed_ops);
    auto insert = [&] {
        const std::uint64_t key = rng.bits(config.key_bits);
        ops.push_back(WorkloadOp::insert(key, rng.bits(config.payload_bits)));
        live.add(key);
    };
    for (std::uint64_t i = 0; i < config.baseline_inserts; ++i) insert();
    for (std::uint64_t i = 0; i < config.mixed_ops; ++i) {
        if (rng.unit() < config.insert_fraction || live.empty()) {
            insert();
            continue;
        }
        const std::size_t victim = rng.below(live.size());
        ops.push_back(WorkloadOp::erase(live.at(victim)));
        live.remove_at(victim);
    }
    return ops;
}

double synthetic_cost(const OpCounters& c, const TimingWeights& w) noexcept {
    return static_cast<double>(c.cell_reads) * w.read_us +
           static_cast<double>(c.cell_programs) * w.write_us +
           static_cast<double>(c.block_erases) * w.erase_us;
}

namespace {

template <typename Tree>
TreeReport run_tree(const BenchConfig& config, const std::vector<WorkloadOp>& ops,
                    const char* name, std::uint32_t trial) {
    FlashDevice device(bench_geometry(config));
    Tree tree(device, bench_tree_config(config));
    device.reset_counters();
    std::size_t i = 0;
    try {
        for (; i < ops.size(); ++i) {
            const auto& op = ops[i];
            switch (op.kind) {
                case WorkloadOp::Kind::Insert: tree.insert(op.key, op.payload); break;
                case WorkloadOp::Kind::Delete: tree.remove(op.key); break;
                case WorkloadOp::Kind::Search: tree.search(op.key); break;
            }
        }
    } catch (const Error& e) {
        throw TrialFailure(fmt::format("trial {} ({} tree) failed at op {} of {}: {} [blocks={}]",
                                       trial, name, i, ops.size(), e.what(), config.blocks));
    }
    TreeReport report;
    report.counters = device.counters();
    const WearStats wear = device.wear_stats();
    report.wear = {wear.max_erases, wear.mean_erases};
    report.stats = tree.stats();
    report.synthetic_cost_us = synthetic_cost(report.counters, config.weights);
    return report;
}

double ratio(std::uint64_t baseline, std::uint64_t fm) {
    return static_cast<double>(baseline) / static_cast<double>(std::max<std::uint64_t>(fm, 1));
}

}  // namespace

TrialReport run_trial(const BenchConfig& config, std::uint32_t trial) {
    validate(config);
    const auto ops = generate_workload(config, trial);
    TrialReport report;
    report.trial = trial;
    report.fm = run_tree<FmTree>(config, ops, "fm", trial);
    report.baseline = run_tree<BaselineTree>(config, ops, "baseline", trial);
    report.erase_ratio =
        ratio(report.baseline.counters.block_erases, report.fm.counters.block_erases);
    report.read_ratio = ratio(report.baseline.counters.cell_reads, report.fm.counters.cell_reads);
    report.program_ratio =
        ratio(report.baseline.counters.cell_programs, report.fm.counters.cell_programs);
    return report;
}

ExperimentMeans compute_means(const std::vector<TrialReport>& trials) {
    ExperimentMeans m;
    if (trials.empty()) return m;
    auto add = [](TreeMeans& acc, const TreeReport& r) {
        acc.cell_reads += static_cast<double>(r.counters.cell_reads);
        acc.cell_programs += static_cast<double>(r.counters.cell_programs);
        acc.block_erases += static_cast<double>(r.counters.block_erases);
        acc.max_block_erases += static_cast<double>(r.wear.max_erases);
        acc.synthetic_cost_us += r.synthetic_cost_us;
    };
    for (const auto& t : trials) {
        add(m.fm, t.fm);
        add(m.baseline, t.baseline);
        m.erase_ratio += t.erase_ratio;
        m.read_ratio += t.read_ratio;
        m.program_ratio += t.program_ratio;
    }
    const auto n = static_cast<double>(trials.size());
    for (TreeMeans* tm : {&m.fm, &m.baseline}) {
        tm->cell_reads /= n;
        tm->cell_programs /= n;
        tm->block_erases /= n;
        tm->max_block_erases /= n;
        tm->synthetic_cost_us /= n;
    }
    m.erase_ratio /= n;
    m.read_ratio /= n;
    m.program_ratio /= n;
    return m;
}

ExperimentReport run_experiment(const BenchConfig& config, unsigned jobs) {
    validate(config);
    ExperimentReport report;
    report.config = config;
    report.trials.resize(config.trials);
    if (jobs <= 1) {
        for (std::uint32_t t = 0; t < config.trials; ++t) report.trials[t] = run_trial(config, t);
    } else {
        // Trials own their devices; results are joined in trial order.
        std::uint32_t next = 0;
        while (next < config.trials) {
            std::vector<std::future<TrialReport>> batch;
            for (unsigned j = 0; j < jobs && next < config.trials; ++j, ++next) {
                batch.push_back(std::async(std::launch::async, run_trial, std::cref(config), next));
            }
            const std::uint32_t first = next - static_cast<std::uint32_t>(batch.size());
            for (std::size_t j = 0; j < batch.size(); ++j) report.trials[first + j] = batch[j].get();
        }
    }
    report.means = compute_means(report.trials);
    return report;
}

// JSON mapping

static void to_json(json& j, const TimingWeights& w) {
    j = json{{"read_us", w.read_us}, {"write_us", w.write_us}, {"erase_us", w.erase_us}};
}
static void from_json(const json& j, TimingWeights& w) {
    j.at("read_us").get_to(w.read_us);
    j.at("write_us").get_to(w.write_us);
    j.at("erase_us").get_to(w.erase_us);
}

static void to_json(json& j, const BenchConfig& c) {
    j = json{{"seed", c.seed},
             {"baseline_inserts", c.baseline_inserts},
             {"mixed_ops", c.mixed_ops},
             {"trials", c.trials},
             {"insert_fraction", c.insert_fraction},
             {"q", c.q},
             {"blocks", c.blocks},
             {"slots_per_node", c.slots_per_node},
             {"key_bits", c.key_bits},
             {"payload_bits", c.payload_bits},
             {"gc_barren_fraction", c.gc_barren_fraction},
             {"always_erase_on_rewrite", c.always_erase_on_rewrite},
             {"timing_weights", c.weights}};
}
static void from_json(const json& j, BenchConfig& c) {
    j.at("seed").get_to(c.seed);
    j.at("baseline_inserts").get_to(c.baseline_inserts);
    j.at("mixed_ops").get_to(c.mixed_ops);
    j.at("trials").get_to(c.trials);
    j.at("insert_fraction").get_to(c.insert_fraction);
    j.at("q").get_to(c.q);
    j.at("blocks").get_to(c.blocks);
    j.at("slots_per_node").get_to(c.slots_per_node);
    j.at("key_bits").get_to(c.key_bits);
    j.at("payload_bits").get_to(c.payload_bits);
    j.at("gc_barren_fraction").get_to(c.gc_barren_fraction);
    j.at("always_erase_on_rewrite").get_to(c.always_erase_on_rewrite);
    j.at("timing_weights").get_to(c.weights);
}

static void to_json(json& j, const TreeReport& r) {
    j = json{{"cell_reads", r.counters.cell_reads},
             {"cell_programs", r.counters.cell_programs},
             {"block_erases", r.counters.block_erases},
             {"max_block_erases", r.wear.max_erases},
             {"mean_block_erases", r.wear.mean_erases},
             {"height", r.stats.height},
             {"live_count", r.stats.live_count},
             {"barren_blocks", r.stats.barren_blocks},
             {"dead_slots", r.stats.dead_slots},
             {"inserted_total", r.stats.inserted_total},
             {"synthetic_cost_us", r.synthetic_cost_us}};
}
static void from_json(const json& j, TreeReport& r) {
    j.at("cell_reads").get_to(r.counters.cell_reads);
    j.at("cell_programs").get_to(r.counters.cell_programs);
    j.at("block_erases").get_to(r.counters.block_erases);
    j.at("max_block_erases").get_to(r.wear.max_erases);
    j.at("mean_block_erases").get_to(r.wear.mean_erases);
    j.at("height").get_to(r.stats.height);
    j.at("live_count").get_to(r.stats.live_count);
    j.at("barren_blocks").get_to(r.stats.barren_blocks);
    j.at("dead_slots").get_to(r.stats.dead_slots);
    j.at("inserted_total").get_to(r.stats.inserted_total);
    j.at("synthetic_cost_us").get_to(r.synthetic_cost_us);
}

static void to_json(json& j, const TrialReport& t) {
    j = json{{"trial", t.trial},
             {"fm", t.fm},
             {"baseline", t.baseline},
             {"erase_ratio", t.erase_ratio},
             {"read_ratio", t.read_ratio},
             {"program_ratio", t.program_ratio}};
}
static void from_json(const json& j, TrialReport& t) {
    j.at("trial").get_to(t.trial);
    j.at("fm").get_to(t.fm);
    j.at("baseline").get_to(t.baseline);
    j.at("erase_ratio").get_to(t.erase_ratio);
    j.at("read_ratio").get_to(t.read_ratio);
    j.at("program_ratio").get_to(t.program_ratio);
}

static void to_json(json& j, const TreeMeans& m) {
    j = json{{"cell_reads", m.cell_reads},
             {"cell_programs", m.cell_programs},
             {"block_erases", m.block_erases},
             {"max_block_erases", m.max_block_erases},
             {"synthetic_cost_us", m.synthetic_cost_us}};
}
static void from_json(const json& j, TreeMeans& m) {
    j.at("cell_reads").get_to(m.cell_reads);
    j.at("cell_programs").get_to(m.cell_programs);
    j.at("block_erases").get_to(m.block_erases);
    j.at("max_block_erases").get_to(m.max_block_erases);
    j.at("synthetic_cost_us").get_to(m.synthetic_cost_us);
}

static void to_json(json& j, const ExperimentMeans& m) {
    j = json{{"fm", m.fm},
             {"baseline", m.baseline},
             {"erase_ratio", m.erase_ratio},
             {"read_ratio", m.read_ratio},
             {"program_ratio", m.program_ratio}};
}
static void from_json(const json& j, ExperimentMeans& m) {
    j.at("fm").get_to(m.fm);
    j.at("baseline").get_to(m.baseline);
    j.at("erase_ratio").get_to(m.erase_ratio);
    j.at("read_ratio").get_to(m.read_ratio);
    j.at("program_ratio").get_to(m.program_ratio);
}

namespace {

void csv_row(std::ostringstream& out, const std::string& trial, const char* tree, double reads,
             double programs, double erases, double max_erases, double erase_ratio,
             double read_ratio, double program_ratio, double cost) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", trial, tree, reads, programs, erases,
                       max_erases, erase_ratio, read_ratio, program_ratio, cost);
}

}  // namespace

std::string render_report(const ExperimentReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json doc{{"config", report.config}, {"trials", report.trials}, {"means", report.means}};
        return doc.dump(2) + "\n";
    }
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& t : report.trials) {
        for (const auto& [name, r] : {std::pair{"fm", &t.fm}, std::pair{"baseline", &t.baseline}}) {
            out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", t.trial, name,
                               r->counters.cell_reads, r->counters.cell_programs,
                               r->counters.block_erases, r->wear.max_erases, t.erase_ratio,
                               t.read_ratio, t.program_ratio, r->synthetic_cost_us);
        }
    }
    const auto& m = report.means;
    for (const auto& [name, tm] : {std::pair{"fm", &m.fm}, std::pair{"baseline", &m.baseline}}) {
        csv_row(out, "mean", name, tm->cell_reads, tm->cell_programs, tm->block_erases,
                tm->max_block_erases, m.erase_ratio, m.read_ratio, m.program_ratio,
                tm->synthetic_cost_us);
    }
    return out.str();
}

ExperimentReport parse_json_report(const std::string& text) {
    const json doc = json::parse(text);
    ExperimentReport report;
    doc.at("config").get_to(report.config);
    doc.at("trials").get_to(report.trials);
    doc.at("means").get_to(report.means);
    return report;
}

void emit_report(const ExperimentReport& report, ReportFormat format,
                 const std::filesystem::path& destination) {
    std::ofstream out(destination, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + destination.string() + " for writing");
    out << render_report(report, format);
    out.flush();
    if (!out) throw IoFailure("failed writing " + destination.string());
}

std::vector<VerifyFailure> run_verify(std::uint64_t seed, std::uint32_t seeds, std::size_t ops,
                                      std::uint32_t blocks) {
    std::vector<VerifyFailure> failures;
    const CheckSetup setup = default_check_setup(blocks);
    for (std::uint64_t s = seed; s < seed + seeds; ++s) {
        const auto workload = differential_workload(s, ops);
        for (TreeKind kind : {TreeKind::Fm, TreeKind::Baseline}) {
            const Verdict verdict = differential_check(workload, kind, setup);
            if (!verdict.pass) failures.push_back({s, kind, *verdict.first_divergence});
        }
    }
    return failures;
}

}  // namespace fmtree

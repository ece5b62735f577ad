// Acceptance run: one PASS/FAIL line per criterion. Argument 1 is the fmbench binary.

#include <fmt/format.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fmtree/bench.hpp"
#include "fmtree/errors.hpp"
#include "fmtree/flash_device.hpp"
#include "fmtree/fm_tree.hpp"
#include "fmtree/model_oracle.hpp"

namespace fs = std::filesystem;
using namespace fmtree;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++g_failures;
    fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
    std::fflush(stdout);
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs a shell command and returns its exit status.
int run_command(const std::string& command) {
    const int status = std::system(command.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void differential_correctness(const std::string& fmbench) {
    const auto start = Clock::now();
    const int code = run_command(fmt::format("\"{}\" verify --seeds 10 --ops 10000", fmbench));
    const double elapsed = seconds_since(start);
    report("differential correctness", code == 0 && elapsed < 60.0,
           fmt::format("fmbench verify 10 seeds x 10000 ops exit={} in {:.2f}s", code, elapsed));
}

void flash_fuzz() {
    const FlashGeometry geometry{8, 64, 16};
    FlashDevice device(geometry);
    std::vector<int> shadow(static_cast<std::size_t>(geometry.cells_per_block) * geometry.block_count, 0);
    OpCounters expected;
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<std::uint32_t> pick_block(0, geometry.block_count - 1);
    std::uniform_int_distribution<std::uint32_t> pick_cell(0, geometry.cells_per_block - 1);
    std::uniform_int_distribution<int> pick_level(0, static_cast<int>(geometry.q) - 1);
    std::uniform_int_distribution<int> pick_action(0, 99);
    std::string problem;
    constexpr int kCalls = 1'000'000;
    for (int call = 0; call < kCalls && problem.empty(); ++call) {
        const BlockId b = pick_block(rng);
        const int action = pick_action(rng);
        if (action < 2) {
            device.erase_block(b);
            std::fill_n(shadow.begin() + static_cast<std::ptrdiff_t>(b) * geometry.cells_per_block,
                        geometry.cells_per_block, 0);
            ++expected.block_erases;
            continue;
        }
        const std::uint32_t c = pick_cell(rng);
        int& level = shadow[static_cast<std::size_t>(b) * geometry.cells_per_block + c];
        if (action < 60) {
            const int target = pick_level(rng);
            bool threw = false;
            try {
                device.program_cell(b, c, static_cast<CellLevel>(target));
            } catch (const MonotonicityViolation&) {
                threw = true;
            }
            if (target < level && !threw) problem = fmt::format("call {}: decrease accepted", call);
            if (target >= level && threw) problem = fmt::format("call {}: raise rejected", call);
            if (target > level) {
                level = target;
                ++expected.cell_programs;
            }
        } else {
            const int observed = device.read_cell(b, c);
            ++expected.cell_reads;
            if (observed < 0 || observed >= static_cast<int>(geometry.q)) {
                problem = fmt::format("call {}: level {} outside [0, q-1]", call, observed);
            } else if (observed != level) {
                problem = fmt::format("call {}: read {} expected {}", call, observed, level);
            }
        }
    }
    if (problem.empty() && !(device.counters() == expected)) problem = "counters do not reconcile";
    report("flash-model soundness", problem.empty(),
           problem.empty() ? fmt::format("{} calls, reads={} programs={} erases={} reconcile",
                                         kCalls, expected.cell_reads, expected.cell_programs,
                                         expected.block_erases)
                           : problem);
}

void erase_dominance() {
    BenchConfig config;
    config.trials = 20;
    const auto result = run_experiment(config);
    bool pass = true;
    std::uint64_t worst_gap = UINT64_MAX;
    for (const auto& t : result.trials) {
        const auto fm = t.fm.counters.block_erases;
        const auto base = t.baseline.counters.block_erases;
        pass = pass && (base >= 1 ? fm < base : fm <= base);
        if (base >= fm) worst_gap = std::min(worst_gap, base - fm);
    }
    report("erase dominance", pass,
           fmt::format("20 default trials, mean fm erases {:.1f} vs baseline {:.1f}, smallest gap {}",
                       result.means.fm.block_erases, result.means.baseline.block_erases,
                       pass ? worst_gap : 0));
}

struct SweepPoint {
    std::uint32_t slots;
    double insert_fraction;
    bool always_erase;
    std::uint32_t blocks;
    double ratio;
};

void protocol_reproduction() {
    const auto start = Clock::now();
    const auto defaults = run_experiment(BenchConfig{});
    const bool default_ok = defaults.means.erase_ratio >= 10.0;

    std::vector<SweepPoint> achieving;
    std::size_t points = 0;
    std::size_t device_full = 0;
    for (std::uint32_t blocks : {4096u, 1024u, 768u, 512u}) {
        for (std::uint32_t slots : {8u, 16u, 32u}) {
            for (double fraction : {0.3, 0.5, 0.7}) {
                for (bool always : {false, true}) {
                    BenchConfig c;
                    c.blocks = blocks;
                    c.slots_per_node = slots;
                    c.insert_fraction = fraction;
                    c.always_erase_on_rewrite = always;
                    ++points;
                    try {
                        const double ratio = run_experiment(c).means.erase_ratio;
                        if (ratio >= 27.0 && ratio <= 72.2) achieving.push_back({slots, fraction, always, blocks, ratio});
                    } catch (const TrialFailure&) {
                        ++device_full;
                    }
                }
            }
        }
    }
    const double elapsed = seconds_since(start);
    std::string detail = fmt::format(
        "default mean erase_ratio {:.1f}; {} of {} sweep points in [27, 72.2] ({} undersized); {:.1f}s",
        defaults.means.erase_ratio, achieving.size(), points, device_full, elapsed);
    for (const auto& a : achieving) {
        detail += fmt::format("\n    erase_ratio {:.1f}: --blocks {} --slots-per-node {} --insert-fraction {}{}",
                              a.ratio, a.blocks, a.slots, a.insert_fraction,
                              a.always_erase ? " --always-erase-on-rewrite" : "");
    }
    report("protocol reproduction", default_ok && !achieving.empty() && elapsed < 300.0, detail);
}

void read_direction() {
    const auto r = run_experiment(BenchConfig{});
    const bool reads = r.means.fm.cell_reads >= r.means.baseline.cell_reads;
    const bool cost = r.means.fm.synthetic_cost_us < r.means.baseline.synthetic_cost_us;
    report("read-count direction", reads && cost,
           fmt::format("mean reads fm {:.0f} vs baseline {:.0f}; synthetic cost fm {:.3g}us vs baseline {:.3g}us",
                       r.means.fm.cell_reads, r.means.baseline.cell_reads,
                       r.means.fm.synthetic_cost_us, r.means.baseline.synthetic_cost_us));
}

std::uint32_t ceil_log(std::uint64_t n, std::uint64_t base) {
    std::uint32_t e = 0;
    for (std::uint64_t p = 1; p < n; p *= base) ++e;
    return e;
}

void logarithmic_behavior() {
    BenchConfig bench;
    const TreeConfig config = bench_tree_config(bench);
    const std::uint32_t half = (config.slots_per_node + 1) / 2;
    std::vector<double> constants;
    bool heights_ok = true;
    std::string detail;
    for (std::uint64_t n : {100u, 1000u, 10000u}) {
        FlashDevice device(bench_geometry(bench));
        FmTree tree(device, config);
        std::mt19937_64 rng(n);
        std::vector<std::uint64_t> keys;
        for (std::uint64_t i = 0; i < n; ++i) {
            const std::uint64_t key = rng() >> 32;
            keys.push_back(key);
            tree.insert(key, i);
        }
        const std::uint32_t bound = 2 + ceil_log(n, half);
        heights_ok = heights_ok && tree.height() <= bound;

        constexpr int kSearches = 2000;
        device.reset_counters();
        std::uniform_int_distribution<std::size_t> pick(0, keys.size() - 1);
        for (int s = 0; s < kSearches; ++s) tree.search(keys[pick(rng)]);
        const double mean_reads = static_cast<double>(device.counters().cell_reads) / kSearches;
        const double scale = config.slots_per_node * std::log(static_cast<double>(n)) / std::log(half);
        constants.push_back(mean_reads / scale);
        detail += fmt::format("N={} height {} (bound {}) reads/search {:.1f} c={:.3f}; ", n,
                              tree.height(), bound, mean_reads, constants.back());
    }
    const auto [lo, hi] = std::minmax_element(constants.begin(), constants.end());
    const double spread = *hi / *lo;
    detail += fmt::format("c spread {:.2f}", spread);
    report("logarithmic behavior", heights_ok && spread <= 2.0, detail);
}

void lazy_erasure() {
    struct Workload {
        std::string name;
        BenchConfig config;
    };
    std::vector<Workload> workloads;
    for (std::uint32_t blocks : {4096u, 768u, 384u}) {
        for (double fraction : {0.3, 0.5, 0.7}) {
            BenchConfig c;
            c.blocks = blocks;
            c.insert_fraction = fraction;
            workloads.push_back({fmt::format("blocks={} f={}", blocks, fraction), c});
        }
    }
    bool pass = true;
    std::size_t exhausted = 0;
    std::string problem;
    for (const auto& w : workloads) {
        FlashDevice device(bench_geometry(w.config));
        FmTree tree(device, bench_tree_config(w.config));
        bool reached_empty = false;
        try {
            for (const auto& op : generate_workload(w.config, 0)) {
                if (op.kind == WorkloadOp::Kind::Insert) {
                    tree.insert(op.key, op.payload);
                } else {
                    tree.remove(op.key);
                }
                const bool pristine_left = !tree.allocator().pristine.empty();
                if (pristine_left && device.counters().block_erases != 0) {
                    pass = false;
                    problem = fmt::format("{}: erase with {} pristine blocks left", w.name,
                                          tree.allocator().pristine.size());
                    break;
                }
                reached_empty = reached_empty || !pristine_left;
            }
        } catch (const DeviceFull&) {
        }
        exhausted += reached_empty;
        if (!pass) break;
    }
    report("lazy-erasure guarantee", pass,
           pass ? fmt::format("{} workloads, zero erases while pristine blocks remain; {} exhausted the pristine queue",
                              workloads.size(), exhausted)
                : problem);
}

void gc_preservation() {
    constexpr std::size_t kOps = 10000;
    const auto ops = differential_workload(77, kOps);
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> pick(0, kOps - 1);
    std::set<std::size_t> points;
    while (points.size() < 10) points.insert(pick(rng));

    CheckSetup plain = default_check_setup(1024);
    CheckSetup forced = plain;
    forced.rebuild_after.assign(points.begin(), points.end());
    const Verdict without = differential_check(ops, TreeKind::Fm, plain);
    const Verdict with = differential_check(ops, TreeKind::Fm, forced);
    const bool pass = without.pass && with.pass;
    report("GC preservation", pass,
           pass ? fmt::format("10 forced rebuilds in {} ops; outcomes and live entries unchanged", kOps)
                : fmt::format("divergence at op {}",
                              (with.pass ? without : with).first_divergence->op_index));
}

void determinism(const std::string& fmbench) {
    const fs::path dir = fs::temp_directory_path() / fmt::format("fmtree_acceptance_{}", ::getpid());
    fs::create_directories(dir);
    bool pass = true;
    std::string detail;
    for (const char* format : {"json", "csv"}) {
        const fs::path a = dir / fmt::format("a.{}", format);
        const fs::path b = dir / fmt::format("b.{}", format);
        const std::string flags = fmt::format("run --seed 7 --trials 2 --format {}", format);
        const int ca = run_command(fmt::format("\"{}\" {} --out \"{}\"", fmbench, flags, a.string()));
        const int cb = run_command(fmt::format("\"{}\" {} --jobs 2 --out \"{}\"", fmbench, flags, b.string()));
        const std::string ta = read_file(a);
        const std::string tb = read_file(b);
        const bool same = ca == 0 && cb == 0 && !ta.empty() && ta == tb;
        pass = pass && same;
        detail += fmt::format("{} {} bytes {}; ", format, ta.size(), same ? "identical" : "differ");
    }
    fs::remove_all(dir);
    report("determinism", pass, detail + "second run used --jobs 2");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        fmt::print(stderr, "usage: acceptance <path-to-fmbench>\n");
        return 2;
    }
    const std::string fmbench = argv[1];
    const std::vector<std::function<void()>> checks{
        [&] { differential_correctness(fmbench); },
        flash_fuzz,
        erase_dominance,
        protocol_reproduction,
        read_direction,
        logarithmic_behavior,
        lazy_erasure,
        gc_preservation,
        [&] { determinism(fmbench); },
    };
    for (const auto& check : checks) {
        try {
            check();
        } catch (const std::exception& e) {
            report("unexpected error", false, e.what());
        }
    }
    fmt::print("{} failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmtree/flash_device.hpp"
#include "fmtree/tree_config.hpp"

namespace fmtree {

struct WorkloadOp {
    enum class Kind : std::uint8_t { Insert, Delete, Search };

    Kind kind = Kind::Insert;
    std::uint64_t key = 0;
    std::uint64_t payload = 0;  // Insert only

    static WorkloadOp insert(std::uint64_t key, std::uint64_t payload) {
        return {Kind::Insert, key, payload};
    }
    static WorkloadOp erase(std::uint64_t key) { return {Kind::Delete, key, 0}; }
    static WorkloadOp search(std::uint64_t key) { return {Kind::Search, key, 0}; }

    bool operator==(const WorkloadOp&) const = default;
};

std::string to_string(const WorkloadOp& op);

// What one op made visible: nothing (Insert), a bool (Delete) or a lookup (Search).
struct Observation {
    WorkloadOp::Kind kind = WorkloadOp::Kind::Insert;
    bool removed = false;
    std::optional<std::uint64_t> found;

    bool operator==(const Observation&) const = default;
};

std::string to_string(const Observation& observation);

// In-memory ordered map that defines correct behaviour.
class ReferenceModel {
public:
    Observation apply(const WorkloadOp& op);
    std::vector<Entry> entries() const;
    std::size_t size() const noexcept { return map_.size(); }

private:
    std::map<std::uint64_t, std::uint64_t> map_;
};

struct ReferenceResults {
    std::vector<Observation> observations;  // one per op
    std::vector<Entry> final_entries;
};

ReferenceResults replay(const std::vector<WorkloadOp>& ops);

enum class TreeKind : std::uint8_t { Fm, Baseline };

const char* to_string(TreeKind kind) noexcept;

struct Divergence {
    std::size_t op_index = 0;  // ops.size() marks the final live_entries comparison
    std::string expected;
    std::string actual;

    bool operator==(const Divergence&) const = default;
};

struct Verdict {
    bool pass = true;
    std::optional<Divergence> first_divergence;
};

// Geometry and tree parameters for a differential run.
struct CheckSetup {
    FlashGeometry geometry;
    TreeConfig config;
    // Forwarded to FmTree::set_skip_tombstone_fault; ignored for the baseline.
    std::optional<std::uint64_t> skip_tombstone_fault;
    // FM tree only: rebuild right after these op indices.
    std::vector<std::size_t> rebuild_after;
};

// Default differential setup: q = 8, B = 16, 32-bit keys and payloads, and
// `blocks` blocks sized to one node each.
CheckSetup default_check_setup(std::uint32_t blocks = 1024);

// Runs `ops` on a fresh tree of `kind` and on the reference model, comparing
// every observation and the final entry sequence. Errors thrown by the tree
// are reported as divergences.
Verdict differential_check(const std::vector<WorkloadOp>& ops, TreeKind kind,
                           const CheckSetup& setup = default_check_setup());

// Random mixed workload for differential checks: inserts of fresh and existing
// keys, deletes of live and absent keys, and searches of both.
std::vector<WorkloadOp> differential_workload(std::uint64_t seed, std::size_t ops,
                                              std::uint32_t key_bits = 32,
                                              std::uint32_t payload_bits = 32);

}  // namespace fmtree

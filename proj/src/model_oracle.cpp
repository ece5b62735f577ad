#include "fmtree/model_oracle.hpp"

#include <random>
#include <sstream>

#include "fmtree/btree_baseline.hpp"
#include "fmtree/errors.hpp"
#include "fmtree/fm_tree.hpp"
#include "fmtree/slot_codec.hpp"

namespace fmtree {

std::string to_string(const WorkloadOp& op) {
    switch (op.kind) {
        case WorkloadOp::Kind::Insert:
            return "insert(" + std::to_string(op.key) + ", " + std::to_string(op.payload) + ")";
        case WorkloadOp::Kind::Delete: return "delete(" + std::to_string(op.key) + ")";
        case WorkloadOp::Kind::Search: return "search(" + std::to_string(op.key) + ")";
    }
    return "?";
}

std::string to_string(const Observation& o) {
    switch (o.kind) {
        case WorkloadOp::Kind::Insert: return "ok";
        case WorkloadOp::Kind::Delete: return o.removed ? "true" : "false";
        case WorkloadOp::Kind::Search: return o.found ? std::to_string(*o.found) : "absent";
    }
    return "?";
}

const char* to_string(TreeKind kind) noexcept {
    return kind == TreeKind::Fm ? "fm" : "baseline";
}

Observation ReferenceModel::apply(const WorkloadOp& op) {
    Observation o{op.kind, false, std::nullopt};
    switch (op.kind) {
        case WorkloadOp::Kind::Insert: map_[op.key] = op.payload; break;
        case WorkloadOp::Kind::Delete: o.removed = map_.erase(op.key) == 1; break;
        case WorkloadOp::Kind::Search:
            if (auto it = map_.find(op.key); it != map_.end()) o.found = it->second;
            break;
    }
    return o;
}

std::vector<Entry> ReferenceModel::entries() const {
    std::vector<Entry> out;
    out.reserve(map_.size());
    for (const auto& [k, v] : map_) out.push_back({k, v});
    return out;
}

ReferenceResults replay(const std::vector<WorkloadOp>& ops) {
    ReferenceModel model;
    ReferenceResults results;
    results.observations.reserve(ops.size());
    for (const auto& op : ops) results.observations.push_back(model.apply(op));
    results.final_entries = model.entries();
    return results;
}

CheckSetup default_check_setup(std::uint32_t blocks) {
    CheckSetup setup;
    setup.geometry.q = 8;
    setup.config.slots_per_node = 16;
    setup.config.key_width = digits_for_bits(32, 8);
    setup.config.payload_width = digits_for_bits(32, 8);
    setup.geometry.cells_per_block = static_cast<std::uint32_t>(node_cells(setup.config));
    setup.geometry.block_count = blocks;
    return setup;
}

namespace {

std::string describe(const std::vector<Entry>& entries) {
    std::ostringstream out;
    out << entries.size() << " entries";
    return out.str();
}

// First index where two entry sequences differ, rendered for a Divergence.
std::optional<std::pair<std::string, std::string>> compare_entries(
    const std::vector<Entry>& expected, const std::vector<Entry>& actual) {
    const std::size_t n = std::min(expected.size(), actual.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!(expected[i] == actual[i])) {
            auto show = [](const Entry& e) {
                return "(" + std::to_string(e.key) + ", " + std::to_string(e.payload) + ")";
            };
            return std::pair{"entry " + std::to_string(i) + " = " + show(expected[i]),
                             "entry " + std::to_string(i) + " = " + show(actual[i])};
        }
    }
    if (expected.size() != actual.size()) return std::pair{describe(expected), describe(actual)};
    return std::nullopt;
}

template <typename Tree>
Verdict run_check(const std::vector<WorkloadOp>& ops, Tree& tree, const CheckSetup& setup) {
    ReferenceModel model;
    std::size_t next_rebuild = 0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const WorkloadOp& op = ops[i];
        const Observation expected = model.apply(op);
        Observation actual{op.kind, false, std::nullopt};
        try {
            switch (op.kind) {
                case WorkloadOp::Kind::Insert: tree.insert(op.key, op.payload); break;
                case WorkloadOp::Kind::Delete: actual.removed = tree.remove(op.key); break;
                case WorkloadOp::Kind::Search: actual.found = tree.search(op.key); break;
            }
            if constexpr (std::is_same_v<Tree, FmTree>) {
                while (next_rebuild < setup.rebuild_after.size() &&
                       setup.rebuild_after[next_rebuild] <= i) {
                    if (setup.rebuild_after[next_rebuild] == i) {
                        const auto before = tree.live_entries();
                        tree.gc_rebuild();
                        if (auto diff = compare_entries(before, tree.live_entries())) {
                            return {false, Divergence{i, "rebuild keeps " + diff->first,
                                                      "after rebuild " + diff->second}};
                        }
                    }
                    ++next_rebuild;
                }
            }
        } catch (const Error& e) {
            return {false, Divergence{i, to_string(expected), std::string("error: ") + e.what()}};
        }
        if (!(expected == actual)) {
            return {false, Divergence{i, to_string(expected), to_string(actual)}};
        }
    }
    if (auto diff = compare_entries(model.entries(), tree.live_entries())) {
        return {false, Divergence{ops.size(), diff->first, diff->second}};
    }
    return {true, std::nullopt};
}

}  // namespace

Verdict differential_check(const std::vector<WorkloadOp>& ops, TreeKind kind,
                           const CheckSetup& setup) {
    FlashDevice device(setup.geometry);
    if (kind == TreeKind::Fm) {
        FmTree tree(device, setup.config);
        tree.set_skip_tombstone_fault(setup.skip_tombstone_fault);
        return run_check(ops, tree, setup);
    }
    BaselineTree tree(device, setup.config);
    return run_check(ops, tree, setup);
}

std::vector<WorkloadOp> differential_workload(std::uint64_t seed, std::size_t count,
                                              std::uint32_t key_bits, std::uint32_t payload_bits) {
    std::mt19937_64 rng(seed);
    auto draw = [&](std::uint32_t bits) {
        return bits >= 64 ? rng() : rng() >> (64 - bits);
    };
    std::vector<std::uint64_t> live;  // may hold stale keys; only used as a hint
    std::vector<WorkloadOp> ops;
    ops.reserve(count);
    auto pick_known = [&]() -> std::uint64_t {
        return live.empty() ? draw(key_bits) : live[rng() % live.size()];
    };
    for (std::size_t i = 0; i < count; ++i) {
        const auto roll = rng() % 100;
        if (roll < 45) {
            const std::uint64_t key = (rng() % 4 == 0) ? pick_known() : draw(key_bits);
            ops.push_back(WorkloadOp::insert(key, draw(payload_bits)));
            live.push_back(key);
        } else if (roll < 75) {
            const std::uint64_t key = (rng() % 10 < 8) ? pick_known() : draw(key_bits);
            ops.push_back(WorkloadOp::erase(key));
        } else {
            ops.push_back(WorkloadOp::search((rng() % 2 == 0) ? pick_known() : draw(key_bits)));
        }
    }
    return ops;
}

}  // namespace fmtree

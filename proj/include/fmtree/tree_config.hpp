#pragma once

#include <cstdint>
#include <vector>

#include "fmtree/flash_device.hpp"

namespace fmtree {

// Parameters shared by the FM tree and the baseline B-tree so that counter
// comparisons only reflect the algorithms.
struct TreeConfig {
    std::uint32_t slots_per_node = 16;   // B: even, >= 4
    std::uint32_t key_width = 11;        // digits per key
    std::uint32_t payload_width = 11;    // digits per payload / child id
    double gc_barren_fraction = 0.25;    // FM tree only
    bool recycle_tombstones = true;      // FM tree only
    bool always_erase_on_rewrite = false;  // baseline only

    bool operator==(const TreeConfig&) const = default;
};

// On-flash node record, one node per block:
//   cell 0          kind (0 unwritten, 1 leaf, 2 internal)
//   cell 1          barren flag
//   cells 2..       B slots of [state | key digits | payload digits]
struct NodeLayout {
    std::uint32_t slots = 0;
    std::uint32_t key_width = 0;
    std::uint32_t payload_width = 0;

    static constexpr std::uint32_t kKindCell = 0;
    static constexpr std::uint32_t kBarrenCell = 1;
    static constexpr std::uint32_t kHeaderCells = 2;

    static NodeLayout from(const TreeConfig& config) noexcept {
        return {config.slots_per_node, config.key_width, config.payload_width};
    }

    std::uint32_t slot_cells() const noexcept { return 1 + key_width + payload_width; }
    std::uint64_t node_cells() const noexcept {
        return kHeaderCells + static_cast<std::uint64_t>(slots) * slot_cells();
    }
    std::uint32_t state_cell(std::uint32_t slot) const noexcept {
        return kHeaderCells + slot * slot_cells();
    }
    std::uint32_t key_cell(std::uint32_t slot) const noexcept { return state_cell(slot) + 1; }
    std::uint32_t payload_cell(std::uint32_t slot) const noexcept {
        return key_cell(slot) + key_width;
    }
};

enum class NodeKind : CellLevel { Unwritten = 0, Leaf = 1, Internal = 2 };

struct Entry {
    std::uint64_t key = 0;
    std::uint64_t payload = 0;

    bool operator==(const Entry&) const = default;
};

struct TreeStats {
    std::uint32_t height = 0;
    std::uint64_t live_count = 0;
    std::uint64_t barren_blocks = 0;
    std::uint64_t dead_slots = 0;
    std::uint64_t inserted_total = 0;

    bool operator==(const TreeStats&) const = default;
};

// Checks the TreeConfig bounds against a device geometry. Throws InvalidConfig
// for out-of-range fields and ConfigTooLarge when a node does not fit a block
// or a block id does not fit the payload word.
void validate_tree_config(const TreeConfig& config, const FlashGeometry& geometry);

// Cells needed for one node under `config`.
std::uint64_t node_cells(const TreeConfig& config) noexcept;

}  // namespace fmtree

#include "fmtree/tree_config.hpp"

#include <string>

#include "fmtree/errors.hpp"
#include "fmtree/slot_codec.hpp"

namespace fmtree {

std::uint64_t node_cells(const TreeConfig& config) noexcept {
    return NodeLayout::from(config).node_cells();
}

void validate_tree_config(const TreeConfig& config, const FlashGeometry& geometry) {
    if (config.slots_per_node < 4 || config.slots_per_node % 2 != 0) {
        throw InvalidConfig("slots_per_node must be even and >= 4, got " +
                            std::to_string(config.slots_per_node));
    }
    if (config.key_width < 1 || config.payload_width < 1) {
        throw InvalidConfig("key and payload widths must be at least one digit");
    }
    if (!(config.gc_barren_fraction > 0.0 && config.gc_barren_fraction <= 1.0)) {
        throw InvalidConfig("gc_barren_fraction must lie in (0, 1]");
    }
    if (geometry.q < 3) {
        // With q = 2 the state cell has no room for occupy + tombstone.
        throw InvalidConfig("trees need q >= 3 so a slot can be occupied and tombstoned");
    }
    const auto needed = node_cells(config);
    if (needed > geometry.cells_per_block) {
        throw ConfigTooLarge("node needs " + std::to_string(needed) + " cells but a block has " +
                             std::to_string(geometry.cells_per_block));
    }
    if (word_capacity(config.payload_width, geometry.q) < geometry.block_count) {
        throw ConfigTooLarge("payload width cannot address " + std::to_string(geometry.block_count) +
                             " blocks");
    }
}

}  // namespace fmtree

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmtree/flash_device.hpp"
#include "fmtree/slot_codec.hpp"
#include "fmtree/tree_config.hpp"

namespace fmtree {

// Block bookkeeping for the FM tree. Blocks move pristine -> in use ->
// reclaimable (barren) and are only erased when drawn from reclaimable.
struct Allocator {
    std::deque<BlockId> pristine;
    std::deque<BlockId> reclaimable;
};

// Erase-avoiding B-tree over a FlashDevice.
//
// Nodes are unsorted: a node is one block holding B slots, and every slot
// carries its own state cell (see classify_slot). Inserting takes the first
// usable slot, deleting bumps the state cell to a tombstone, and a node that
// loses its last entry is flagged barren and dropped from its parent by a
// tombstone. Nothing is ever rebalanced. When a node runs out of usable slots
// its live entries are copied into one or two fresh blocks and the old block
// is flagged barren. Barren blocks are only erased when the allocator runs out
// of never-used blocks.
//
// Internal slots hold (separator, child block). Routing takes the occupied slot
// with the greatest separator <= key, or the smallest separator if the key
// precedes them all.
//
// The device must be fresh (all cells zero) when the tree is created. The tree
// keeps a reference to it; the device must outlive the tree.
class FmTree {
public:
    // Throws InvalidConfig, ConfigTooLarge, DeviceFull.
    FmTree(FlashDevice& device, TreeConfig config);

    FmTree(const FmTree&) = delete;
    FmTree& operator=(const FmTree&) = delete;
    FmTree(FmTree&&) = default;

    // Read-only. Throws KeyOverflow.
    std::optional<std::uint64_t> search(std::uint64_t key);

    // Upsert. Throws KeyOverflow, DeviceFull.
    void insert(std::uint64_t key, std::uint64_t payload);

    // Returns false (and writes nothing) when the key is absent. Throws KeyOverflow.
    bool remove(std::uint64_t key);

    // Bulk-loads the live entries into a new generation of half-full nodes and
    // flags every block of the old generation barren. Throws DeviceFull without
    // touching the tree when the device cannot hold both generations.
    void gc_rebuild();

    // Sorted by key.
    std::vector<Entry> live_entries();

    TreeStats stats() const;

    // Pops a pristine block, or erases the oldest reclaimable one, and writes
    // the kind cell. Throws DeviceFull.
    BlockId allocate_node(NodeKind kind);

    // Programs the barren cell and queues the block for reclamation.
    // Throws AlreadyBarren.
    void mark_barren(BlockId block);

    // Full structural check: kinds, barren flags, separator ordering and the
    // live count. Returns a description of the first problem found.
    std::optional<std::string> validate();

    BlockId root() const noexcept { return root_; }
    std::uint32_t height() const noexcept { return height_; }
    const Allocator& allocator() const noexcept { return allocator_; }
    const TreeConfig& config() const noexcept { return config_; }
    FlashDevice& device() noexcept { return *device_; }
    std::uint64_t rebuild_count() const noexcept { return rebuilds_; }

    // Test hook: the delete with this ordinal (0-based, successful deletes
    // only) reports success without writing its tombstone.
    void set_skip_tombstone_fault(std::optional<std::uint64_t> delete_ordinal) {
        skip_tombstone_at_ = delete_ordinal;
    }

private:
    struct NodeScan {
        std::vector<CellLevel> states;
        std::vector<std::uint64_t> keys;  // meaningful for occupied slots only
        std::uint32_t occupied = 0;
    };

    struct PathStep {
        BlockId block = 0;
        std::uint64_t separator = 0;   // key of the parent slot naming this node
        std::uint32_t parent_slot = 0;
        NodeScan scan;
    };

    using Path = std::vector<PathStep>;

    std::uint32_t half() const noexcept { return config_.slots_per_node / 2; }
    void check_key(std::uint64_t key) const;

    std::uint64_t read_word(BlockId block, std::uint32_t first_cell, std::uint32_t width,
                            DigitWord* out = nullptr);
    void program_word(BlockId block, std::uint32_t first_cell, const DigitWord& word);

    NodeScan scan_node(BlockId block);
    std::uint32_t route(const NodeScan& scan) const;
    std::uint32_t route(const NodeScan& scan, std::uint64_t key) const;
    Path descend(std::uint64_t key);

    bool slot_allocatable(CellLevel level) const noexcept;
    std::optional<std::uint32_t> find_slot(BlockId block, const NodeScan& scan,
                                           const DigitWord& key, const DigitWord& payload,
                                           const std::vector<bool>& taken);
    void write_slot(BlockId block, std::uint32_t slot, CellLevel level, const DigitWord& key,
                    const DigitWord& payload);
    void tombstone_slot(BlockId block, std::uint32_t slot, NodeScan& scan);
    std::vector<Entry> read_live(BlockId block, const NodeScan& scan);

    BlockId write_fresh_node(NodeKind kind, std::span<const Entry> entries);
    void replace_node(Path& path, std::size_t depth, std::vector<Entry> entries, NodeKind kind);
    void replace_in_parent(Path& path, std::size_t depth, std::span<const Entry> children);
    void detach(Path& path, std::size_t depth);

    void maybe_collect();
    std::uint64_t blocks_needed(std::uint64_t entries) const noexcept;
    void collect(BlockId block, std::uint32_t level, std::vector<Entry>& out);

    FlashDevice* device_;
    TreeConfig config_;
    NodeLayout layout_;
    std::uint32_t q_;
    std::uint64_t key_capacity_;
    std::uint64_t payload_capacity_;

    Allocator allocator_;
    std::vector<bool> in_tree_;
    BlockId root_ = 0;
    std::uint32_t height_ = 1;
    std::uint64_t live_count_ = 0;
    std::uint64_t inserted_total_ = 0;
    std::uint64_t rebuilds_ = 0;

    // RAM-side garbage accounting for the rebuild trigger.
    std::uint64_t barren_since_rebuild_ = 0;
    std::unordered_map<BlockId, std::uint32_t> dead_slots_;
    std::uint64_t dead_slot_total_ = 0;
    std::uint64_t dead_heavy_blocks_ = 0;

    std::uint64_t deletes_ = 0;
    std::optional<std::uint64_t> skip_tombstone_at_;
};

}  // namespace fmtree

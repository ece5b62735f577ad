#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "fmtree/flash_device.hpp"
#include "fmtree/tree_config.hpp"

namespace fmtree {

// Conventional B-tree on the same node layout as FmTree: entries sorted in the
// slot prefix, binary search inside nodes, split on overflow, borrow or merge
// on underflow. A node whose new image would lower any cell is erased and
// fully reprogrammed; otherwise only the raised cells are programmed.
//
// Internal nodes hold (separator, child) pairs; the first separator of a node
// is its own lower bound and plays no part in routing.
class BaselineTree {
public:
    // Throws InvalidConfig, ConfigTooLarge.
    BaselineTree(FlashDevice& device, TreeConfig config);

    BaselineTree(const BaselineTree&) = delete;
    BaselineTree& operator=(const BaselineTree&) = delete;
    BaselineTree(BaselineTree&&) = default;

    // Throws KeyOverflow.
    std::optional<std::uint64_t> search(std::uint64_t key);
    // Upsert. Throws KeyOverflow, DeviceFull.
    void insert(std::uint64_t key, std::uint64_t payload);
    // Throws KeyOverflow.
    bool remove(std::uint64_t key);

    std::vector<Entry> live_entries();
    TreeStats stats() const;

    // Sortedness, minimum occupancy (root excepted), separator bounds, live count.
    std::optional<std::string> validate();

    BlockId root() const noexcept { return root_; }
    std::uint32_t height() const noexcept { return height_; }
    const TreeConfig& config() const noexcept { return config_; }
    FlashDevice& device() noexcept { return *device_; }

    // In-RAM copy of a node as stored on flash.
    struct NodeImage {
        NodeKind kind = NodeKind::Unwritten;
        std::vector<Entry> entries;

        bool operator==(const NodeImage&) const = default;
    };

    // Brings `block` from `current` to `next`: erase + full program when any
    // cell would drop (or always, under always_erase_on_rewrite, for a block
    // that holds data), otherwise program only the raised cells.
    void write_node(BlockId block, const NodeImage& current, const NodeImage& next);

    // Cell-level image of a node.
    std::vector<CellLevel> encode_image(const NodeImage& image) const;

private:
    struct PathStep {
        BlockId block = 0;
        std::uint32_t index_in_parent = 0;
    };

    void check_key(std::uint64_t key) const;
    std::uint64_t read_word(BlockId block, std::uint32_t first_cell, std::uint32_t width);
    std::uint32_t count_entries(BlockId block);
    std::uint64_t read_key(BlockId block, std::uint32_t slot);
    std::uint64_t read_payload(BlockId block, std::uint32_t slot);
    NodeImage load(BlockId block, NodeKind kind);

    // Index of the greatest key <= `key`, or 0 if none (internal routing).
    std::uint32_t floor_slot(BlockId block, std::uint32_t count, std::uint64_t key);
    std::vector<PathStep> descend(std::uint64_t key);

    BlockId allocate();
    void release(BlockId block);

    void insert_into_parent(std::vector<PathStep>& path, std::size_t depth, Entry entry);
    void rebalance(std::vector<PathStep>& path, std::size_t depth, NodeImage node,
                   const NodeImage& stored);

    FlashDevice* device_;
    TreeConfig config_;
    NodeLayout layout_;
    std::uint32_t q_;
    std::uint64_t key_capacity_;
    std::uint64_t payload_capacity_;

    std::deque<BlockId> free_;
    std::vector<bool> dirty_;  // needs an erase before reuse
    BlockId root_ = 0;
    std::uint32_t height_ = 1;
    std::uint64_t live_count_ = 0;
    std::uint64_t inserted_total_ = 0;
};

}  // namespace fmtree

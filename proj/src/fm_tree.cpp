#include "fmtree/fm_tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fmtree/errors.hpp"

namespace fmtree {

namespace {

// Splits `n` items into `groups` runs whose sizes differ by at most one.
std::vector<std::size_t> even_chunks(std::size_t n, std::size_t groups) {
    std::vector<std::size_t> sizes(groups, n / groups);
    for (std::size_t i = 0; i < n % groups; ++i) ++sizes[i];
    return sizes;
}

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

FmTree::FmTree(FlashDevice& device, TreeConfig config)
    : device_(&device),
      config_(config),
      layout_(NodeLayout::from(config)),
      q_(device.geometry().q) {
    validate_tree_config(config_, device.geometry());
    key_capacity_ = word_capacity(config_.key_width, q_);
    payload_capacity_ = word_capacity(config_.payload_width, q_);
    const auto blocks = device.geometry().block_count;
    in_tree_.assign(blocks, false);
    for (BlockId b = 0; b < blocks; ++b) allocator_.pristine.push_back(b);
    root_ = allocate_node(NodeKind::Leaf);
    height_ = 1;
}

void FmTree::check_key(std::uint64_t key) const {
    if (key >= key_capacity_) {
        throw KeyOverflow("key " + std::to_string(key) + " exceeds " +
                          std::to_string(config_.key_width) + " digits");
    }
}

std::uint64_t FmTree::read_word(BlockId block, std::uint32_t first_cell, std::uint32_t width,
                                DigitWord* out) {
    std::uint64_t value = 0;
    if (out) out->digits.resize(width);
    for (std::uint32_t i = 0; i < width; ++i) {
        const CellLevel digit = device_->read_cell(block, first_cell + i);
        if (out) out->digits[i] = digit;
        value = value * q_ + digit;
    }
    return value;
}

void FmTree::program_word(BlockId block, std::uint32_t first_cell, const DigitWord& word) {
    for (std::uint32_t i = 0; i < word.width(); ++i) {
        device_->program_cell(block, first_cell + i, word.digits[i]);
    }
}

FmTree::NodeScan FmTree::scan_node(BlockId block) {
    NodeScan scan;
    scan.states.resize(layout_.slots);
    scan.keys.assign(layout_.slots, 0);
    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        scan.states[s] = device_->read_cell(block, layout_.state_cell(s));
        if (classify_slot(scan.states[s], q_) == SlotState::Occupied) {
            scan.keys[s] = read_word(block, layout_.key_cell(s), layout_.key_width);
            ++scan.occupied;
        }
    }
    return scan;
}

std::uint32_t FmTree::route(const NodeScan& scan, std::uint64_t key) const {
    std::optional<std::uint32_t> best;
    std::optional<std::uint32_t> smallest;
    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        if (classify_slot(scan.states[s], q_) != SlotState::Occupied) continue;
        const auto sep = scan.keys[s];
        if (!smallest || sep < scan.keys[*smallest]) smallest = s;
        if (sep <= key && (!best || sep > scan.keys[*best])) best = s;
    }
    if (best) return *best;
    if (smallest) return *smallest;
    throw std::logic_error("internal node without occupied slots on the search path");
}

FmTree::Path FmTree::descend(std::uint64_t key) {
    Path path;
    path.reserve(height_);
    PathStep step;
    step.block = root_;
    for (std::uint32_t level = 0;; ++level) {
        step.scan = scan_node(step.block);
        if (level + 1 == height_) {
            path.push_back(std::move(step));
            return path;
        }
        const std::uint32_t slot = route(step.scan, key);
        const std::uint64_t separator = step.scan.keys[slot];
        const auto child = static_cast<BlockId>(
            read_word(step.block, layout_.payload_cell(slot), layout_.payload_width));
        path.push_back(std::move(step));
        step = PathStep{};
        step.block = child;
        step.separator = separator;
        step.parent_slot = slot;
    }
}

std::optional<std::uint64_t> FmTree::search(std::uint64_t key) {
    check_key(key);
    BlockId node = root_;
    for (std::uint32_t level = 0; level + 1 < height_; ++level) {
        const NodeScan scan = scan_node(node);
        const std::uint32_t slot = route(scan, key);
        node = static_cast<BlockId>(
            read_word(node, layout_.payload_cell(slot), layout_.payload_width));
    }
    // Leaf: stop at the first match; keys are unique among occupied slots.
    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        const CellLevel state = device_->read_cell(node, layout_.state_cell(s));
        if (classify_slot(state, q_) != SlotState::Occupied) continue;
        if (read_word(node, layout_.key_cell(s), layout_.key_width) == key) {
            return read_word(node, layout_.payload_cell(s), layout_.payload_width);
        }
    }
    return std::nullopt;
}

bool FmTree::slot_allocatable(CellLevel level) const noexcept {
    if (classify_slot(level, q_) != SlotState::Vacant) return false;
    return config_.recycle_tombstones || level == 0;
}

std::optional<std::uint32_t> FmTree::find_slot(BlockId block, const NodeScan& scan,
                                               const DigitWord& key, const DigitWord& payload,
                                               const std::vector<bool>& taken) {
    DigitWord residual;
    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        if (taken[s] || !slot_allocatable(scan.states[s])) continue;
        // A never-occupied slot still holds the all-zero erase state.
        if (scan.states[s] == 0) return s;
        read_word(block, layout_.key_cell(s), layout_.key_width, &residual);
        if (!can_overwrite(residual, key)) continue;
        read_word(block, layout_.payload_cell(s), layout_.payload_width, &residual);
        if (can_overwrite(residual, payload)) return s;
    }
    return std::nullopt;
}

void FmTree::write_slot(BlockId block, std::uint32_t slot, CellLevel level, const DigitWord& key,
                        const DigitWord& payload) {
    program_word(block, layout_.key_cell(slot), key);
    program_word(block, layout_.payload_cell(slot), payload);
    // The state cell goes last: the slot only becomes visible once its words are in place.
    device_->program_cell(block, layout_.state_cell(slot), occupy_level(level, q_));
}

void FmTree::tombstone_slot(BlockId block, std::uint32_t slot, NodeScan& scan) {
    const CellLevel next = tombstone_level(scan.states[slot], q_);
    device_->program_cell(block, layout_.state_cell(slot), next);
    scan.states[slot] = next;
    --scan.occupied;
    if (!slot_allocatable(next)) {
        auto& dead = dead_slots_[block];
        ++dead;
        ++dead_slot_total_;
        if (dead == half() + 1) ++dead_heavy_blocks_;
    }
}

std::vector<Entry> FmTree::read_live(BlockId block, const NodeScan& scan) {
    std::vector<Entry> entries;
    entries.reserve(scan.occupied);
    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        if (classify_slot(scan.states[s], q_) != SlotState::Occupied) continue;
        entries.push_back(
            {scan.keys[s], read_word(block, layout_.payload_cell(s), layout_.payload_width)});
    }
    return entries;
}

BlockId FmTree::allocate_node(NodeKind kind) {
    if (kind == NodeKind::Unwritten) {
        throw std::invalid_argument("allocate_node needs a leaf or internal kind");
    }
    BlockId block;
    if (!allocator_.pristine.empty()) {
        block = allocator_.pristine.front();
        allocator_.pristine.pop_front();
    } else if (!allocator_.reclaimable.empty()) {
        block = allocator_.reclaimable.front();
        allocator_.reclaimable.pop_front();
        device_->erase_block(block);
    } else {
        throw DeviceFull("no pristine or reclaimable block left");
    }
    device_->program_cell(block, NodeLayout::kKindCell, static_cast<CellLevel>(kind));
    in_tree_[block] = true;
    return block;
}

void FmTree::mark_barren(BlockId block) {
    if (device_->read_cell(block, NodeLayout::kBarrenCell) != 0) {
        throw AlreadyBarren("block " + std::to_string(block) + " is already barren");
    }
    device_->program_cell(block, NodeLayout::kBarrenCell, 1);
    allocator_.reclaimable.push_back(block);
    in_tree_[block] = false;
    ++barren_since_rebuild_;
    if (auto it = dead_slots_.find(block); it != dead_slots_.end()) {
        dead_slot_total_ -= it->second;
        if (it->second > half()) --dead_heavy_blocks_;
        dead_slots_.erase(it);
    }
}

BlockId FmTree::write_fresh_node(NodeKind kind, std::span<const Entry> entries) {
    const BlockId block = allocate_node(kind);
    for (std::uint32_t s = 0; s < entries.size(); ++s) {
        write_slot(block, s, 0, encode_word(entries[s].key, layout_.key_width, q_),
                   encode_word(entries[s].payload, layout_.payload_width, q_));
    }
    return block;
}

// Copies `entries` (sorted) into one fresh node, or two when they exceed half a
// node, retires the old block and patches the parent.
void FmTree::replace_node(Path& path, std::size_t depth, std::vector<Entry> entries,
                          NodeKind kind) {
    const BlockId old = path[depth].block;
    std::vector<Entry> children;
    if (entries.size() <= half()) {
        const BlockId block = write_fresh_node(kind, entries);
        const std::uint64_t sep =
            entries.empty() ? path[depth].separator
                            : std::min(path[depth].separator, entries.front().key);
        children.push_back({sep, block});
    } else {
        const std::size_t lower = entries.size() / 2;
        const std::span<const Entry> all(entries);
        const BlockId low = write_fresh_node(kind, all.first(lower));
        const BlockId high = write_fresh_node(kind, all.subspan(lower));
        children.push_back({std::min(path[depth].separator, entries.front().key), low});
        children.push_back({entries[lower].key, high});
    }
    mark_barren(old);

    if (depth > 0) {
        replace_in_parent(path, depth - 1, children);
        return;
    }
    if (children.size() == 1) {
        root_ = static_cast<BlockId>(children.front().payload);
        return;
    }
    children.front().key = 0;
    root_ = write_fresh_node(NodeKind::Internal, children);
    ++height_;
}

// Swaps the parent slot of path[depth + 1] for `children`.
void FmTree::replace_in_parent(Path& path, std::size_t depth, std::span<const Entry> children) {
    PathStep& parent = path[depth];
    const PathStep& child = path[depth + 1];
    const std::uint32_t slot = child.parent_slot;

    std::vector<DigitWord> keys, payloads;
    for (const Entry& e : children) {
        keys.push_back(encode_word(e.key, layout_.key_width, q_));
        payloads.push_back(encode_word(e.payload, layout_.payload_width, q_));
    }

    // Same slot, digits only rising: rewrite in place.
    if (children.size() == 1) {
        const DigitWord old_key = encode_word(child.separator, layout_.key_width, q_);
        const DigitWord old_child = encode_word(child.block, layout_.payload_width, q_);
        if (can_overwrite(old_key, keys[0]) && can_overwrite(old_child, payloads[0])) {
            program_word(parent.block, layout_.key_cell(slot), keys[0]);
            program_word(parent.block, layout_.payload_cell(slot), payloads[0]);
            parent.scan.keys[slot] = children[0].key;
            return;
        }
    }

    tombstone_slot(parent.block, slot, parent.scan);

    std::vector<bool> taken(layout_.slots, false);
    std::vector<std::uint32_t> placement;
    for (std::size_t i = 0; i < children.size(); ++i) {
        auto s = find_slot(parent.block, parent.scan, keys[i], payloads[i], taken);
        if (!s) break;
        taken[*s] = true;
        placement.push_back(*s);
    }
    if (placement.size() == children.size()) {
        for (std::size_t i = 0; i < children.size(); ++i) {
            const auto s = placement[i];
            write_slot(parent.block, s, parent.scan.states[s], keys[i], payloads[i]);
            parent.scan.states[s] = occupy_level(parent.scan.states[s], q_);
            parent.scan.keys[s] = children[i].key;
            ++parent.scan.occupied;
        }
        return;
    }

    std::vector<Entry> entries = read_live(parent.block, parent.scan);
    entries.insert(entries.end(), children.begin(), children.end());
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.key < b.key; });
    replace_node(path, depth, std::move(entries), NodeKind::Internal);
}

void FmTree::insert(std::uint64_t key, std::uint64_t payload) {
    check_key(key);
    if (payload >= payload_capacity_) {
        throw KeyOverflow("payload " + std::to_string(payload) + " exceeds " +
                          std::to_string(config_.payload_width) + " digits");
    }
    const DigitWord key_word = encode_word(key, layout_.key_width, q_);
    const DigitWord payload_word = encode_word(payload, layout_.payload_width, q_);

    Path path = descend(key);
    PathStep& leaf = path.back();
    ++inserted_total_;

    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        if (classify_slot(leaf.scan.states[s], q_) != SlotState::Occupied ||
            leaf.scan.keys[s] != key) {
            continue;
        }
        DigitWord current;
        read_word(leaf.block, layout_.payload_cell(s), layout_.payload_width, &current);
        if (can_overwrite(current, payload_word)) {
            program_word(leaf.block, layout_.payload_cell(s), payload_word);
            return;
        }
        tombstone_slot(leaf.block, s, leaf.scan);
        --live_count_;
        break;
    }

    const std::vector<bool> none(layout_.slots, false);
    if (auto s = find_slot(leaf.block, leaf.scan, key_word, payload_word, none)) {
        write_slot(leaf.block, *s, leaf.scan.states[*s], key_word, payload_word);
        ++live_count_;
        maybe_collect();
        return;
    }

    std::vector<Entry> entries = read_live(leaf.block, leaf.scan);
    entries.push_back({key, payload});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.key < b.key; });
    replace_node(path, path.size() - 1, std::move(entries), NodeKind::Leaf);
    ++live_count_;
    maybe_collect();
}

bool FmTree::remove(std::uint64_t key) {
    check_key(key);
    Path path = descend(key);
    PathStep& leaf = path.back();
    std::optional<std::uint32_t> slot;
    for (std::uint32_t s = 0; s < layout_.slots; ++s) {
        if (classify_slot(leaf.scan.states[s], q_) == SlotState::Occupied &&
            leaf.scan.keys[s] == key) {
            slot = s;
            break;
        }
    }
    if (!slot) return false;

    const bool skip = skip_tombstone_at_ && *skip_tombstone_at_ == deletes_;
    ++deletes_;
    --live_count_;
    if (skip) return true;

    tombstone_slot(leaf.block, *slot, leaf.scan);
    if (leaf.scan.occupied == 0 && path.size() > 1) {
        detach(path, path.size() - 1);
    }
    maybe_collect();
    return true;
}

// path[depth] has no occupied slot left: retire it and drop its parent slot.
void FmTree::detach(Path& path, std::size_t depth) {
    mark_barren(path[depth].block);
    PathStep& parent = path[depth - 1];
    tombstone_slot(parent.block, path[depth].parent_slot, parent.scan);
    if (parent.scan.occupied > 0) return;
    if (depth - 1 > 0) {
        detach(path, depth - 1);
        return;
    }
    // The root routed to nothing: start over from an empty leaf.
    const BlockId fresh = allocate_node(NodeKind::Leaf);
    mark_barren(root_);
    root_ = fresh;
    height_ = 1;
}

std::uint64_t FmTree::blocks_needed(std::uint64_t entries) const noexcept {
    std::uint64_t nodes = std::max<std::uint64_t>(1, ceil_div(entries, half()));
    std::uint64_t total = nodes;
    while (nodes > 1) {
        nodes = ceil_div(nodes, half());
        total += nodes;
    }
    return total;
}

void FmTree::maybe_collect() {
    const double garbage = static_cast<double>(barren_since_rebuild_ + dead_heavy_blocks_);
    const double limit = config_.gc_barren_fraction * device_->geometry().block_count;
    if (garbage < limit) return;
    const auto available = allocator_.pristine.size() + allocator_.reclaimable.size();
    if (blocks_needed(live_count_) > available) return;
    gc_rebuild();
}

void FmTree::gc_rebuild() {
    std::vector<Entry> entries = live_entries();
    const auto available = allocator_.pristine.size() + allocator_.reclaimable.size();
    if (blocks_needed(entries.size()) > available) {
        throw DeviceFull("rebuild needs " + std::to_string(blocks_needed(entries.size())) +
                         " blocks, " + std::to_string(available) + " available");
    }
    std::vector<BlockId> old_generation;
    for (BlockId b = 0; b < in_tree_.size(); ++b) {
        if (in_tree_[b]) old_generation.push_back(b);
    }

    // Leaves filled to half a node; each level's separators are the first keys
    // below it, with 0 on the left spine.
    std::vector<Entry> level;
    std::size_t groups = std::max<std::size_t>(1, ceil_div(entries.size(), half()));
    std::size_t offset = 0;
    for (std::size_t size : even_chunks(entries.size(), groups)) {
        const std::span<const Entry> chunk(entries.data() + offset, size);
        const std::uint64_t sep = offset == 0 ? 0 : chunk.front().key;
        level.push_back({sep, write_fresh_node(NodeKind::Leaf, chunk)});
        offset += size;
    }
    std::uint32_t height = 1;
    while (level.size() > 1) {
        std::vector<Entry> parents;
        groups = ceil_div(level.size(), half());
        offset = 0;
        for (std::size_t size : even_chunks(level.size(), groups)) {
            const std::span<const Entry> chunk(level.data() + offset, size);
            parents.push_back({chunk.front().key, write_fresh_node(NodeKind::Internal, chunk)});
            offset += size;
        }
        level = std::move(parents);
        ++height;
    }

    root_ = static_cast<BlockId>(level.front().payload);
    height_ = height;
    for (BlockId b : old_generation) mark_barren(b);
    barren_since_rebuild_ = 0;
    ++rebuilds_;
}

void FmTree::collect(BlockId block, std::uint32_t level, std::vector<Entry>& out) {
    const NodeScan scan = scan_node(block);
    std::vector<Entry> live = read_live(block, scan);
    if (level + 1 == height_) {
        out.insert(out.end(), live.begin(), live.end());
        return;
    }
    for (const Entry& e : live) collect(static_cast<BlockId>(e.payload), level + 1, out);
}

std::vector<Entry> FmTree::live_entries() {
    std::vector<Entry> out;
    out.reserve(live_count_);
    collect(root_, 0, out);
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
    return out;
}

TreeStats FmTree::stats() const {
    return {height_, live_count_, allocator_.reclaimable.size(), dead_slot_total_,
            inserted_total_};
}

std::optional<std::string> FmTree::validate() {
    std::uint64_t live = 0;
    std::optional<std::string> problem;

    // Keys of the subtree at `block` must lie in [low, high). The smallest
    // separator of a node also takes keys below it, so its child inherits `low`.
    auto visit = [&](auto&& self, BlockId block, std::uint32_t level, std::uint64_t low,
                     std::optional<std::uint64_t> high) -> void {
        if (problem) return;
        const bool leaf = level + 1 == height_;
        const auto kind = device_->read_cell(block, NodeLayout::kKindCell);
        const auto expect = static_cast<CellLevel>(leaf ? NodeKind::Leaf : NodeKind::Internal);
        if (kind != expect) {
            problem = "block " + std::to_string(block) + " has kind " + std::to_string(kind);
            return;
        }
        if (device_->read_cell(block, NodeLayout::kBarrenCell) != 0) {
            problem = "reachable block " + std::to_string(block) + " is barren";
            return;
        }
        if (!in_tree_[block]) {
            problem = "reachable block " + std::to_string(block) + " not tracked as in use";
            return;
        }
        const NodeScan scan = scan_node(block);
        std::vector<Entry> entries = read_live(block, scan);
        std::sort(entries.begin(), entries.end(),
                  [](const Entry& a, const Entry& b) { return a.key < b.key; });
        for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
            if (entries[i].key == entries[i + 1].key) {
                problem = "duplicate key " + std::to_string(entries[i].key) + " in block " +
                          std::to_string(block);
                return;
            }
        }
        if (leaf) {
            for (const Entry& e : entries) {
                if (e.key < low || (high && e.key >= *high)) {
                    problem = "key " + std::to_string(e.key) + " outside routing range of block " +
                              std::to_string(block);
                    return;
                }
            }
            live += entries.size();
            return;
        }
        if (entries.empty() && block != root_) {
            problem = "internal block " + std::to_string(block) + " routes nowhere";
            return;
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const std::uint64_t child_low = i == 0 ? low : entries[i].key;
            if (i > 0 && entries[i].key < low) {
                problem = "separator below routing range in block " + std::to_string(block);
                return;
            }
            const auto child_high = i + 1 < entries.size()
                                        ? std::optional<std::uint64_t>(entries[i + 1].key)
                                        : high;
            self(self, static_cast<BlockId>(entries[i].payload), level + 1, child_low, child_high);
        }
    };
    visit(visit, root_, 0, 0, std::nullopt);
    if (!problem && live != live_count_) {
        problem = "live count " + std::to_string(live_count_) + " but " + std::to_string(live) +
                  " occupied leaf slots are reachable";
    }
    return problem;
}

}  // namespace fmtree

#include "fmtree/btree_baseline.hpp"

#include <algorithm>
#include <string>

#include "fmtree/errors.hpp"
#include "fmtree/slot_codec.hpp"

namespace fmtree {

namespace {

auto key_less = [](const Entry& a, const Entry& b) { return a.key < b.key; };

}  // namespace

BaselineTree::BaselineTree(FlashDevice& device, TreeConfig config)
    : device_(&device), config_(config), layout_(NodeLayout::from(config)), q_(device.geometry().q) {
    validate_tree_config(config_, device.geometry());
    key_capacity_ = word_capacity(config_.key_width, q_);
    payload_capacity_ = word_capacity(config_.payload_width, q_);
    const auto blocks = device.geometry().block_count;
    dirty_.assign(blocks, false);
    for (BlockId b = 0; b < blocks; ++b) free_.push_back(b);
    root_ = allocate();
    write_node(root_, NodeImage{}, NodeImage{NodeKind::Leaf, {}});
}

void BaselineTree::check_key(std::uint64_t key) const {
    if (key >= key_capacity_) {
        throw KeyOverflow("key " + std::to_string(key) + " exceeds " +
                          std::to_string(config_.key_width) + " digits");
    }
}

std::vector<CellLevel> BaselineTree::encode_image(const NodeImage& image) const {
    std::vector<CellLevel> cells(layout_.node_cells(), 0);
    cells[NodeLayout::kKindCell] = static_cast<CellLevel>(image.kind);
    for (std::uint32_t s = 0; s < image.entries.size(); ++s) {
        cells[layout_.state_cell(s)] = 1;
        const auto key = encode_word(image.entries[s].key, layout_.key_width, q_);
        const auto payload = encode_word(image.entries[s].payload, layout_.payload_width, q_);
        std::copy(key.digits.begin(), key.digits.end(), cells.begin() + layout_.key_cell(s));
        std::copy(payload.digits.begin(), payload.digits.end(),
                  cells.begin() + layout_.payload_cell(s));
    }
    return cells;
}

void BaselineTree::write_node(BlockId block, const NodeImage& current, const NodeImage& next) {
    if (next.entries.size() > layout_.slots) {
        throw std::logic_error("node image exceeds slots_per_node");
    }
    const auto before = encode_image(current);
    const auto after = encode_image(next);
    bool must_erase = false;
    for (std::size_t i = 0; i < before.size() && !must_erase; ++i) {
        must_erase = after[i] < before[i];
    }
    if (config_.always_erase_on_rewrite && current.kind != NodeKind::Unwritten && before != after) {
        must_erase = true;
    }
    if (must_erase) {
        device_->erase_block(block);
        for (std::uint32_t i = 0; i < after.size(); ++i) {
            if (after[i] != 0) device_->program_cell(block, i, after[i]);
        }
        return;
    }
    for (std::uint32_t i = 0; i < after.size(); ++i) {
        if (after[i] > before[i]) device_->program_cell(block, i, after[i]);
    }
}

std::uint64_t BaselineTree::read_word(BlockId block, std::uint32_t first_cell,
                                      std::uint32_t width) {
    std::uint64_t value = 0;
    for (std::uint32_t i = 0; i < width; ++i) {
        value = value * q_ + device_->read_cell(block, first_cell + i);
    }
    return value;
}

// Occupied slots form a prefix; binary search for its end.
std::uint32_t BaselineTree::count_entries(BlockId block) {
    std::uint32_t lo = 0;
    std::uint32_t hi = layout_.slots;
    while (lo < hi) {
        const std::uint32_t mid = lo + (hi - lo) / 2;
        if (device_->read_cell(block, layout_.state_cell(mid)) != 0) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return lo;
}

std::uint64_t BaselineTree::read_key(BlockId block, std::uint32_t slot) {
    return read_word(block, layout_.key_cell(slot), layout_.key_width);
}

std::uint64_t BaselineTree::read_payload(BlockId block, std::uint32_t slot) {
    return read_word(block, layout_.payload_cell(slot), layout_.payload_width);
}

BaselineTree::NodeImage BaselineTree::load(BlockId block, NodeKind kind) {
    NodeImage image{kind, {}};
    const std::uint32_t count = count_entries(block);
    image.entries.reserve(count);
    for (std::uint32_t s = 0; s < count; ++s) {
        image.entries.push_back({read_key(block, s), read_payload(block, s)});
    }
    return image;
}

std::uint32_t BaselineTree::floor_slot(BlockId block, std::uint32_t count, std::uint64_t key) {
    // First slot whose key exceeds `key`; the answer is the one before it.
    std::uint32_t lo = 1;
    std::uint32_t hi = count;
    while (lo < hi) {
        const std::uint32_t mid = lo + (hi - lo) / 2;
        if (read_key(block, mid) <= key) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return lo - 1;
}

std::vector<BaselineTree::PathStep> BaselineTree::descend(std::uint64_t key) {
    std::vector<PathStep> path;
    path.reserve(height_);
    path.push_back({root_, 0});
    for (std::uint32_t level = 0; level + 1 < height_; ++level) {
        const BlockId block = path.back().block;
        const std::uint32_t slot = floor_slot(block, count_entries(block), key);
        path.push_back({static_cast<BlockId>(read_payload(block, slot)), slot});
    }
    return path;
}

std::optional<std::uint64_t> BaselineTree::search(std::uint64_t key) {
    check_key(key);
    const BlockId leaf = descend(key).back().block;
    std::uint32_t lo = 0;
    std::uint32_t hi = count_entries(leaf);
    while (lo < hi) {
        const std::uint32_t mid = lo + (hi - lo) / 2;
        const std::uint64_t probe = read_key(leaf, mid);
        if (probe == key) return read_payload(leaf, mid);
        if (probe < key) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    return std::nullopt;
}

BlockId BaselineTree::allocate() {
    if (free_.empty()) throw DeviceFull("no free block left");
    const BlockId block = free_.front();
    free_.pop_front();
    if (dirty_[block]) {
        device_->erase_block(block);
        dirty_[block] = false;
    }
    return block;
}

void BaselineTree::release(BlockId block) {
    dirty_[block] = true;
    free_.push_back(block);
}

void BaselineTree::insert(std::uint64_t key, std::uint64_t payload) {
    check_key(key);
    if (payload >= payload_capacity_) {
        throw KeyOverflow("payload " + std::to_string(payload) + " exceeds " +
                          std::to_string(config_.payload_width) + " digits");
    }
    auto path = descend(key);
    const BlockId leaf = path.back().block;
    const NodeImage stored = load(leaf, NodeKind::Leaf);
    NodeImage node = stored;
    ++inserted_total_;

    auto pos = std::lower_bound(node.entries.begin(), node.entries.end(), Entry{key, 0}, key_less);
    if (pos != node.entries.end() && pos->key == key) {
        pos->payload = payload;
        write_node(leaf, stored, node);
        return;
    }
    node.entries.insert(pos, {key, payload});
    ++live_count_;
    if (node.entries.size() <= layout_.slots) {
        write_node(leaf, stored, node);
        return;
    }

    const auto lower = node.entries.size() / 2;
    NodeImage upper{NodeKind::Leaf, {node.entries.begin() + lower, node.entries.end()}};
    node.entries.resize(lower);
    const BlockId sibling = allocate();
    write_node(sibling, NodeImage{}, upper);
    write_node(leaf, stored, node);
    insert_into_parent(path, path.size() - 1, {upper.entries.front().key, sibling});
}

// Adds `entry` to the parent of path[child_depth], splitting upwards as needed.
void BaselineTree::insert_into_parent(std::vector<PathStep>& path, std::size_t child_depth,
                                      Entry entry) {
    if (child_depth == 0) {
        const BlockId fresh = allocate();
        write_node(fresh, NodeImage{},
                   NodeImage{NodeKind::Internal, {{0, path[0].block}, entry}});
        root_ = fresh;
        ++height_;
        return;
    }
    const BlockId parent = path[child_depth - 1].block;
    const NodeImage stored = load(parent, NodeKind::Internal);
    NodeImage node = stored;
    auto pos = std::upper_bound(node.entries.begin(), node.entries.end(), entry, key_less);
    node.entries.insert(pos, entry);
    if (node.entries.size() <= layout_.slots) {
        write_node(parent, stored, node);
        return;
    }
    const auto lower = node.entries.size() / 2;
    NodeImage upper{NodeKind::Internal, {node.entries.begin() + lower, node.entries.end()}};
    node.entries.resize(lower);
    const BlockId sibling = allocate();
    write_node(sibling, NodeImage{}, upper);
    write_node(parent, stored, node);
    insert_into_parent(path, child_depth - 1, {upper.entries.front().key, sibling});
}

bool BaselineTree::remove(std::uint64_t key) {
    check_key(key);
    auto path = descend(key);
    const BlockId leaf = path.back().block;
    const NodeImage stored = load(leaf, NodeKind::Leaf);
    NodeImage node = stored;
    auto pos = std::lower_bound(node.entries.begin(), node.entries.end(), Entry{key, 0}, key_less);
    if (pos == node.entries.end() || pos->key != key) return false;
    node.entries.erase(pos);
    --live_count_;
    if (path.size() == 1 || node.entries.size() >= layout_.slots / 2) {
        write_node(leaf, stored, node);
        return true;
    }
    rebalance(path, path.size() - 1, std::move(node), stored);
    return true;
}

// path[depth] (not the root) holds `node`, one entry short of half full.
void BaselineTree::rebalance(std::vector<PathStep>& path, std::size_t depth, NodeImage node,
                             const NodeImage& stored) {
    const std::uint32_t minimum = layout_.slots / 2;
    const BlockId block = path[depth].block;
    const BlockId parent = path[depth - 1].block;
    const NodeImage parent_stored = load(parent, NodeKind::Internal);
    NodeImage parent_node = parent_stored;
    const std::uint32_t index = path[depth].index_in_parent;
    const bool internal = node.kind == NodeKind::Internal;

    if (index > 0) {
        const BlockId left = static_cast<BlockId>(parent_node.entries[index - 1].payload);
        const NodeImage left_stored = load(left, node.kind);
        NodeImage left_node = left_stored;
        if (left_node.entries.size() > minimum) {
            Entry moved = left_node.entries.back();
            left_node.entries.pop_back();
            if (internal) node.entries.front().key = parent_node.entries[index].key;
            node.entries.insert(node.entries.begin(), moved);
            parent_node.entries[index].key = moved.key;
            write_node(left, left_stored, left_node);
            write_node(block, stored, node);
            write_node(parent, parent_stored, parent_node);
            return;
        }
        if (internal && !node.entries.empty()) {
            node.entries.front().key = parent_node.entries[index].key;
        }
        left_node.entries.insert(left_node.entries.end(), node.entries.begin(), node.entries.end());
        write_node(left, left_stored, left_node);
        release(block);
        parent_node.entries.erase(parent_node.entries.begin() + index);
    } else {
        const BlockId right = static_cast<BlockId>(parent_node.entries[1].payload);
        const NodeImage right_stored = load(right, node.kind);
        NodeImage right_node = right_stored;
        if (right_node.entries.size() > minimum) {
            Entry moved = right_node.entries.front();
            if (internal) moved.key = parent_node.entries[1].key;
            right_node.entries.erase(right_node.entries.begin());
            node.entries.push_back(moved);
            parent_node.entries[1].key = right_node.entries.front().key;
            write_node(block, stored, node);
            write_node(right, right_stored, right_node);
            write_node(parent, parent_stored, parent_node);
            return;
        }
        if (internal) right_node.entries.front().key = parent_node.entries[1].key;
        node.entries.insert(node.entries.end(), right_node.entries.begin(),
                            right_node.entries.end());
        write_node(block, stored, node);
        release(right);
        parent_node.entries.erase(parent_node.entries.begin() + 1);
    }

    if (depth - 1 == 0) {
        if (parent_node.entries.size() == 1) {
            root_ = static_cast<BlockId>(parent_node.entries.front().payload);
            --height_;
            release(parent);
            return;
        }
        write_node(parent, parent_stored, parent_node);
        return;
    }
    if (parent_node.entries.size() >= minimum) {
        write_node(parent, parent_stored, parent_node);
        return;
    }
    rebalance(path, depth - 1, std::move(parent_node), parent_stored);
}

std::vector<Entry> BaselineTree::live_entries() {
    std::vector<Entry> out;
    out.reserve(live_count_);
    auto visit = [&](auto&& self, BlockId block, std::uint32_t level) -> void {
        const bool leaf = level + 1 == height_;
        const NodeImage image = load(block, leaf ? NodeKind::Leaf : NodeKind::Internal);
        if (leaf) {
            out.insert(out.end(), image.entries.begin(), image.entries.end());
            return;
        }
        for (const Entry& e : image.entries) self(self, static_cast<BlockId>(e.payload), level + 1);
    };
    visit(visit, root_, 0);
    return out;
}

TreeStats BaselineTree::stats() const {
    return {height_, live_count_, 0, 0, inserted_total_};
}

std::optional<std::string> BaselineTree::validate() {
    std::optional<std::string> problem;
    std::uint64_t live = 0;
    const std::uint32_t minimum = layout_.slots / 2;
    auto visit = [&](auto&& self, BlockId block, std::uint32_t level, std::uint64_t low,
                     std::optional<std::uint64_t> high) -> void {
        if (problem) return;
        const bool leaf = level + 1 == height_;
        const auto kind = static_cast<NodeKind>(device_->read_cell(block, NodeLayout::kKindCell));
        if (kind != (leaf ? NodeKind::Leaf : NodeKind::Internal)) {
            problem = "block " + std::to_string(block) + " has the wrong kind";
            return;
        }
        const NodeImage image = load(block, kind);
        const auto& e = image.entries;
        if (block != root_ && e.size() < minimum) {
            problem = "block " + std::to_string(block) + " holds " + std::to_string(e.size()) +
                      " entries, below the minimum " + std::to_string(minimum);
            return;
        }
        if (!leaf && e.size() < 2) {
            problem = "internal block " + std::to_string(block) + " has fewer than two children";
            return;
        }
        for (std::size_t i = 0; i + 1 < e.size(); ++i) {
            if (!(e[i].key < e[i + 1].key)) {
                problem = "block " + std::to_string(block) + " is not strictly sorted";
                return;
            }
        }
        if (leaf) {
            for (const Entry& x : e) {
                if (x.key < low || (high && x.key >= *high)) {
                    problem = "key " + std::to_string(x.key) + " outside the bounds of block " +
                              std::to_string(block);
                    return;
                }
            }
            live += e.size();
            return;
        }
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (i > 0 && (e[i].key < low || (high && e[i].key >= *high))) {
                problem = "separator outside the bounds of block " + std::to_string(block);
                return;
            }
            const std::uint64_t child_low = i == 0 ? low : e[i].key;
            const auto child_high =
                i + 1 < e.size() ? std::optional<std::uint64_t>(e[i + 1].key) : high;
            self(self, static_cast<BlockId>(e[i].payload), level + 1, child_low, child_high);
        }
    };
    visit(visit, root_, 0, 0, std::nullopt);
    if (!problem && live != live_count_) {
        problem = "live count " + std::to_string(live_count_) + " but " + std::to_string(live) +
                  " entries are reachable";
    }
    return problem;
}

}  // namespace fmtree

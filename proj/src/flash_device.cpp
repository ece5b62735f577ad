#include "fmtree/flash_device.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fmtree/errors.hpp"

namespace fmtree {

FlashDevice::FlashDevice(FlashGeometry geometry) : geometry_(geometry) {
    if (geometry.q < 2 || geometry.q > 256) {
        throw InvalidGeometry("q must lie in [2, 256], got " + std::to_string(geometry.q));
    }
    if (geometry.cells_per_block < 1) {
        throw InvalidGeometry("cells_per_block must be at least 1");
    }
    if (geometry.block_count < 1) {
        throw InvalidGeometry("block_count must be at least 1");
    }
    cells_.assign(static_cast<std::size_t>(geometry.cells_per_block) * geometry.block_count, 0);
    erase_counts_.assign(geometry.block_count, 0);
}

void FlashDevice::check_block(BlockId block) const {
    if (block >= geometry_.block_count) {
        throw OutOfRange("block " + std::to_string(block) + " out of range (block_count " +
                         std::to_string(geometry_.block_count) + ")");
    }
}

void FlashDevice::check_cell(BlockId block, std::uint32_t cell) const {
    check_block(block);
    if (cell >= geometry_.cells_per_block) {
        throw OutOfRange("cell " + std::to_string(cell) + " out of range (cells_per_block " +
                         std::to_string(geometry_.cells_per_block) + ")");
    }
}

CellLevel FlashDevice::read_cell(BlockId block, std::uint32_t cell) {
    check_cell(block, cell);
    ++counters_.cell_reads;
    return cells_[offset(block, cell)];
}

void FlashDevice::program_cell(BlockId block, std::uint32_t cell, CellLevel target) {
    check_cell(block, cell);
    if (target >= geometry_.q) {
        throw OutOfRange("target level " + std::to_string(target) + " not below q=" +
                         std::to_string(geometry_.q));
    }
    CellLevel& current = cells_[offset(block, cell)];
    if (target < current) {
        throw MonotonicityViolation("cell " + std::to_string(block) + ":" + std::to_string(cell) +
                                    " at level " + std::to_string(current) +
                                    " cannot be lowered to " + std::to_string(target));
    }
    if (target == current) {
        return;
    }
    current = target;
    ++counters_.cell_programs;
}

void FlashDevice::erase_block(BlockId block) {
    check_block(block);
    auto first = cells_.begin() + static_cast<std::ptrdiff_t>(offset(block, 0));
    std::fill(first, first + geometry_.cells_per_block, CellLevel{0});
    ++erase_counts_[block];
    ++counters_.block_erases;
}

WearStats FlashDevice::wear_stats() const {
    WearStats stats;
    stats.per_block = erase_counts_;
    stats.max_erases = *std::max_element(erase_counts_.begin(), erase_counts_.end());
    const auto total = std::accumulate(erase_counts_.begin(), erase_counts_.end(), std::uint64_t{0});
    stats.mean_erases = static_cast<double>(total) / static_cast<double>(erase_counts_.size());
    return stats;
}

std::uint64_t FlashDevice::erase_count(BlockId block) const {
    check_block(block);
    return erase_counts_[block];
}

std::string FlashDevice::dump() const {
    std::ostringstream out;
    for (BlockId b = 0; b < geometry_.block_count; ++b) {
        out << "block " << b << " erases=" << erase_counts_[b] << " cells=";
        for (std::uint32_t c = 0; c < geometry_.cells_per_block; ++c) {
            if (c != 0) out << ' ';
            out << static_cast<unsigned>(cells_[offset(b, c)]);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace fmtree

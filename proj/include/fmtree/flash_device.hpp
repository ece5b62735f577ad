#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fmtree {

using CellLevel = std::uint8_t;
using BlockId = std::uint32_t;

// Shape of an emulated multi-level NAND device. Immutable once a device is built.
struct FlashGeometry {
    std::uint32_t q = 8;                // levels per cell, 2..256
    std::uint32_t cells_per_block = 1;
    std::uint32_t block_count = 1;

    bool operator==(const FlashGeometry&) const = default;
};

struct OpCounters {
    std::uint64_t cell_reads = 0;
    std::uint64_t cell_programs = 0;
    std::uint64_t block_erases = 0;

    bool operator==(const OpCounters&) const = default;
};

struct WearStats {
    std::uint64_t max_erases = 0;
    double mean_erases = 0.0;
    std::vector<std::uint64_t> per_block;

    bool operator==(const WearStats&) const = default;
};

// Blocks of q-state cells. A cell may only be raised between erases; an erase
// resets a whole block to level 0. Every read, program and erase is tallied.
//
// Single owner, no internal locking.
class FlashDevice {
public:
    // Throws InvalidGeometry.
    explicit FlashDevice(FlashGeometry geometry);

    const FlashGeometry& geometry() const noexcept { return geometry_; }

    // Throws OutOfRange.
    CellLevel read_cell(BlockId block, std::uint32_t cell);

    // Raises the cell to `target`. Programming the current level is a no-op and
    // is not counted. Throws MonotonicityViolation when target is below the
    // current level and OutOfRange for bad indices or target >= q.
    void program_cell(BlockId block, std::uint32_t cell, CellLevel target);

    // Throws OutOfRange.
    void erase_block(BlockId block);

    OpCounters counters() const noexcept { return counters_; }

    // Clears the tallies only. Per-block erase counts are physical wear and stay.
    void reset_counters() noexcept { counters_ = {}; }

    WearStats wear_stats() const;

    std::uint64_t erase_count(BlockId block) const;

    // One line per block: `block <id> erases=<n> cells=<levels...>`. Not counted.
    std::string dump() const;

private:
    void check_block(BlockId block) const;
    void check_cell(BlockId block, std::uint32_t cell) const;
    std::size_t offset(BlockId block, std::uint32_t cell) const noexcept {
        return static_cast<std::size_t>(block) * geometry_.cells_per_block + cell;
    }

    FlashGeometry geometry_;
    std::vector<CellLevel> cells_;
    std::vector<std::uint64_t> erase_counts_;
    OpCounters counters_;
};

}  // namespace fmtree

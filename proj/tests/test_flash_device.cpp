#include <random>
#include <vector>

#include "doctest.h"
#include "fmtree/errors.hpp"
#include "fmtree/flash_device.hpp"

using namespace fmtree;

TEST_CASE("new device starts erased with zero counters") {
    FlashDevice device({8, 64, 4});
    CHECK(device.counters() == OpCounters{});
    for (BlockId b = 0; b < 4; ++b) {
        for (std::uint32_t c = 0; c < 64; ++c) CHECK(device.read_cell(b, c) == 0);
    }
    CHECK(device.counters().cell_reads == 256);
    CHECK(device.wear_stats().max_erases == 0);
}

TEST_CASE("geometry bounds") {
    CHECK_THROWS_AS(FlashDevice({1, 4, 4}), InvalidGeometry);
    CHECK_THROWS_AS(FlashDevice({8, 0, 4}), InvalidGeometry);
    CHECK_THROWS_AS(FlashDevice({8, 4, 0}), InvalidGeometry);
    CHECK_THROWS_AS(FlashDevice({257, 4, 4}), InvalidGeometry);
    FlashDevice minimal({2, 1, 1});
    CHECK(minimal.read_cell(0, 0) == 0);
    minimal.program_cell(0, 0, 1);
    CHECK(minimal.read_cell(0, 0) == 1);
}

TEST_CASE("read_cell") {
    FlashDevice device({8, 16, 4});
    CHECK(device.read_cell(2, 5) == 0);
    CHECK(device.counters().cell_reads == 1);
    device.program_cell(2, 5, 5);
    CHECK(device.read_cell(2, 5) == 5);
    CHECK_THROWS_AS(device.read_cell(4, 0), OutOfRange);
    CHECK_THROWS_AS(device.read_cell(0, 16), OutOfRange);
}

TEST_CASE("program_cell only raises levels") {
    FlashDevice device({8, 4, 1});
    device.program_cell(0, 0, 3);
    CHECK(device.counters().cell_programs == 1);

    SUBCASE("same level is a free no-op") {
        device.program_cell(0, 0, 3);
        CHECK(device.counters().cell_programs == 1);
    }
    SUBCASE("lowering is rejected and leaves the cell alone") {
        CHECK_THROWS_AS(device.program_cell(0, 0, 2), MonotonicityViolation);
        CHECK(device.read_cell(0, 0) == 3);
        CHECK(device.counters().cell_programs == 1);
    }
    SUBCASE("target must be below q") {
        CHECK_THROWS_AS(device.program_cell(0, 1, 8), OutOfRange);
    }
    SUBCASE("bad indices") {
        CHECK_THROWS_AS(device.program_cell(1, 0, 1), OutOfRange);
        CHECK_THROWS_AS(device.program_cell(0, 4, 1), OutOfRange);
    }
}

TEST_CASE("erase_block resets a block and counts wear") {
    FlashDevice device({8, 3, 2});
    device.program_cell(0, 0, 3);
    device.program_cell(0, 1, 7);
    device.program_cell(1, 0, 4);
    device.erase_block(0);
    CHECK(device.read_cell(0, 0) == 0);
    CHECK(device.read_cell(0, 1) == 0);
    CHECK(device.read_cell(0, 2) == 0);
    CHECK(device.read_cell(1, 0) == 4);
    CHECK(device.erase_count(0) == 1);
    device.erase_block(0);
    CHECK(device.erase_count(0) == 2);
    CHECK(device.read_cell(0, 1) == 0);
    CHECK(device.counters().block_erases == 2);
    CHECK_THROWS_AS(device.erase_block(2), OutOfRange);
    // Levels may drop only through an erase.
    device.program_cell(0, 1, 2);
    CHECK(device.read_cell(0, 1) == 2);
}

TEST_CASE("counters and reset") {
    FlashDevice device({8, 4, 4});
    device.read_cell(0, 0);
    device.read_cell(0, 1);
    device.program_cell(1, 1, 2);
    device.erase_block(3);
    CHECK(device.counters() == OpCounters{2, 1, 1});
    device.reset_counters();
    CHECK(device.counters() == OpCounters{});
    CHECK(device.wear_stats().per_block == std::vector<std::uint64_t>{0, 0, 0, 1});
}

TEST_CASE("wear_stats") {
    FlashDevice device({8, 4, 4});
    CHECK(device.wear_stats().max_erases == 0);
    CHECK(device.wear_stats().mean_erases == 0.0);
    device.erase_block(0);
    device.erase_block(0);
    const auto wear = device.wear_stats();
    CHECK(wear.max_erases == 2);
    CHECK(wear.mean_erases == doctest::Approx(0.5));
    CHECK(wear.per_block.size() == 4);
}

TEST_CASE("dump lists one line per block") {
    FlashDevice device({8, 3, 2});
    device.program_cell(1, 2, 6);
    device.erase_block(0);
    const auto reads = device.counters().cell_reads;
    CHECK(device.dump() == "block 0 erases=1 cells=0 0 0\nblock 1 erases=0 cells=0 0 6\n");
    CHECK(device.counters().cell_reads == reads);
}

TEST_CASE("random program/erase interleavings keep the device model") {
    const FlashGeometry geometry{5, 8, 6};
    FlashDevice device(geometry);
    FlashDevice twin(geometry);
    std::mt19937_64 rng(7);
    // Shadow state kept by the test, independent of the device.
    std::vector<std::vector<int>> shadow(geometry.block_count,
                                         std::vector<int>(geometry.cells_per_block, 0));
    std::uint64_t reads = 0, programs = 0, erases = 0;
    std::vector<std::uint64_t> erase_counts(geometry.block_count, 0);

    for (int step = 0; step < 20000; ++step) {
        const BlockId b = static_cast<BlockId>(rng() % geometry.block_count);
        const std::uint32_t c = static_cast<std::uint32_t>(rng() % geometry.cells_per_block);
        switch (rng() % 10) {
            case 0:
                device.erase_block(b);
                twin.erase_block(b);
                ++erases;
                ++erase_counts[b];
                std::fill(shadow[b].begin(), shadow[b].end(), 0);
                break;
            case 1: case 2: case 3: case 4: {
                const auto target = static_cast<CellLevel>(rng() % geometry.q);
                bool device_threw = false, twin_threw = false;
                try { device.program_cell(b, c, target); } catch (const MonotonicityViolation&) { device_threw = true; }
                try { twin.program_cell(b, c, target); } catch (const MonotonicityViolation&) { twin_threw = true; }
                CHECK(device_threw == twin_threw);
                CHECK(device_threw == (target < shadow[b][c]));
                if (target > shadow[b][c]) {
                    ++programs;
                    shadow[b][c] = target;
                }
                break;
            }
            default: {
                const auto level = device.read_cell(b, c);
                twin.read_cell(b, c);
                ++reads;
                REQUIRE(level < geometry.q);
                REQUIRE(level == shadow[b][c]);
            }
        }
        if (step == 10000) {
            device.reset_counters();
            twin.reset_counters();
            reads = programs = erases = 0;
        }
    }
    CHECK(device.counters() == OpCounters{reads, programs, erases});
    CHECK(device.wear_stats().per_block == erase_counts);
    CHECK(device.dump() == twin.dump());
    CHECK(device.counters() == twin.counters());
}

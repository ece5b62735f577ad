#include <map>
#include <random>

#include "doctest.h"
#include "fmtree/btree_baseline.hpp"
#include "fmtree/errors.hpp"
#include "tree_fixtures.hpp"

using namespace fmtree;
using namespace fmtree::testing;

TEST_CASE("baseline basics") {
    auto s = small_setup(4, 32);
    FlashDevice device(s.geometry);
    BaselineTree tree(device, s.config);
    CHECK(tree.stats() == TreeStats{1, 0, 0, 0, 0});
    CHECK_FALSE(tree.search(42).has_value());
    tree.insert(7, 70);
    CHECK(tree.search(7) == 70u);
    tree.insert(7, 71);
    CHECK(tree.search(7) == 71u);
    CHECK(tree.stats().live_count == 1);
    CHECK(tree.remove(7));
    CHECK_FALSE(tree.remove(7));
    CHECK_THROWS_AS(tree.insert(512, 0), KeyOverflow);
    CHECK_THROWS_AS(tree.search(512), KeyOverflow);
}

TEST_CASE("sorted nodes force erases on mid-node changes") {
    auto s = small_setup(8, 32);
    FlashDevice device(s.geometry);
    BaselineTree tree(device, s.config);
    tree.insert(10, 1);
    tree.insert(20, 2);
    CHECK(device.counters().block_erases == 0);  // appends only raise cells

    tree.insert(15, 3);  // shifts 20 right over a slot holding it
    CHECK(device.counters().block_erases == 1);
    tree.insert(30, 4);  // new largest key lands in a blank slot
    CHECK(device.counters().block_erases == 1);
    CHECK(tree.remove(30));  // clearing a state cell lowers it
    CHECK(device.counters().block_erases == 2);
    CHECK_FALSE(tree.validate().has_value());
}

TEST_CASE("delete that merges") {
    SUBCASE("merging the last two leaves collapses the root") {
        auto s = small_setup(4, 32);
        FlashDevice device(s.geometry);
        BaselineTree tree(device, s.config);
        for (std::uint64_t k = 1; k <= 5; ++k) tree.insert(k * 10, k);  // {10,20} {30,40,50}
        REQUIRE(tree.stats().height == 2);
        CHECK(tree.remove(50));
        CHECK(tree.remove(10));  // {20} underflows; the sibling has no spare entry
        CHECK(tree.stats().height == 1);
        CHECK(tree.live_entries() == std::vector<Entry>{{20, 2}, {30, 3}, {40, 4}});
        CHECK_FALSE(tree.validate().has_value());
    }
    SUBCASE("merge rewrites the survivor and the parent") {
        auto s = small_setup(4, 32);
        FlashDevice device(s.geometry);
        BaselineTree tree(device, s.config);
        // Leaves {10,20} {30,40} {50,60} {70,80,90}; payloads fall as keys rise.
        for (std::uint64_t k = 1; k <= 9; ++k) tree.insert(k * 10, 500 - k * 10);
        REQUIRE(tree.stats().height == 2);
        const auto erases = device.counters().block_erases;
        CHECK(tree.remove(10));
        CHECK(device.counters().block_erases >= erases + 2);
        CHECK(tree.stats().height == 2);
        CHECK_FALSE(tree.validate().has_value());
    }
}

TEST_CASE("write_node") {
    auto s = small_setup(4, 4);
    FlashDevice device(s.geometry);
    BaselineTree tree(device, s.config);
    const BlockId root = tree.root();
    using Image = BaselineTree::NodeImage;
    const Image one{NodeKind::Leaf, {{10, 1}}};
    tree.write_node(root, Image{NodeKind::Leaf, {}}, one);
    const auto base = device.counters();

    SUBCASE("identical image costs nothing") {
        tree.write_node(root, one, one);
        CHECK(device.counters().cell_programs == base.cell_programs);
        CHECK(device.counters().block_erases == base.block_erases);
    }
    SUBCASE("appending at the sorted end is monotone") {
        tree.write_node(root, one, Image{NodeKind::Leaf, {{10, 1}, {20, 2}}});
        CHECK(device.counters().block_erases == base.block_erases);
        CHECK(device.counters().cell_programs > base.cell_programs);
    }
    SUBCASE("shifting a larger key over a smaller one erases") {
        tree.write_node(root, one, Image{NodeKind::Leaf, {{5, 1}, {10, 1}}});
        CHECK(device.counters().block_erases == base.block_erases + 1);
    }
    SUBCASE("always_erase_on_rewrite erases even monotone rewrites") {
        auto strict = s;
        strict.config.always_erase_on_rewrite = true;
        FlashDevice d(strict.geometry);
        BaselineTree t(d, strict.config);
        const auto erases = d.counters().block_erases;
        t.insert(10, 1);
        t.insert(20, 2);
        CHECK(d.counters().block_erases == erases + 2);
    }
}

TEST_CASE("baseline search is read-only") {
    auto s = small_setup(4, 128);
    FlashDevice device(s.geometry);
    BaselineTree tree(device, s.config);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) tree.insert(rng() % 512, rng() % 512);
    const auto dump = device.dump();
    const auto before = device.counters();
    for (std::uint64_t k = 0; k < 512; ++k) tree.search(k);
    CHECK(device.dump() == dump);
    CHECK(device.counters().cell_programs == before.cell_programs);
    CHECK(device.counters().block_erases == before.block_erases);
}

TEST_CASE("baseline randomized differential with structural checks") {
    for (std::uint32_t slots : {4u, 6u, 16u}) {
        for (bool always : {false, true}) {
            for (std::uint64_t seed = 1; seed <= 4; ++seed) {
                CAPTURE(slots);
                CAPTURE(always);
                CAPTURE(seed);
                auto s = small_setup(slots, 256, 8, 4);
                s.config.always_erase_on_rewrite = always;
                FlashDevice device(s.geometry);
                BaselineTree tree(device, s.config);
                std::map<std::uint64_t, std::uint64_t> model;
                std::mt19937_64 rng(seed * 31 + slots);
                bool mid_or_merge = false;
                for (int i = 0; i < 800; ++i) {
                    const std::uint64_t k = rng() % 300;
                    const auto roll = rng() % 10;
                    if (roll < 5) {
                        const std::uint64_t v = rng() % 4096;
                        auto above = model.upper_bound(k);
                        if (above != model.end() && !model.contains(k)) mid_or_merge = true;
                        tree.insert(k, v);
                        model[k] = v;
                    } else if (roll < 8) {
                        REQUIRE(tree.remove(k) == (model.erase(k) == 1));
                    } else {
                        const auto found = tree.search(k);
                        const auto it = model.find(k);
                        REQUIRE(found.has_value() == (it != model.end()));
                        if (found) REQUIRE(*found == it->second);
                    }
                    const auto problem = tree.validate();
                    REQUIRE_MESSAGE(!problem.has_value(), *problem);
                }
                CHECK(tree.live_entries() == as_entries(model));
                if (mid_or_merge) CHECK(device.counters().block_erases >= 1);
            }
        }
    }
}

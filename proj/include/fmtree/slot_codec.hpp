#pragma once

#include <cstdint>
#include <vector>

#include "fmtree/flash_device.hpp"

namespace fmtree {

// Fixed-width base-q number, most significant digit first.
struct DigitWord {
    std::vector<CellLevel> digits;

    std::uint32_t width() const noexcept { return static_cast<std::uint32_t>(digits.size()); }
    bool operator==(const DigitWord&) const = default;
};

// q^width, saturated at UINT64_MAX.
std::uint64_t word_capacity(std::uint32_t width, std::uint32_t q) noexcept;

// Smallest width whose capacity covers every `bits`-bit value.
std::uint32_t digits_for_bits(std::uint32_t bits, std::uint32_t q) noexcept;

// Throws Overflow if value >= q^width.
DigitWord encode_word(std::uint64_t value, std::uint32_t width, std::uint32_t q);

// Throws InvalidDigit if any digit >= q.
std::uint64_t decode_word(const DigitWord& word, std::uint32_t q);

// True iff `next` can be programmed over `current` without an erase, i.e. no
// digit goes down. Throws WidthMismatch.
bool can_overwrite(const DigitWord& current, const DigitWord& next);

// Slot lifecycle carried by a single state cell. Even levels are vacant, odd
// levels occupied; a vacant level is only allocatable while two more
// increments (occupy, then tombstone) still fit below q.
enum class SlotState : std::uint8_t { Vacant, Occupied, Dead };

SlotState classify_slot(CellLevel level, std::uint32_t q) noexcept;

// Both throw IllegalTransition unless the level is Vacant / Occupied respectively.
CellLevel occupy_level(CellLevel level, std::uint32_t q);
CellLevel tombstone_level(CellLevel level, std::uint32_t q);

// Occupy/tombstone cycles a slot survives between erases: floor((q-1)/2).
constexpr std::uint32_t slot_reuse_cycles(std::uint32_t q) noexcept { return (q - 1) / 2; }

const char* to_string(SlotState state) noexcept;

}  // namespace fmtree

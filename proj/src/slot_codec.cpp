#include "fmtree/slot_codec.hpp"

#include <limits>
#include <string>

#include "fmtree/errors.hpp"

namespace fmtree {

std::uint64_t word_capacity(std::uint32_t width, std::uint32_t q) noexcept {
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t capacity = 1;
    for (std::uint32_t i = 0; i < width; ++i) {
        if (capacity > kMax / q) return kMax;
        capacity *= q;
    }
    return capacity;
}

std::uint32_t digits_for_bits(std::uint32_t bits, std::uint32_t q) noexcept {
    if (bits == 0) return 1;
    std::uint32_t width = 1;
    // capacity >= 2^bits  <=>  capacity - 1 >= 2^bits - 1
    const std::uint64_t max_value =
        bits >= 64 ? std::numeric_limits<std::uint64_t>::max() : (std::uint64_t{1} << bits) - 1;
    while (word_capacity(width, q) - 1 < max_value &&
           word_capacity(width, q) != std::numeric_limits<std::uint64_t>::max()) {
        ++width;
    }
    return width;
}

DigitWord encode_word(std::uint64_t value, std::uint32_t width, std::uint32_t q) {
    const std::uint64_t capacity = word_capacity(width, q);
    const bool saturated = capacity == std::numeric_limits<std::uint64_t>::max();
    if (!saturated && value >= capacity) {
        throw Overflow(std::to_string(value) + " does not fit " + std::to_string(width) +
                       " base-" + std::to_string(q) + " digits");
    }
    DigitWord word;
    word.digits.assign(width, 0);
    for (std::uint32_t i = width; i-- > 0;) {
        word.digits[i] = static_cast<CellLevel>(value % q);
        value /= q;
    }
    return word;
}

std::uint64_t decode_word(const DigitWord& word, std::uint32_t q) {
    std::uint64_t value = 0;
    for (CellLevel digit : word.digits) {
        if (digit >= q) {
            throw InvalidDigit("digit " + std::to_string(digit) + " not below q=" + std::to_string(q));
        }
        value = value * q + digit;
    }
    return value;
}

bool can_overwrite(const DigitWord& current, const DigitWord& next) {
    if (current.width() != next.width()) {
        throw WidthMismatch("word widths differ: " + std::to_string(current.width()) + " vs " +
                            std::to_string(next.width()));
    }
    for (std::size_t i = 0; i < current.digits.size(); ++i) {
        if (next.digits[i] < current.digits[i]) return false;
    }
    return true;
}

SlotState classify_slot(CellLevel level, std::uint32_t q) noexcept {
    if (level % 2 == 1) return SlotState::Occupied;
    return static_cast<std::uint32_t>(level) + 2 <= q - 1 ? SlotState::Vacant : SlotState::Dead;
}

CellLevel occupy_level(CellLevel level, std::uint32_t q) {
    if (classify_slot(level, q) != SlotState::Vacant) {
        throw IllegalTransition("cannot occupy slot at level " + std::to_string(level) + " (" +
                                to_string(classify_slot(level, q)) + ")");
    }
    return static_cast<CellLevel>(level + 1);
}

CellLevel tombstone_level(CellLevel level, std::uint32_t q) {
    if (classify_slot(level, q) != SlotState::Occupied) {
        throw IllegalTransition("cannot tombstone slot at level " + std::to_string(level) + " (" +
                                to_string(classify_slot(level, q)) + ")");
    }
    if (static_cast<std::uint32_t>(level) + 1 > q - 1) {
        throw IllegalTransition("state cell saturated at level " + std::to_string(level));
    }
    return static_cast<CellLevel>(level + 1);
}

const char* to_string(SlotState state) noexcept {
    switch (state) {
        case SlotState::Vacant: return "vacant";
        case SlotState::Occupied: return "occupied";
        case SlotState::Dead: return "dead";
    }
    return "?";
}

}  // namespace fmtree

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace lbcast {

// Exact decimal value with 12 fractional digits, stored as a scaled integer.
// All protocol arithmetic runs on this type so traces are bit-reproducible:
// the same scenario always serializes to the same decimal strings.
class Fixed {
  public:
    static constexpr std::int64_t kScale = 1'000'000'000'000LL; // 10^12
    static constexpr int kFracDigits = 12;

    constexpr Fixed() = default;

    static constexpr Fixed from_units(std::int64_t units)
    {
        Fixed f;
        f.units_ = units;
        return f;
    }

    static constexpr Fixed from_int(std::int64_t whole) { return from_units(whole * kScale); }

    // Parses a decimal literal like "-0.25" or "3". Rejects more than 12
    // fractional digits rather than rounding silently.
    static Fixed parse(const std::string& text);

    std::int64_t units() const { return units_; }

    // Fixed 12-digit decimal form, e.g. "0.500000000000".
    std::string str() const;

    Fixed operator+(Fixed o) const { return from_units(units_ + o.units_); }
    Fixed operator-(Fixed o) const { return from_units(units_ - o.units_); }
    Fixed operator-() const { return from_units(-units_); }

    bool operator==(const Fixed&) const = default;
    auto operator<=>(const Fixed&) const = default;

    Fixed abs() const { return from_units(units_ < 0 ? -units_ : units_); }

    // Midpoint with round-half-away-from-zero on the final digit.
    static Fixed midpoint(Fixed a, Fixed b);

    // Plain average of a non-empty set, same rounding rule.
    static Fixed average(std::span<const Fixed> values);

  private:
    std::int64_t units_ = 0;
};

} // namespace lbcast

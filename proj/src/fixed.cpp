#include "lbcast/fixed.hpp"

#include <cctype>
#include <cstdlib>

namespace lbcast {

namespace {

std::int64_t round_div(__int128 num, __int128 den)
{
    // round half away from zero
    const bool neg = (num < 0) != (den < 0);
    __int128 n = num < 0 ? -num : num;
    __int128 d = den < 0 ? -den : den;
    __int128 q = (n + d / 2) / d;
    return static_cast<std::int64_t>(neg ? -q : q);
}

} // namespace

Fixed Fixed::parse(const std::string& text)
{
    if (text.empty()) {
        throw std::invalid_argument("empty decimal literal");
    }
    std::size_t pos = 0;
    bool neg = false;
    if (text[pos] == '+' || text[pos] == '-') {
        neg = text[pos] == '-';
        ++pos;
    }
    if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
        throw std::invalid_argument("malformed decimal literal: " + text);
    }
    std::int64_t whole = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        whole = whole * 10 + (text[pos] - '0');
        if (whole > 9'000'000) {
            throw std::invalid_argument("decimal literal out of range: " + text);
        }
        ++pos;
    }
    std::int64_t frac = 0;
    int frac_digits = 0;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        if (pos >= text.size()) {
            throw std::invalid_argument("malformed decimal literal: " + text);
        }
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (++frac_digits > kFracDigits) {
                throw std::invalid_argument("more than 12 fractional digits: " + text);
            }
            frac = frac * 10 + (text[pos] - '0');
            ++pos;
        }
    }
    if (pos != text.size()) {
        throw std::invalid_argument("trailing characters in decimal literal: " + text);
    }
    for (int i = frac_digits; i < kFracDigits; ++i) {
        frac *= 10;
    }
    std::int64_t units = whole * kScale + frac;
    return from_units(neg ? -units : units);
}

std::string Fixed::str() const
{
    std::int64_t u = units_;
    std::string out;
    if (u < 0) {
        out.push_back('-');
        u = -u;
    }
    out += std::to_string(u / kScale);
    out.push_back('.');
    std::string frac = std::to_string(u % kScale);
    out.append(kFracDigits - frac.size(), '0');
    out += frac;
    return out;
}

Fixed Fixed::midpoint(Fixed a, Fixed b)
{
    __int128 sum = static_cast<__int128>(a.units()) + b.units();
    return from_units(round_div(sum, 2));
}

Fixed Fixed::average(std::span<const Fixed> values)
{
    if (values.empty()) {
        throw std::invalid_argument("average of empty set");
    }
    __int128 sum = 0;
    for (Fixed v : values) {
        sum += v.units();
    }
    return from_units(round_div(sum, static_cast<__int128>(values.size())));
}

} // namespace lbcast

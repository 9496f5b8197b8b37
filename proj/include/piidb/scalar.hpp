#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "piidb/errors.hpp"

namespace piidb {

/// A scalar value: text or an arbitrary-precision decimal kept in a
/// canonical string form (sign, digits, optional fraction; no exponent).
/// Canonicalization makes equality and ordering plain string comparisons,
/// which keeps serialized records byte-stable.
class Scalar {
 public:
  enum class Kind { text, number };

  static Scalar text(std::string value) { return Scalar(Kind::text, std::move(value)); }

  static Scalar number(const std::string& literal) {
    return Scalar(Kind::number, normalize_decimal(literal));
  }

  static Scalar number(std::int64_t value) { return Scalar(Kind::number, std::to_string(value)); }

  Kind kind() const noexcept { return kind_; }
  bool is_text() const noexcept { return kind_ == Kind::text; }
  bool is_number() const noexcept { return kind_ == Kind::number; }

  /// Canonical payload (raw text, or the normalized decimal string).
  const std::string& raw() const noexcept { return value_; }

  friend bool operator==(const Scalar& a, const Scalar& b) noexcept {
    return a.kind_ == b.kind_ && a.value_ == b.value_;
  }
  friend std::strong_ordering operator<=>(const Scalar& a, const Scalar& b) noexcept {
    if (a.kind_ != b.kind_) return a.kind_ <=> b.kind_;
    return a.value_.compare(b.value_) <=> 0;
  }

 private:
  Scalar(Kind kind, std::string value) : kind_(kind), value_(std::move(value)) {}

  static std::string normalize_decimal(const std::string& s) {
    std::size_t i = 0;
    bool negative = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
      negative = s[i] == '-';
      ++i;
    }
    std::string whole, frac;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) whole.push_back(s[i++]);
    if (i < s.size() && s[i] == '.') {
      ++i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) frac.push_back(s[i++]);
    }
    if (i != s.size() || (whole.empty() && frac.empty()))
      fail(Errc::malformed_infon, "bad decimal literal '" + s + "'");
    // strip leading zeros of the integer part and trailing zeros of the fraction
    std::size_t nz = whole.find_first_not_of('0');
    whole = nz == std::string::npos ? "0" : whole.substr(nz);
    std::size_t fz = frac.find_last_not_of('0');
    frac = fz == std::string::npos ? "" : frac.substr(0, fz + 1);
    if (whole.empty()) whole = "0";
    std::string out = whole;
    if (!frac.empty()) out += "." + frac;
    if (negative && out != "0") out.insert(out.begin(), '-');
    return out;
  }

  Kind kind_;
  std::string value_;
};

}  // namespace piidb

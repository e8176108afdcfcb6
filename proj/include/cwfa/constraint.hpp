#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>

#include "cwfa/error.hpp"

namespace cwfa {

/// Four-letter model identifier. Letters, in order: Y-variance, loadings,
/// error variance, isotropy. 'C' means the constraint is imposed.
///
///   sigma_equal    sigma^2_g = sigma^2
///   lambda_equal   Lambda_g = Lambda
///   psi_equal      Psi_g = Psi
///   psi_isotropic  Psi_g = psi_g I_p
///
/// psi_equal and psi_isotropic together give Psi_g = psi I_p.
struct ConstraintCode {
  bool sigma_equal = false;
  bool lambda_equal = false;
  bool psi_equal = false;
  bool psi_isotropic = false;

  static ConstraintCode parse(std::string_view text) {
    if (text.size() != 4) {
      throw InvalidParameter("constraint code must have four letters: '" +
                             std::string(text) + "'");
    }
    std::array<bool, 4> flags{};
    for (std::size_t i = 0; i < 4; ++i) {
      const char c = text[i];
      if (c == 'C' || c == 'c') {
        flags[i] = true;
      } else if (c == 'U' || c == 'u') {
        flags[i] = false;
      } else {
        throw InvalidParameter("constraint code letters must be C or U: '" +
                               std::string(text) + "'");
      }
    }
    return {flags[0], flags[1], flags[2], flags[3]};
  }

  std::string str() const {
    std::string s(4, 'U');
    if (sigma_equal) s[0] = 'C';
    if (lambda_equal) s[1] = 'C';
    if (psi_equal) s[2] = 'C';
    if (psi_isotropic) s[3] = 'C';
    return s;
  }

  /// Number of constrained letters (0 for UUUU, 4 for CCCC).
  int constraint_count() const {
    return int(sigma_equal) + int(lambda_equal) + int(psi_equal) +
           int(psi_isotropic);
  }

  /// Bit i is set iff letter i is 'C' (letter 0 is the most significant bit).
  unsigned bits() const {
    return (unsigned(sigma_equal) << 3) | (unsigned(lambda_equal) << 2) |
           (unsigned(psi_equal) << 1) | unsigned(psi_isotropic);
  }

  static ConstraintCode from_bits(unsigned b) {
    return {(b & 8u) != 0, (b & 4u) != 0, (b & 2u) != 0, (b & 1u) != 0};
  }

  /// All sixteen codes, from UUUU to CCCC in binary order.
  static std::array<ConstraintCode, 16> all() {
    std::array<ConstraintCode, 16> out{};
    for (unsigned b = 0; b < 16; ++b) out[b] = from_bits(b);
    return out;
  }

  friend bool operator==(const ConstraintCode&, const ConstraintCode&) = default;
  friend auto operator<=>(const ConstraintCode& a, const ConstraintCode& b) {
    return a.str() <=> b.str();
  }
};

}  // namespace cwfa

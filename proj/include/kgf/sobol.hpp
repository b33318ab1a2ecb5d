#pragma once

// Sobol low-discrepancy sequence (Joe-Kuo direction numbers, Gray-code order).

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "kgf/error.hpp"
#include "kgf/sobol_table.hpp"

namespace kgf {

class SobolSequence {
 public:
  static constexpr int kBits = 32;

  explicit SobolSequence(std::size_t dimension) : state_(dimension, 0), directions_(dimension) {
    if (dimension == 0 || dimension > sobol_detail::kMaxDimension) {
      fail(ErrorKind::UnsupportedDimension, "Sobol dimension " + std::to_string(dimension) + " outside 1.." +
                                                std::to_string(sobol_detail::kMaxDimension));
    }
    for (int k = 1; k <= kBits; ++k) directions_[0][k - 1] = 1u << (kBits - k);
    for (std::size_t j = 1; j < dimension; ++j) {
      const auto& e = sobol_detail::kJoeKuo[j - 1];
      auto& v = directions_[j];
      const int s = static_cast<int>(e.degree);
      for (int k = 1; k <= s && k <= kBits; ++k) v[k - 1] = e.initial[k - 1] << (kBits - k);
      for (int k = s + 1; k <= kBits; ++k) {
        std::uint32_t x = v[k - s - 1] ^ (v[k - s - 1] >> s);
        for (int i = 1; i < s; ++i) {
          if ((e.coefficients >> (s - 1 - i)) & 1u) x ^= v[k - i - 1];
        }
        v[k - 1] = x;
      }
    }
  }

  std::size_t dimension() const { return state_.size(); }

  /// Next point; the all-zeros first point of the sequence is never returned.
  std::vector<double> next() {
    const int c = std::countr_one(index_);
    if (c >= kBits) fail(ErrorKind::UnsupportedDimension, "Sobol sequence exhausted");
    ++index_;
    std::vector<double> point(state_.size());
    for (std::size_t j = 0; j < state_.size(); ++j) {
      state_[j] ^= directions_[j][c];
      point[j] = static_cast<double>(state_[j]) * 0x1.0p-32;
    }
    return point;
  }

 private:
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> state_;
  std::vector<std::array<std::uint32_t, kBits>> directions_;
};

inline std::vector<std::vector<double>> sobol_points(std::size_t dimension, std::size_t count) {
  SobolSequence seq(dimension);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(seq.next());
  return out;
}

}  // namespace kgf

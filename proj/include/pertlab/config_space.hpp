#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pertlab {

/// Enumeration of Omega^n as base-k integers: index = sum_j state_j * k^j.
class ConfigSpace {
 public:
  ConfigSpace(std::size_t num_states, int sites);

  std::size_t num_states() const noexcept { return k_; }
  int sites() const noexcept { return n_; }
  std::uint64_t size() const noexcept { return size_; }

  void decode(std::uint64_t index, std::span<int> out) const;
  std::uint64_t encode(std::span<const int> states) const;
  int state_at(std::uint64_t index, int site) const {
    return static_cast<int>((index / pow_[static_cast<std::size_t>(site)]) % k_);
  }
  /// Index after replacing the states at `site` and `site+1 (mod n)`.
  std::uint64_t replace_pair(std::uint64_t index, int site, int left, int right) const;

  /// |k|^n, or 0 when it overflows `limit`.
  static std::uint64_t checked_size(std::size_t k, int n, std::uint64_t limit);

 private:
  std::size_t k_;
  int n_;
  std::uint64_t size_;
  std::vector<std::uint64_t> pow_;
};

}  // namespace pertlab

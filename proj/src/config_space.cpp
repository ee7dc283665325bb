#include "pertlab/config_space.hpp"

#include "pertlab/errors.hpp"

namespace pertlab {

std::uint64_t ConfigSpace::checked_size(std::size_t k, int n, std::uint64_t limit) {
  std::uint64_t s = 1;
  for (int i = 0; i < n; ++i) {
    if (s > limit / k) return 0;
    s *= k;
  }
  return s <= limit ? s : 0;
}

ConfigSpace::ConfigSpace(std::size_t num_states, int sites) : k_(num_states), n_(sites) {
  if (k_ < 1 || n_ < 1) throw ConfigError("configuration space needs k >= 1 and n >= 1");
  size_ = checked_size(k_, n_, std::uint64_t{1} << 40);
  if (size_ == 0) throw ConfigError("configuration space too large");
  pow_.resize(static_cast<std::size_t>(n_) + 1);
  pow_[0] = 1;
  for (std::size_t i = 1; i < pow_.size(); ++i) pow_[i] = pow_[i - 1] * k_;
}

void ConfigSpace::decode(std::uint64_t index, std::span<int> out) const {
  for (int j = 0; j < n_; ++j) {
    out[static_cast<std::size_t>(j)] = static_cast<int>(index % k_);
    index /= k_;
  }
}

std::uint64_t ConfigSpace::encode(std::span<const int> states) const {
  std::uint64_t idx = 0;
  for (int j = n_ - 1; j >= 0; --j) idx = idx * k_ + static_cast<std::uint64_t>(states[static_cast<std::size_t>(j)]);
  return idx;
}

std::uint64_t ConfigSpace::replace_pair(std::uint64_t index, int site, int left,
                                        int right) const {
  const int next = (site + 1) % n_;
  const auto s = static_cast<std::size_t>(site);
  const auto t = static_cast<std::size_t>(next);
  const auto old_left = static_cast<std::uint64_t>(state_at(index, site));
  const auto old_right = static_cast<std::uint64_t>(state_at(index, next));
  index -= old_left * pow_[s];
  index += static_cast<std::uint64_t>(left) * pow_[s];
  index -= old_right * pow_[t];
  index += static_cast<std::uint64_t>(right) * pow_[t];
  return index;
}

}  // namespace pertlab

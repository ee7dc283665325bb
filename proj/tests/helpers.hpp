#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pertlab/model.hpp"

namespace testing {

inline std::string model_path(const std::string& name) { return std::string(PERTLAB_MODELS_DIR) + "/" + name; }

inline pertlab::ModelSpec two_lane() { return pertlab::load_model_spec(model_path("two_lane_tasep.model")); }
inline pertlab::ModelSpec coupled() { return pertlab::load_model_spec(model_path("coupled_two_lane.model")); }

/// Same states and measure as the two-lane models, custom rates.
inline pertlab::ModelSpec two_lane_with(std::vector<pertlab::Transition> rates) {
  return pertlab::ModelSpec::create({"00", "01", "10", "11"}, {0, 0, 1, 1}, {0, 1, 0, 1},
                                    {0.25, 0.25, 0.25, 0.25}, std::move(rates));
}

/// Dense k^4 rate tensor r[a][b][c][d] straight from the transition list.
struct RateTensor {
  int k;
  std::vector<double> r;
  explicit RateTensor(const pertlab::ModelSpec& spec)
      : k(static_cast<int>(spec.num_states())), r(static_cast<std::size_t>(k * k * k * k), 0.0) {
    for (const auto& t : spec.transitions()) at(t.from_left, t.from_right, t.to_left, t.to_right) += t.rate;
  }
  double& at(int a, int b, int c, int d) { return r[static_cast<std::size_t>(((a * k + b) * k + c) * k + d)]; }
  double operator()(int a, int b, int c, int d) const {
    return r[static_cast<std::size_t>(((a * k + b) * k + c) * k + d)];
  }
};

}  // namespace testing

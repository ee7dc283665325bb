#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pertlab {

/// One entry of the nearest-neighbour rate function
/// r(left, right; new_left, new_right), states given by index.
struct Transition {
  int from_left = 0;
  int from_right = 0;
  int to_left = 0;
  int to_right = 0;
  double rate = 0.0;
};

/// Target pair of a positive-rate move out of a fixed (left, right) pair.
struct PairMove {
  int to_left = 0;
  int to_right = 0;
  double rate = 0.0;
};

/// Finite local state space with two integer conserved quantities, a base
/// measure and sparse nearest-neighbour jump rates.
///
/// Invariants (enforced by `create`): at least three states; base measure
/// strictly positive and summing to one within 1e-12; zeta, eta and the
/// constant function are linearly independent; every rate is finite,
/// non-negative and never maps a pair onto itself.
class ModelSpec {
 public:
  static ModelSpec create(std::vector<std::string> labels, std::vector<int> zeta,
                          std::vector<int> eta, std::vector<double> base_measure,
                          std::vector<Transition> rates);

  std::size_t num_states() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  int state_index(std::string_view label) const;

  std::span<const int> zeta() const noexcept { return zeta_; }
  std::span<const int> eta() const noexcept { return eta_; }
  std::span<const double> base_measure() const noexcept { return pi_; }
  int zeta(int s) const { return zeta_[static_cast<std::size_t>(s)]; }
  int eta(int s) const { return eta_[static_cast<std::size_t>(s)]; }
  double pi(int s) const { return pi_[static_cast<std::size_t>(s)]; }

  /// All rate entries as given (zero entries included).
  std::span<const Transition> transitions() const noexcept { return rates_; }
  std::size_t nonzero_rate_count() const noexcept;

  double rate(int a, int b, int c, int d) const;
  /// Positive-rate moves out of the ordered pair (a, b).
  std::span<const PairMove> moves(int a, int b) const;
  /// Total rate out of the ordered pair (a, b).
  double pair_rate(int a, int b) const { return pair_total_[pair(a, b)]; }
  double max_pair_rate() const noexcept { return max_pair_rate_; }

  /// Same states and measure, different rates (re-validated).
  ModelSpec with_rates(std::vector<Transition> rates) const;

  int min_zeta() const noexcept;
  int max_zeta() const noexcept;
  int min_eta() const noexcept;
  int max_eta() const noexcept;

 private:
  ModelSpec() = default;
  std::size_t pair(int a, int b) const {
    return static_cast<std::size_t>(a) * labels_.size() + static_cast<std::size_t>(b);
  }

  std::vector<std::string> labels_;
  std::vector<int> zeta_;
  std::vector<int> eta_;
  std::vector<double> pi_;
  std::vector<Transition> rates_;
  std::vector<std::vector<PairMove>> moves_;
  std::vector<double> pair_total_;
  double max_pair_rate_ = 0.0;
};

/// Q(a, b): pi-weighted inflow minus outflow of the ordered pair (a, b).
double compute_Q(const ModelSpec& spec, int a, int b);

/// max over state triples of |Q(a,b) + Q(b,c) + Q(c,a)|.
double max_cyclic_residual(const ModelSpec& spec);

struct ValidationReport {
  bool condition_a_ok = true;
  bool condition_b_ok = true;
  std::vector<int> tested_sizes;
  bool condition_c_ok = true;
  double max_cyclic_residual = 0.0;
  double tolerance = 1e-10;
  double stationarity_residual = 0.0;
  int stationarity_size = 0;
  std::vector<std::string> violations;

  bool ok() const noexcept { return condition_a_ok && condition_b_ok && condition_c_ok; }
  std::string to_text() const;
  std::string to_json() const;
};

/// Certify conditions (A)-(C) exhaustively on the given torus sizes.
/// Throws ConfigError if a size is outside [3, 8] or |states|^n > 1e7.
ValidationReport validate_model(const ModelSpec& spec, std::span<const int> torus_sizes,
                                double tolerance = 1e-10);

/// Row vector (product base measure) times generator, max-norm, on torus n.
double stationarity_residual(const ModelSpec& spec, int n);

enum class SynthesisObjective { none, max_min_rate };

struct SupportEntry {
  int from_left, from_right, to_left, to_right;
};

struct SynthesisProblem {
  std::vector<std::string> labels;
  std::vector<int> zeta;
  std::vector<int> eta;
  std::vector<double> base_measure;
  std::vector<SupportEntry> support;
};

/// Non-negative rates on `support` with all cyclic Q-sums vanishing, scaled
/// so the largest rate is 1. Throws InfeasibleError if only r = 0 works.
std::vector<Transition> synthesize_rates(const SynthesisProblem& problem,
                                         SynthesisObjective objective);

// model_io.cpp

ModelSpec parse_model_spec(std::string_view text, const std::string& source = "<string>");
ModelSpec load_model_spec(const std::string& path);
SynthesisProblem parse_synthesis_problem(std::string_view text,
                                         const std::string& source = "<string>");
SynthesisProblem load_synthesis_problem(const std::string& path);
std::string format_model_spec(const ModelSpec& spec, std::string_view header_comment = {});

}  // namespace pertlab

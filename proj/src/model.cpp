#include "pertlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "pertlab/config_space.hpp"
#include "pertlab/errors.hpp"

namespace pertlab {

namespace {

bool affinely_independent(std::span<const int> zeta, std::span<const int> eta) {
  // zeta, eta, 1 independent <=> the points (zeta, eta) are not collinear.
  const std::size_t k = zeta.size();
  for (std::size_t i = 1; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const long long cross =
          static_cast<long long>(zeta[i] - zeta[0]) * (eta[j] - eta[0]) -
          static_cast<long long>(eta[i] - eta[0]) * (zeta[j] - zeta[0]);
      if (cross != 0) return true;
    }
  }
  return false;
}

std::string transition_name(const ModelSpec& spec, int a, int b, int c, int d) {
  const auto& l = spec.labels();
  auto at = [&](int s) { return l[static_cast<std::size_t>(s)]; };
  return at(a) + " " + at(b) + " -> " + at(c) + " " + at(d);
}

}  // namespace

ModelSpec ModelSpec::create(std::vector<std::string> labels, std::vector<int> zeta,
                            std::vector<int> eta, std::vector<double> base_measure,
                            std::vector<Transition> rates) {
  const std::size_t k = labels.size();
  if (k < 3) throw InvariantError("states", "need at least 3 local states");
  if (k > 255) throw InvariantError("states", "at most 255 local states are supported");
  for (std::size_t i = 0; i < k; ++i) {
    if (labels[i].empty()) throw InvariantError("states", "empty state label");
    for (std::size_t j = 0; j < i; ++j)
      if (labels[i] == labels[j]) throw InvariantError("states", "duplicate label '" + labels[i] + "'");
  }
  if (zeta.size() != k) throw InvariantError("zeta", "one value per state required");
  if (eta.size() != k) throw InvariantError("eta", "one value per state required");
  if (base_measure.size() != k) throw InvariantError("base_measure", "one value per state required");

  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double p = base_measure[i];
    if (!std::isfinite(p) || p <= 0.0 || p > 1.0)
      throw InvariantError("base_measure", "pi(" + labels[i] + ") must lie in (0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InvariantError("base_measure", "probabilities sum to " + std::to_string(total) + ", not 1");

  if (!affinely_independent(zeta, eta))
    throw InvariantError("zeta/eta", "linearly dependent conserved quantities");

  ModelSpec spec;
  spec.labels_ = std::move(labels);
  spec.zeta_ = std::move(zeta);
  spec.eta_ = std::move(eta);
  spec.pi_ = std::move(base_measure);
  spec.moves_.assign(k * k, {});
  spec.pair_total_.assign(k * k, 0.0);

  const int ki = static_cast<int>(k);
  std::map<std::array<int, 4>, bool> seen;
  for (const Transition& t : rates) {
    for (int s : {t.from_left, t.from_right, t.to_left, t.to_right})
      if (s < 0 || s >= ki) throw InvariantError("rates", "state index out of range");
    const std::string name = transition_name(spec, t.from_left, t.from_right, t.to_left, t.to_right);
    if (!std::isfinite(t.rate) || t.rate < 0.0)
      throw InvariantError("rates", "rate of " + name + " must be finite and >= 0");
    if (t.from_left == t.to_left && t.from_right == t.to_right)
      throw InvariantError("rates", "entry " + name + " maps a pair to itself");
    if (!seen.emplace(std::array{t.from_left, t.from_right, t.to_left, t.to_right}, true).second)
      throw InvariantError("rates", "duplicate entry " + name);
    if (t.rate > 0.0) {
      const std::size_t p = spec.pair(t.from_left, t.from_right);
      spec.moves_[p].push_back({t.to_left, t.to_right, t.rate});
      spec.pair_total_[p] += t.rate;
    }
  }
  spec.rates_ = std::move(rates);
  spec.max_pair_rate_ = spec.pair_total_.empty()
                            ? 0.0
                            : *std::max_element(spec.pair_total_.begin(), spec.pair_total_.end());
  return spec;
}

int ModelSpec::state_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  throw InvariantError("states", "unknown state '" + std::string(label) + "'");
}

std::size_t ModelSpec::nonzero_rate_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(rates_.begin(), rates_.end(), [](const Transition& t) { return t.rate > 0.0; }));
}

double ModelSpec::rate(int a, int b, int c, int d) const {
  for (const PairMove& m : moves(a, b))
    if (m.to_left == c && m.to_right == d) return m.rate;
  return 0.0;
}

std::span<const PairMove> ModelSpec::moves(int a, int b) const { return moves_[pair(a, b)]; }

ModelSpec ModelSpec::with_rates(std::vector<Transition> rates) const {
  return create(labels_, zeta_, eta_, pi_, std::move(rates));
}

int ModelSpec::min_zeta() const noexcept { return *std::min_element(zeta_.begin(), zeta_.end()); }
int ModelSpec::max_zeta() const noexcept { return *std::max_element(zeta_.begin(), zeta_.end()); }
int ModelSpec::min_eta() const noexcept { return *std::min_element(eta_.begin(), eta_.end()); }
int ModelSpec::max_eta() const noexcept { return *std::max_element(eta_.begin(), eta_.end()); }

double compute_Q(const ModelSpec& spec, int a, int b) {
  const int k = static_cast<int>(spec.num_states());
  const double pab = spec.pi(a) * spec.pi(b);
  double inflow = 0.0;
  for (int c = 0; c < k; ++c) {
    for (int d = 0; d < k; ++d) {
      const double r = spec.rate(c, d, a, b);
      if (r > 0.0) inflow += spec.pi(c) * spec.pi(d) / pab * r;
    }
  }
  return inflow - spec.pair_rate(a, b);
}

double max_cyclic_residual(const ModelSpec& spec) {
  const std::size_t k = spec.num_states();
  std::vector<double> q(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) q[a * k + b] = compute_Q(spec, static_cast<int>(a), static_cast<int>(b));
  double worst = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t c = 0; c < k; ++c)
        worst = std::max(worst, std::abs(q[a * k + b] + q[b * k + c] + q[c * k + a]));
  return worst;
}

double stationarity_residual(const ModelSpec& spec, int n) {
  const ConfigSpace space(spec.num_states(), n);
  std::vector<double> weight(space.size());
  std::vector<int> digits(static_cast<std::size_t>(n));
  for (std::uint64_t c = 0; c < space.size(); ++c) {
    space.decode(c, digits);
    double w = 1.0;
    for (int s : digits) w *= spec.pi(s);
    weight[c] = w;
  }
  std::vector<double> flow(space.size(), 0.0);
  for (std::uint64_t c = 0; c < space.size(); ++c) {
    space.decode(c, digits);
    for (int j = 0; j < n; ++j) {
      const int a = digits[static_cast<std::size_t>(j)];
      const int b = digits[static_cast<std::size_t>((j + 1) % n)];
      for (const PairMove& m : spec.moves(a, b)) {
        const double f = weight[c] * m.rate;
        flow[c] -= f;
        flow[space.replace_pair(c, j, m.to_left, m.to_right)] += f;
      }
    }
  }
  double worst = 0.0;
  for (double f : flow) worst = std::max(worst, std::abs(f));
  return worst;
}

namespace {

struct SectorCheck {
  bool ok = true;
  std::string detail;
};

// Strong connectivity of every (Z, N) sector of the n-torus.
SectorCheck check_irreducible(const ModelSpec& spec, int n) {
  const ConfigSpace space(spec.num_states(), n);
  const std::size_t k = spec.num_states();

  // Reverse move table: for a target pair, the source pairs with positive rate.
  std::vector<std::vector<std::pair<int, int>>> reverse(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (const PairMove& m : spec.moves(static_cast<int>(a), static_cast<int>(b)))
        reverse[static_cast<std::size_t>(m.to_left) * k + static_cast<std::size_t>(m.to_right)]
            .emplace_back(static_cast<int>(a), static_cast<int>(b));

  const int zmin = n * spec.min_zeta();
  const int nmin = n * spec.min_eta();
  const int zspan = n * (spec.max_zeta() - spec.min_zeta()) + 1;
  const int nspan = n * (spec.max_eta() - spec.min_eta()) + 1;
  std::vector<std::int64_t> representative(static_cast<std::size_t>(zspan) * nspan, -1);
  std::vector<std::int64_t> sector_size(representative.size(), 0);
  std::vector<std::uint32_t> sector_of(space.size());
  std::vector<int> digits(static_cast<std::size_t>(n));
  for (std::uint64_t c = 0; c < space.size(); ++c) {
    space.decode(c, digits);
    int z = 0, e = 0;
    for (int s : digits) {
      z += spec.zeta(s);
      e += spec.eta(s);
    }
    const auto id = static_cast<std::size_t>(z - zmin) * static_cast<std::size_t>(nspan) +
                    static_cast<std::size_t>(e - nmin);
    sector_of[c] = static_cast<std::uint32_t>(id);
    if (representative[id] < 0) representative[id] = static_cast<std::int64_t>(c);
    ++sector_size[id];
  }

  std::vector<std::uint8_t> visited(space.size());
  auto sweep = [&](std::uint64_t root, bool backward) {
    std::fill(visited.begin(), visited.end(), 0);
    std::deque<std::uint64_t> queue{root};
    visited[root] = 1;
    std::int64_t count = 1;
    std::vector<int> d(static_cast<std::size_t>(n));
    while (!queue.empty()) {
      const std::uint64_t c = queue.front();
      queue.pop_front();
      space.decode(c, d);
      for (int j = 0; j < n; ++j) {
        const int a = d[static_cast<std::size_t>(j)];
        const int b = d[static_cast<std::size_t>((j + 1) % n)];
        auto visit = [&](int x, int y) {
          const std::uint64_t next = space.replace_pair(c, j, x, y);
          if (!visited[next]) {
            visited[next] = 1;
            ++count;
            queue.push_back(next);
          }
        };
        if (backward) {
          for (auto [x, y] : reverse[static_cast<std::size_t>(a) * k + static_cast<std::size_t>(b)]) visit(x, y);
        } else {
          for (const PairMove& m : spec.moves(a, b)) visit(m.to_left, m.to_right);
        }
      }
    }
    return count;
  };

  for (std::size_t id = 0; id < representative.size(); ++id) {
    if (representative[id] < 0 || sector_size[id] < 2) continue;
    const auto root = static_cast<std::uint64_t>(representative[id]);
    const std::int64_t fwd = sweep(root, false);
    const std::int64_t bwd = fwd == sector_size[id] ? sweep(root, true) : 0;
    if (fwd != sector_size[id] || bwd != sector_size[id]) {
      const int z = static_cast<int>(id / static_cast<std::size_t>(nspan)) + zmin;
      const int e = static_cast<int>(id % static_cast<std::size_t>(nspan)) + nmin;
      std::ostringstream os;
      os << "condition (B): sector (Z=" << z << ", N=" << e << ") on torus n=" << n
         << " is not irreducible (" << (fwd != sector_size[id] ? fwd : bwd) << " of "
         << sector_size[id] << " configurations reachable"
         << (fwd != sector_size[id] ? "" : " backwards") << ")";
      return {false, os.str()};
    }
  }
  return {};
}

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, std::span<const int> torus_sizes,
                                double tolerance) {
  if (torus_sizes.empty()) throw ConfigError("validate_model: at least one torus size required");
  for (int n : torus_sizes) {
    if (n < 3 || n > 8) throw ConfigError("validate_model: torus size " + std::to_string(n) + " outside [3, 8]");
    if (ConfigSpace::checked_size(spec.num_states(), n, 10'000'000) == 0)
      throw ConfigError("validate_model: |states|^" + std::to_string(n) + " exceeds 1e7 configurations");
  }

  ValidationReport report;
  report.tolerance = tolerance;
  report.tested_sizes.assign(torus_sizes.begin(), torus_sizes.end());
  std::sort(report.tested_sizes.begin(), report.tested_sizes.end());
  report.tested_sizes.erase(std::unique(report.tested_sizes.begin(), report.tested_sizes.end()),
                            report.tested_sizes.end());

  for (const Transition& t : spec.transitions()) {
    if (t.rate <= 0.0) continue;
    const bool dz = spec.zeta(t.from_left) + spec.zeta(t.from_right) !=
                    spec.zeta(t.to_left) + spec.zeta(t.to_right);
    const bool de = spec.eta(t.from_left) + spec.eta(t.from_right) !=
                    spec.eta(t.to_left) + spec.eta(t.to_right);
    if (dz || de) {
      report.condition_a_ok = false;
      report.violations.push_back("condition (A): entry " +
                                  transition_name(spec, t.from_left, t.from_right, t.to_left, t.to_right) +
                                  " changes the " + (dz ? "zeta" : "eta") + "-sum");
    }
  }

  for (int n : report.tested_sizes) {
    const SectorCheck check = check_irreducible(spec, n);
    if (!check.ok) {
      report.condition_b_ok = false;
      report.violations.push_back(check.detail);
    }
  }

  report.max_cyclic_residual = max_cyclic_residual(spec);
  report.condition_c_ok = report.max_cyclic_residual <= tolerance;
  if (!report.condition_c_ok) {
    std::ostringstream os;
    os << "condition (C): max cyclic Q residual " << report.max_cyclic_residual
       << " exceeds tolerance " << tolerance;
    report.violations.push_back(os.str());
  }

  report.stationarity_size = *std::max_element(report.tested_sizes.begin(), report.tested_sizes.end());
  report.stationarity_residual = stationarity_residual(spec, report.stationarity_size);
  return report;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  auto flag = [](bool ok) { return ok ? "ok" : "VIOLATED"; };
  os << "condition (A) conservation:   " << flag(condition_a_ok) << "\n";
  os << "condition (B) irreducibility: " << flag(condition_b_ok) << " (torus sizes";
  for (int n : tested_sizes) os << ' ' << n;
  os << ")\n";
  os << "condition (C) cyclic Q sums:  " << flag(condition_c_ok)
     << " (max residual " << max_cyclic_residual << ", tolerance " << tolerance << ")\n";
  os << "stationarity residual |pi^n L^n|_inf on n=" << stationarity_size << ": "
     << stationarity_residual << "\n";
  for (const auto& v : violations) os << "  - " << v << "\n";
  return os.str();
}

std::string ValidationReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "pertlab.validation/1";
  j["condition_a_ok"] = condition_a_ok;
  j["condition_b_ok"] = condition_b_ok;
  j["tested_sizes"] = tested_sizes;
  j["condition_c_ok"] = condition_c_ok;
  j["max_cyclic_residual"] = max_cyclic_residual;
  j["tolerance"] = tolerance;
  j["stationarity_residual"] = stationarity_residual;
  j["stationarity_size"] = stationarity_size;
  j["violations"] = violations;
  j["ok"] = ok();
  return j.dump(2);
}

}  // namespace pertlab

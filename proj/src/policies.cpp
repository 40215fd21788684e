#include "v2g/policies.hpp"

#include <algorithm>

namespace v2g {

double cafap_fraction(const ChargerView& cv, double dt_hours) {
  if (!cv.occupied) return 0.0;
  const double deficit_kwh = std::max(0.0, cv.desired_kwh - cv.soc_kwh);
  if (deficit_kwh <= 0.0) return 0.0;
  const double grid_kwh = deficit_kwh / cv.eff_charge;
  return std::min(1.0, grid_kwh / (cv.max_charge_kw * dt_hours));
}

std::vector<double> CafapPolicy::act(const Observation&, const StateView& view) {
  std::vector<double> a(view.chargers.size(), 0.0);
  for (std::size_t c = 0; c < view.chargers.size(); ++c)
    a[c] = cafap_fraction(view.chargers[c], view.dt_hours);
  return a;
}

void BauPolicy::reset(const Scenario&) { pointer_ = 0; }

std::vector<double> BauPolicy::act(const Observation&, const StateView& view) {
  const int n = static_cast<int>(view.chargers.size());
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  double budget_kw = view.power_limit_kw;
  for (int k = 0; k < n; ++k) {
    const int c = (pointer_ + k) % n;
    const ChargerView& cv = view.chargers[static_cast<std::size_t>(c)];
    if (!cv.occupied) continue;
    const double want_kw = cafap_fraction(cv, view.dt_hours) * cv.max_charge_kw;
    const double grant_kw = std::clamp(want_kw, 0.0, budget_kw);
    a[static_cast<std::size_t>(c)] = grant_kw / cv.max_charge_kw;
    budget_kw -= grant_kw;
  }
  pointer_ = n > 0 ? (pointer_ + 1) % n : 0;
  return a;
}

std::vector<double> RandomPolicy::act(const Observation&, const StateView& view) {
  std::vector<double> a(view.chargers.size());
  for (double& x : a) x = rng_.uniform(-1.0, 1.0);
  return a;
}

}  // namespace v2g

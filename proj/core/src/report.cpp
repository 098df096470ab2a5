#include "dualbound/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "dualbound/errors.hpp"

namespace dualbound {

namespace {

constexpr std::array<std::pair<BoundMethod, const char*>, 8> kNames{{
    {BoundMethod::trace_purity_dual, "trace_purity_dual"},
    {BoundMethod::tebd_error, "tebd_error"},
    {BoundMethod::nonunital_dual, "nonunital_dual"},
    {BoundMethod::info_dual, "info_dual"},
    {BoundMethod::purity_only, "purity_only"},
    {BoundMethod::info_only, "info_only"},
    {BoundMethod::fermion_dual, "fermion_dual"},
    {BoundMethod::exact, "exact"},
}};

}  // namespace

std::string method_name(BoundMethod m) {
  for (const auto& [k, v] : kNames)
    if (k == m) return v;
  return "unknown";
}

BoundMethod parse_method(const std::string& name) {
  for (const auto& [k, v] : kNames)
    if (name == v) return k;
  throw DomainError("unknown bound method '" + name + "'");
}

void finalize(BoundReport& report) {
  report.penalty_sum = 0.0;
  for (double v : report.per_step_penalties) report.penalty_sum += v;
  report.bound = report.boundary_term - report.penalty_sum;
}

void check_consistent(const BoundReport& report) {
  double sum = 0.0;
  for (double v : report.per_step_penalties) {
    if (!std::isfinite(v)) throw NumericalError("bound report has a non-finite penalty");
    sum += v;
  }
  if (!std::isfinite(report.bound) || !std::isfinite(report.boundary_term))
    throw NumericalError("bound report has a non-finite value");
  const double recomputed = report.boundary_term - sum;
  const double scale = std::max({1.0, std::abs(report.boundary_term), std::abs(sum)});
  if (std::abs(recomputed - report.bound) > 1e-12 * scale)
    throw NumericalError("bound report decomposition does not reproduce the bound");
}

}  // namespace dualbound

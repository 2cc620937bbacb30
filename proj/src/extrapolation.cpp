#include "bmme/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bmme/errors.hpp"

namespace bmme {

Schedule parse_schedule(std::string_view name) {
  if (name == "nesterov") return Schedule::nesterov;
  if (name == "classical") return Schedule::classical;
  if (name == "none") return Schedule::none;
  throw ParseError("unknown schedule '" + std::string(name) + "'");
}

std::string_view to_string(Schedule s) {
  switch (s) {
    case Schedule::nesterov: return "nesterov";
    case Schedule::classical: return "classical";
    case Schedule::none: return "none";
  }
  return "?";
}

ExtrapolationState::ExtrapolationState(Schedule schedule, SafeguardParams safeguard)
    : schedule_(schedule), safeguard_(safeguard) {
  if (!(safeguard_.q > 1.0)) throw DomainError("safeguard exponent q must exceed 1");
  if (!(safeguard_.c > 0.0)) throw DomainError("safeguard constant c must be positive");
}

double ExtrapolationState::next_alpha_raw() {
  ++t_;
  switch (schedule_) {
    case Schedule::nesterov: {
      const double eta_prev = eta_;
      eta_ = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * eta_prev * eta_prev));
      return (eta_prev - 1.0) / eta_;
    }
    case Schedule::classical:
      return static_cast<double>(t_ - 1) / static_cast<double>(t_);
    case Schedule::none:
      return 0.0;
  }
  return 0.0;
}

double ExtrapolationState::safeguarded_alpha(double delta_norm) {
  const double raw = next_alpha_raw();
  if (delta_norm <= 0.0) return raw;
  const double cap = safeguard_.c /
                     (std::pow(static_cast<double>(t_), 0.5 * safeguard_.q) * delta_norm);
  return std::min(raw, cap);
}

double ExtrapolationState::term_cap() const {
  const double t = static_cast<double>(std::max(t_, 1L));
  return safeguard_.c * safeguard_.c / std::pow(t, safeguard_.q);
}

Matrix project_nonneg_diff(const Matrix& curr, const Matrix& prev) {
  return kernels::positive_part_difference(curr, prev).step;
}

kernels::PositiveStep projected_difference(const Matrix& curr, const Matrix& prev,
                                           Projection projection) {
  if (projection == Projection::nonneg) return kernels::positive_part_difference(curr, prev);
  require_same_shape(curr, prev, "projected_difference");
  kernels::PositiveStep out{Matrix(curr.rows(), curr.cols()), 0.0};
  auto c = curr.data();
  auto p = prev.data();
  auto s = out.step.data();
  double sq = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    s[i] = c[i] - p[i];
    sq += s[i] * s[i];
  }
  out.norm = std::sqrt(sq);
  return out;
}

}  // namespace bmme

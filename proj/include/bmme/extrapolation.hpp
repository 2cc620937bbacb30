#pragma once

#include <string_view>

#include "bmme/kernels.hpp"
#include "bmme/matrix.hpp"

namespace bmme {

enum class Schedule { nesterov, classical, none };

Schedule parse_schedule(std::string_view name);
std::string_view to_string(Schedule s);

/// Constants of the summability safeguard alpha <= c / (t^{q/2} ||P(delta)||).
struct SafeguardParams {
  double c = 1e8;
  double q = 1.5;
};

/// Extrapolation-parameter generator for one block.
///
/// Counter t starts at 0; each call to `next_alpha_raw` or `safeguarded_alpha`
/// advances it by one and returns alpha^t:
///   nesterov:  eta_0 = 1, eta_t = (1 + sqrt(1 + 4 eta_{t-1}^2)) / 2,
///              alpha^t = (eta_{t-1} - 1) / eta_t
///   classical: alpha^t = (t - 1) / t
///   none:      alpha^t = 0
/// Every emitted alpha lies in [0, 1).
class ExtrapolationState {
 public:
  explicit ExtrapolationState(Schedule schedule = Schedule::nesterov,
                              SafeguardParams safeguard = {});

  double next_alpha_raw();

  /// min(raw alpha, c / (t^{q/2} delta_norm)); the cap is inactive when
  /// delta_norm == 0. Guarantees alpha^2 delta_norm^2 <= c^2 / t^q.
  double safeguarded_alpha(double delta_norm);

  /// c^2 / t^q at the current counter.
  double term_cap() const;

  long t() const { return t_; }
  double eta() const { return eta_; }
  Schedule schedule() const { return schedule_; }
  const SafeguardParams& safeguard() const { return safeguard_; }

 private:
  Schedule schedule_;
  SafeguardParams safeguard_;
  long t_ = 0;
  double eta_ = 1.0;
};

/// max(0, curr - prev), elementwise.
Matrix project_nonneg_diff(const Matrix& curr, const Matrix& prev);

enum class Projection { nonneg, identity };

/// P(curr - prev) and its Frobenius norm.
kernels::PositiveStep projected_difference(const Matrix& curr, const Matrix& prev,
                                           Projection projection);

}  // namespace bmme

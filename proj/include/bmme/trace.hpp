#pragma once

#include <optional>
#include <vector>

namespace bmme {

struct TraceRecord {
  long iter = 0;
  double wall_seconds = 0.0;
  double objective = 0.0;
  double rel_objective = 0.0;
  double alpha_W = 0.0;
  double alpha_H = 0.0;
  std::optional<double> kkt_residual;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Per-iteration solver record. `iter` is strictly increasing and
/// `wall_seconds` nondecreasing; `push` rejects records that break either.
class ConvergenceTrace {
 public:
  void push(const TraceRecord& record);

  const std::vector<TraceRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  std::size_t size() const { return records_.size(); }
  const TraceRecord& front() const { return records_.front(); }
  const TraceRecord& back() const { return records_.back(); }

  friend bool operator==(const ConvergenceTrace&, const ConvergenceTrace&) = default;

 private:
  std::vector<TraceRecord> records_;
};

}  // namespace bmme

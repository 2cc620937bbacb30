#include "bmme/trace.hpp"

#include <string>

#include "bmme/errors.hpp"

namespace bmme {

void ConvergenceTrace::push(const TraceRecord& record) {
  if (!records_.empty()) {
    const auto& last = records_.back();
    if (record.iter <= last.iter) {
      throw Error("trace iterations must be strictly increasing (" + std::to_string(last.iter) +
                  " then " + std::to_string(record.iter) + ")");
    }
    if (record.wall_seconds < last.wall_seconds) {
      throw Error("trace wall time must be nondecreasing");
    }
  }
  records_.push_back(record);
}

}  // namespace bmme

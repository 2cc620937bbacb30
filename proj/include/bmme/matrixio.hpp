#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "bmme/matrix.hpp"
#include "bmme/trace.hpp"

namespace bmme {

enum class MatrixFormat { matrix_market, csv, dense_binary };

/// Parses "mm", "csv" or "bin" (also the long names).
MatrixFormat parse_matrix_format(std::string_view name);

/// Reads a nonnegative dense matrix.
///
/// Errors: ParseError (malformed text, non-finite entry), NegativeEntry,
/// DimensionMismatch (ragged CSV rows, entry count or file size not matching
/// the declared shape), IoError (file cannot be opened).
Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format);
Matrix read_matrix(std::istream& in, MatrixFormat format);

void write_matrix(const Matrix& m, const std::filesystem::path& path, MatrixFormat format);
void write_matrix(const Matrix& m, std::ostream& out, MatrixFormat format);

enum class Noise { none, poisson, gaussian_clipped };

Noise parse_noise(std::string_view name);

struct SyntheticSpec {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t r_true = 0;
  Noise noise = Noise::none;
  double scale = 1.0;
  std::uint64_t seed = 0;

  /// Throws DomainError unless all sizes are positive, r_true <= min(m, n)
  /// and scale > 0.
  void validate() const;
};

struct SyntheticData {
  Matrix X;
  Matrix W_true;
  Matrix H_true;
};

/// Low-rank nonnegative test data. W_true and H_true are drawn uniformly from
/// (0.1, 1] * scale; X is W_true H_true passed through the chosen noise:
/// Poisson draws X_ij ~ Poisson((W_true H_true)_ij), gaussian-clipped adds
/// N(0, (W_true H_true)_ij) and clips at zero. Deterministic in `seed`.
SyntheticData synth_lowrank(const SyntheticSpec& spec);

enum class TraceFormat { csv, json };

TraceFormat parse_trace_format(std::string_view name);

inline constexpr std::string_view kTraceCsvHeader =
    "iter,wall_seconds,objective,rel_objective,alpha_W,alpha_H,kkt_residual";

void write_trace(const ConvergenceTrace& trace, const std::filesystem::path& path,
                 TraceFormat format);
void write_trace(const ConvergenceTrace& trace, std::ostream& out, TraceFormat format);

ConvergenceTrace read_trace(const std::filesystem::path& path, TraceFormat format);
ConvergenceTrace read_trace(std::istream& in, TraceFormat format);

/// Locale-independent shortest round-trip text for a double, capped at 17
/// significant digits.
std::string format_double(double v);

}  // namespace bmme

#include "bmme/matrixio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmme/errors.hpp"
#include "bmme/kernels.hpp"

namespace bmme {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view token, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse number '" +
                     std::string(token) + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": non-finite entry");
  }
  return v;
}

std::uint64_t parse_count(std::string_view token, std::size_t line) {
  token = trim(token);
  std::uint64_t v = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse integer '" +
                     std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

void require_nonnegative_entry(double v, std::size_t line) {
  if (v < 0.0) {
    throw NegativeEntry("line " + std::to_string(line) + ": negative entry " + format_double(v));
  }
}

Matrix read_csv(std::istream& in) {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      const auto token = body.substr(start, comma == std::string_view::npos ? body.npos
                                                                              : comma - start);
      const double v = parse_double(token, lineno);
      require_nonnegative_entry(v, lineno);
      data.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw DimensionMismatch("line " + std::to_string(lineno) + ": expected " +
                              std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("empty CSV matrix");
  return Matrix(rows, cols, std::move(data));
}

Matrix read_mm(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market file");
  ++lineno;
  std::string lower = line;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto header = split_ws(lower);
  if (header.size() < 5 || header[0] != "%%matrixmarket" || header[1] != "matrix") {
    throw ParseError("missing %%MatrixMarket matrix header");
  }
  const bool coordinate = header[2] == "coordinate";
  if (!coordinate && header[2] != "array") throw ParseError("unknown Matrix Market layout");
  const auto field = header[3];
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer" && field != "double") {
    throw ParseError("unsupported Matrix Market field '" + std::string(field) + "'");
  }
  const auto symmetry = header[4];
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") {
    throw ParseError("unsupported Matrix Market symmetry '" + std::string(symmetry) + "'");
  }
  if (pattern && !coordinate) throw ParseError("pattern field requires coordinate layout");

  // Size line, skipping comments.
  std::vector<std::string_view> size_tokens;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '%') continue;
    size_tokens = split_ws(body);
    break;
  }
  if (size_tokens.size() != (coordinate ? 3u : 2u)) throw ParseError("malformed size line");
  const auto rows = parse_count(size_tokens[0], lineno);
  const auto cols = parse_count(size_tokens[1], lineno);
  if (symmetric && rows != cols) throw DimensionMismatch("symmetric matrix must be square");
  const std::uint64_t expected = coordinate ? parse_count(size_tokens[2], lineno) : rows * cols;

  Matrix m(rows, cols);
  std::uint64_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '%') continue;
    const auto tok = split_ws(body);
    if (seen >= expected) {
      throw DimensionMismatch("more entries than declared (" + std::to_string(expected) + ")");
    }
    if (coordinate) {
      if (tok.size() != (pattern ? 2u : 3u)) {
        throw ParseError("line " + std::to_string(lineno) + ": malformed coordinate entry");
      }
      const auto i = parse_count(tok[0], lineno);
      const auto j = parse_count(tok[1], lineno);
      if (i < 1 || i > rows || j < 1 || j > cols) {
        throw DimensionMismatch("line " + std::to_string(lineno) + ": index out of range");
      }
      const double v = pattern ? 1.0 : parse_double(tok[2], lineno);
      require_nonnegative_entry(v, lineno);
      m(i - 1, j - 1) += v;
      if (symmetric && i != j) m(j - 1, i - 1) += v;
    } else {
      if (tok.size() != 1) {
        throw ParseError("line " + std::to_string(lineno) + ": expected one value");
      }
      const double v = parse_double(tok[0], lineno);
      require_nonnegative_entry(v, lineno);
      // Array layout is column-major.
      m(seen % rows, seen / rows) = v;
    }
    ++seen;
  }
  if (seen != expected) {
    throw DimensionMismatch("declared " + std::to_string(expected) + " entries, found " +
                            std::to_string(seen));
  }
  return m;
}

constexpr std::array<char, 4> kMagic{'N', 'M', 'A', 'T'};

template <class T>
T from_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
T to_little_endian(T v) {
  return from_little_endian(v);
}

template <class T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError(std::string("truncated binary matrix: ") + what);
  }
  return from_little_endian(v);
}

Matrix read_bin(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw ParseError("bad NMAT magic");
  const auto rows = read_pod<std::uint64_t>(in, "rows");
  const auto cols = read_pod<std::uint64_t>(in, "cols");
  std::vector<double> data(rows * cols);
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!in.read(reinterpret_cast<char*>(&data[k]), sizeof(double))) {
      throw DimensionMismatch("binary payload shorter than " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    data[k] = from_little_endian(data[k]);
    if (!std::isfinite(data[k])) throw ParseError("non-finite entry in binary matrix");
    if (data[k] < 0.0) throw NegativeEntry("negative entry in binary matrix");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DimensionMismatch("binary payload longer than declared shape");
  }
  return Matrix(rows, cols, std::move(data));
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::general, 17);
  (void)ec;
  return std::string(buf.data(), ptr);
}

MatrixFormat parse_matrix_format(std::string_view name) {
  if (name == "mm" || name == "matrix-market") return MatrixFormat::matrix_market;
  if (name == "csv") return MatrixFormat::csv;
  if (name == "bin" || name == "dense-binary") return MatrixFormat::dense_binary;
  throw ParseError("unknown matrix format '" + std::string(name) + "'");
}

Matrix read_matrix(std::istream& in, MatrixFormat format) {
  switch (format) {
    case MatrixFormat::csv: return read_csv(in);
    case MatrixFormat::matrix_market: return read_mm(in);
    case MatrixFormat::dense_binary: return read_bin(in);
  }
  throw ParseError("unknown matrix format");
}

Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  auto in = open_in(path, format == MatrixFormat::dense_binary);
  return read_matrix(in, format);
}

void write_matrix(const Matrix& m, std::ostream& out, MatrixFormat format) {
  switch (format) {
    case MatrixFormat::csv:
      for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
          if (j) out << ',';
          out << format_double(row[j]);
        }
        out << '\n';
      }
      break;
    case MatrixFormat::matrix_market:
      out << "%%MatrixMarket matrix array real general\n";
      out << m.rows() << ' ' << m.cols() << '\n';
      for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << '\n';
      break;
    case MatrixFormat::dense_binary: {
      out.write(kMagic.data(), 4);
      const auto rows = to_little_endian<std::uint64_t>(m.rows());
      const auto cols = to_little_endian<std::uint64_t>(m.cols());
      out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
      out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
      for (double v : m.data()) {
        const double le = to_little_endian(v);
        out.write(reinterpret_cast<const char*>(&le), sizeof le);
      }
      break;
    }
  }
  if (!out) throw IoError("failed writing matrix");
}

void write_matrix(const Matrix& m, const std::filesystem::path& path, MatrixFormat format) {
  auto out = open_out(path, format == MatrixFormat::dense_binary);
  write_matrix(m, out, format);
}

Noise parse_noise(std::string_view name) {
  if (name == "none") return Noise::none;
  if (name == "poisson") return Noise::poisson;
  if (name == "gaussian-clipped") return Noise::gaussian_clipped;
  throw ParseError("unknown noise model '" + std::string(name) + "'");
}

void SyntheticSpec::validate() const {
  if (m == 0 || n == 0 || r_true == 0) throw DomainError("synthetic sizes must be positive");
  if (r_true > std::min(m, n)) throw DomainError("r_true must not exceed min(m, n)");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("scale must be positive");
}

SyntheticData synth_lowrank(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  // 1.1 - U[0.1, 1) lies in (0.1, 1].
  auto draw = [&] { return (1.1 - unit(rng)) * spec.scale; };
  SyntheticData out{Matrix(), Matrix(spec.m, spec.r_true), Matrix(spec.r_true, spec.n)};
  for (double& v : out.W_true.data()) v = draw();
  for (double& v : out.H_true.data()) v = draw();
  out.X = kernels::matmul(out.W_true, out.H_true);
  switch (spec.noise) {
    case Noise::none: break;
    case Noise::poisson:
      for (double& v : out.X.data()) {
        std::poisson_distribution<long long> pois(v);
        v = static_cast<double>(pois(rng));
      }
      break;
    case Noise::gaussian_clipped: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (double& v : out.X.data()) v = std::max(0.0, v + std::sqrt(v) * gauss(rng));
      break;
    }
  }
  return out;
}

TraceFormat parse_trace_format(std::string_view name) {
  if (name == "csv") return TraceFormat::csv;
  if (name == "json") return TraceFormat::json;
  throw ParseError("unknown trace format '" + std::string(name) + "'");
}

void write_trace(const ConvergenceTrace& trace, std::ostream& out, TraceFormat format) {
  if (format == TraceFormat::csv) {
    out << kTraceCsvHeader << '\n';
    for (const auto& r : trace.records()) {
      out << r.iter << ',' << format_double(r.wall_seconds) << ',' << format_double(r.objective)
          << ',' << format_double(r.rel_objective) << ',' << format_double(r.alpha_W) << ','
          << format_double(r.alpha_H) << ',';
      if (r.kkt_residual) out << format_double(*r.kkt_residual);
      out << '\n';
    }
  } else {
    auto num = [](double v) -> nlohmann::json {
      return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : trace.records()) {
      arr.push_back({{"iter", r.iter},
                     {"wall_seconds", num(r.wall_seconds)},
                     {"objective", num(r.objective)},
                     {"rel_objective", num(r.rel_objective)},
                     {"alpha_W", num(r.alpha_W)},
                     {"alpha_H", num(r.alpha_H)},
                     {"kkt_residual", r.kkt_residual ? num(*r.kkt_residual) : nullptr}});
    }
    out << arr.dump(1) << '\n';
  }
  if (!out) throw IoError("failed writing trace");
}

void write_trace(const ConvergenceTrace& trace, const std::filesystem::path& path,
                 TraceFormat format) {
  auto out = open_out(path, false);
  write_trace(trace, out, format);
}

ConvergenceTrace read_trace(std::istream& in, TraceFormat format) {
  ConvergenceTrace trace;
  if (format == TraceFormat::csv) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kTraceCsvHeader) {
      throw ParseError("missing trace CSV header");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      std::vector<std::string_view> fields;
      std::string_view body = line;
      if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
      std::size_t start = 0;
      while (true) {
        const auto comma = body.find(',', start);
        fields.push_back(body.substr(start, comma == body.npos ? body.npos : comma - start));
        if (comma == body.npos) break;
        start = comma + 1;
      }
      if (fields.size() != 7) throw ParseError("line " + std::to_string(lineno) + ": need 7 fields");
      auto real = [&](std::string_view f) {
        f = trim(f);
        double v = 0.0;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (f.empty() || ec != std::errc() || p != f.data() + f.size()) {
          throw ParseError("line " + std::to_string(lineno) + ": bad number '" + std::string(f) + "'");
        }
        return v;
      };
      TraceRecord r;
      r.iter = static_cast<long>(parse_count(fields[0], lineno));
      r.wall_seconds = real(fields[1]);
      r.objective = real(fields[2]);
      r.rel_objective = real(fields[3]);
      r.alpha_W = real(fields[4]);
      r.alpha_H = real(fields[5]);
      if (!trim(fields[6]).empty()) r.kkt_residual = real(fields[6]);
      trace.push(r);
    }
  } else {
    nlohmann::json arr;
    try {
      in >> arr;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("trace JSON: ") + e.what());
    }
    auto num = [](const nlohmann::json& v) {
      return v.is_null() ? std::nan("") : v.get<double>();
    };
    for (const auto& j : arr) {
      TraceRecord r;
      r.iter = j.at("iter").get<long>();
      r.wall_seconds = num(j.at("wall_seconds"));
      r.objective = num(j.at("objective"));
      r.rel_objective = num(j.at("rel_objective"));
      r.alpha_W = num(j.at("alpha_W"));
      r.alpha_H = num(j.at("alpha_H"));
      if (!j.at("kkt_residual").is_null()) r.kkt_residual = j.at("kkt_residual").get<double>();
      trace.push(r);
    }
  }
  return trace;
}

ConvergenceTrace read_trace(const std::filesystem::path& path, TraceFormat format) {
  auto in = open_in(path, false);
  return read_trace(in, format);
}

}  // namespace bmme

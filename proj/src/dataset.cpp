#include "nflow/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "nflow/errors.hpp"

namespace nflow {

OperatorKind operator_kind_from_string(const std::string& s) {
  if (s == "identity") return OperatorKind::Identity;
  if (s == "antiderivative") return OperatorKind::Antiderivative;
  throw DomainError("unknown operator '" + s + "' (expected identity or antiderivative)");
}

const char* to_string(OperatorKind k) noexcept {
  return k == OperatorKind::Identity ? "identity" : "antiderivative";
}

FunctionDataset fourier_dataset(OperatorKind kind, int n, int modes, int count, std::uint64_t seed) {
  if (n < 1 || modes < 0 || count < 0) throw StructuralError("dataset needs n >= 1, modes >= 0, count >= 0");
  if (2 * modes >= n) throw StructuralError("grid too coarse for the requested modes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::numbers::pi;
  const double r2 = std::numbers::sqrt2;
  FunctionDataset out{Matrix::Zero(n, count), Matrix::Zero(n, count)};
  for (int c = 0; c < count; ++c) {
    for (int j = 1; j <= modes; ++j) {
      const double a = normal(rng) / j;
      const double b = normal(rng) / j;
      const double w = 2.0 * pi * j;
      for (int p = 0; p < n; ++p) {
        const double x = static_cast<double>(p) / n;
        const double cs = r2 * std::cos(w * x), sn = r2 * std::sin(w * x);
        out.inputs(p, c) += a * cs + b * sn;
        if (kind == OperatorKind::Antiderivative) {
          out.outputs(p, c) += (a * sn - b * cs) / w;
        }
      }
    }
  }
  if (kind == OperatorKind::Identity) out.outputs = out.inputs;
  return out;
}

std::string functions_to_csv(const Matrix& functions) {
  const Eigen::Index n = functions.rows();
  std::ostringstream os;
  os.precision(17);
  os << "n=" << n << ",h=" << 1.0 / static_cast<double>(n) << "\n";
  for (Eigen::Index c = 0; c < functions.cols(); ++c) {
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p > 0) os << ',';
      os << functions(p, c);
    }
    os << "\n";
  }
  return os.str();
}

namespace {

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw FormatError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

Matrix functions_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header)) throw FormatError("empty function file");
  int n = 0;
  if (std::sscanf(header.c_str(), "n=%d,h=", &n) != 1 || n < 1) {
    throw FormatError("first line must read n=<points>,h=<spacing>");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(parse_double(cell, lineno));
    if (static_cast<int>(row.size()) != n) {
      throw FormatError("line " + std::to_string(lineno) + ": expected " + std::to_string(n) + " values");
    }
    rows.push_back(std::move(row));
  }
  Matrix out(n, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    for (int p = 0; p < n; ++p) out(p, static_cast<Eigen::Index>(c)) = rows[c][static_cast<std::size_t>(p)];
  }
  return out;
}

}  // namespace nflow

#include "nflow/neural_operator.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nflow/serialize.hpp"

namespace nflow {

namespace {

constexpr double kGramTolerance = 1e-10;

Matrix fourier_rows(int n, int count) {
  Matrix b(count, n);
  const double r2 = std::sqrt(2.0);
  for (int r = 0; r < count; ++r) {
    const int freq = (r + 1) / 2;
    for (int p = 0; p < n; ++p) {
      const double x = static_cast<double>(p) / n;
      if (r == 0) {
        b(r, p) = 1.0;
      } else if (r % 2 == 1) {
        b(r, p) = r2 * std::cos(2.0 * std::numbers::pi * freq * x);
      } else {
        b(r, p) = r2 * std::sin(2.0 * std::numbers::pi * freq * x);
      }
    }
  }
  return b;
}

}  // namespace

double gram_deviation(const Matrix& basis) {
  if (basis.rows() == 0) return 0.0;
  const Matrix gram = basis * basis.transpose() / static_cast<double>(basis.cols());
  return (gram - Matrix::Identity(basis.rows(), basis.rows())).cwiseAbs().maxCoeff();
}

BasisFrame::BasisFrame(ChannelKind grid, Matrix input_basis, Matrix output_basis)
    : grid_(grid), input_(std::move(input_basis)), output_(std::move(output_basis)) {
  if (!grid_.is_grid()) throw StructuralError("basis frames live on grid channels");
  if (input_.cols() != grid_.points() || output_.cols() != grid_.points()) {
    throw StructuralError("basis functions must be sampled on the frame grid");
  }
  if (gram_deviation(input_) > kGramTolerance) throw DomainError("input basis is not orthonormal");
  if (gram_deviation(output_) > kGramTolerance) throw DomainError("output basis is not orthonormal");
}

BasisFrame BasisFrame::fourier(int n, int k, int m) {
  if (k < 0 || m < 0) throw StructuralError("basis sizes must be nonnegative");
  // Mode count c uses frequencies up to c/2, which must stay below Nyquist.
  const int highest = std::max(k, m) / 2;
  if (2 * highest >= n) {
    throw DomainError("Fourier frame with " + std::to_string(std::max(k, m)) + " functions needs n > " +
                      std::to_string(2 * highest) + ", got " + std::to_string(n));
  }
  BasisFrame f(ChannelKind::grid(n, 1), fourier_rows(n, k), fourier_rows(n, m));
  f.fourier_ = true;
  return f;
}

double grid_inner(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw StructuralError("grid functions have different resolutions");
  return u.dot(v) / static_cast<double>(u.size());
}

double grid_l2_norm(const Vector& v) { return std::sqrt(grid_inner(v, v)); }

Vector encode(const BasisFrame& frame, const Vector& v) {
  if (v.size() != frame.grid().points()) throw StructuralError("function is not sampled on the frame grid");
  return frame.input_basis() * v / static_cast<double>(v.size());
}

Matrix encode_columns(const BasisFrame& frame, const Matrix& functions) {
  if (functions.rows() != frame.grid().points()) throw StructuralError("functions are not sampled on the frame grid");
  return frame.input_basis() * functions / static_cast<double>(functions.rows());
}

Vector encode_output(const BasisFrame& frame, const Vector& u) {
  if (u.size() != frame.grid().points()) throw StructuralError("function is not sampled on the frame grid");
  return frame.output_basis() * u / static_cast<double>(u.size());
}

Vector decode(const BasisFrame& frame, const Vector& u) {
  if (u.size() != frame.m()) {
    throw StructuralError("decode expects " + std::to_string(frame.m()) + " coefficients, got " +
                          std::to_string(u.size()));
  }
  return frame.output_basis().transpose() * u;
}

double truncation_error(const BasisFrame& frame, const std::vector<Vector>& samples) {
  double best = 0.0;
  for (const auto& v : samples) {
    const Vector proj = frame.input_basis().transpose() * encode(frame, v);
    best = std::max(best, grid_l2_norm(v - proj));
  }
  return best;
}

OperatorModel::OperatorModel(BasisFrame frame_, Network core_, double coefficient_bound_)
    : frame(std::move(frame_)), core(std::move(core_)), coefficient_bound(coefficient_bound_) {
  if (core.kind().is_grid()) throw StructuralError("operator core must use scalar channels");
  if (core.input_dim() != frame.k() || core.output_dim() != frame.m()) {
    throw StructuralError("core dimensions do not match the frame (k = " + std::to_string(frame.k()) +
                          ", m = " + std::to_string(frame.m()) + ")");
  }
}

Vector operator_forward(const OperatorModel& model, const Vector& v) {
  const Vector c = encode(model.frame, v);
  const Matrix u = forward(model.core, Matrix(c));
  return decode(model.frame, u.col(0));
}

std::string save(const OperatorModel& model) {
  io::Json j = io::network_to_json(model.core);
  j["document"] = "operator";
  const auto& f = model.frame;
  if (f.is_fourier()) {
    j["basis"] = io::Json{{"kind", "fourier"}, {"n", f.grid().n()}, {"k", f.k()}, {"m", f.m()}};
  } else {
    j["basis"] = io::Json{{"kind", "explicit"},
                          {"grid", io::channel_kind_to_json(f.grid())},
                          {"input", io::matrix_to_json(f.input_basis())},
                          {"output", io::matrix_to_json(f.output_basis())}};
  }
  j["coefficient_bound"] = model.coefficient_bound;
  return io::dump(j);
}

OperatorModel load_operator(const std::string& document) {
  try {
    const io::Json j = io::parse(document);
    Network core = io::network_from_json(j);
    if (!j.contains("basis")) throw FormatError("operator document has no basis block");
    const auto& b = j.at("basis");
    const std::string kind = b.at("kind").get<std::string>();
    const double bound = j.contains("coefficient_bound") ? j.at("coefficient_bound").get<double>() : 0.0;
    if (kind == "fourier") {
      return OperatorModel(BasisFrame::fourier(b.at("n").get<int>(), b.at("k").get<int>(), b.at("m").get<int>()),
                           std::move(core), bound);
    }
    if (kind == "explicit") {
      BasisFrame frame(io::channel_kind_from_json(b.at("grid")), io::matrix_from_json(b.at("input")),
                       io::matrix_from_json(b.at("output")));
      return OperatorModel(std::move(frame), std::move(core), bound);
    }
    throw FormatError("unknown basis kind '" + kind + "'");
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("malformed operator document: ") + e.what());
  } catch (const StructuralError& e) {
    throw FormatError(std::string("invalid operator document: ") + e.what());
  }
}

}  // namespace nflow

#include "nflow/params.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nflow {

const char* to_string(Structure s) noexcept {
  return s == Structure::Composition ? "composition" : "separation";
}

Structure structure_from_string(const std::string& s) {
  if (s == "composition") return Structure::Composition;
  if (s == "separation") return Structure::Separation;
  throw FormatError("unknown flow structure '" + s + "'");
}

int coupling_channels(const Coupling& c) {
  if (const auto* m = std::get_if<Matrix>(&c)) return static_cast<int>(m->rows());
  return std::get<ConvKernel>(c).channels();
}

double coupling_norm(const Coupling& c) {
  if (const auto* m = std::get_if<Matrix>(&c)) return row_sum_norm(*m);
  return std::get<ConvKernel>(c).operator_norm();
}

bool is_dense(const Coupling& c) noexcept { return std::holds_alternative<Matrix>(c); }

Matrix apply_coupling(const Coupling& c, const Matrix& values) {
  if (const auto* m = std::get_if<Matrix>(&c)) {
    if (m->cols() != values.rows()) throw StructuralError("coupling matrix does not match channel count");
    return (*m) * values;
  }
  return conv_apply(std::get<ConvKernel>(c), values);
}

namespace {

double coupling_difference_norm(const Coupling& a, const Coupling& b) {
  if (is_dense(a) != is_dense(b)) throw StructuralError("cannot compare dense and convolutional couplings");
  if (is_dense(a)) {
    const auto& ma = std::get<Matrix>(a);
    const auto& mb = std::get<Matrix>(b);
    if (ma.rows() != mb.rows() || ma.cols() != mb.cols()) throw StructuralError("coupling shapes differ");
    return row_sum_norm(ma - mb);
  }
  return std::get<ConvKernel>(a).plus(std::get<ConvKernel>(b).scaled(-1.0)).operator_norm();
}

double bias_difference_norm(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw StructuralError("bias channel counts differ");
  if (a.cols() == b.cols()) return (a - b).cwiseAbs().maxCoeff();
  if (a.cols() == 1) return (b.colwise() - a.col(0)).cwiseAbs().maxCoeff();
  if (b.cols() == 1) return (a.colwise() - b.col(0)).cwiseAbs().maxCoeff();
  throw StructuralError("bias field resolutions differ");
}

bool near_integer(double r, long& m) {
  m = std::lround(r);
  return std::abs(r - static_cast<double>(m)) <= 1e-9 * std::max(1.0, std::abs(r));
}

}  // namespace

ParamPath::ParamPath(Structure structure, std::vector<ParamSegment> segments, bool allow_field_bias)
    : structure_(structure), segments_(std::move(segments)), allow_field_bias_(allow_field_bias),
      channels_(0), total_time_(0.0) {
  if (segments_.empty()) throw StructuralError("parameter path needs at least one segment");
  channels_ = coupling_channels(segments_.front().W);
  if (channels_ < 1) throw StructuralError("parameter path needs at least one channel");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    auto& seg = segments_[i];
    const std::string where = "segment " + std::to_string(i) + ": ";
    if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
      throw StructuralError(where + "duration must be positive and finite");
    }
    if (const auto* m = std::get_if<Matrix>(&seg.W)) {
      if (m->rows() != channels_ || m->cols() != channels_) {
        throw StructuralError(where + "W must be " + std::to_string(channels_) + "x" +
                              std::to_string(channels_));
      }
      if (!m->allFinite()) throw StructuralError(where + "W has non-finite entries");
    } else {
      const auto& k = std::get<ConvKernel>(seg.W);
      if (k.channels() != channels_) throw StructuralError(where + "kernel channel count mismatch");
      if (!std::isfinite(k.max_abs())) throw StructuralError(where + "kernel has non-finite entries");
    }
    if (seg.b.rows() != channels_) {
      throw StructuralError(where + "b must have " + std::to_string(channels_) + " entries");
    }
    if (seg.b.cols() != 1) {
      if (!allow_field_bias_) {
        throw StructuralError(where + "field biases are disabled; biases must be constant per channel");
      }
      if (const auto* k = std::get_if<ConvKernel>(&seg.W); k && seg.b.cols() != k->grid().points()) {
        throw StructuralError(where + "bias field resolution does not match the kernel grid");
      }
    }
    if (!seg.b.allFinite() || !std::isfinite(seg.alpha)) {
      throw StructuralError(where + "non-finite bias or alpha");
    }
    if (structure_ == Structure::Composition) seg.alpha = 0.0;
    total_time_ += seg.duration;
  }
}

std::size_t ParamPath::segment_at(double t) const {
  double end = 0.0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    end += segments_[i].duration;
    if (t <= end) return i;
  }
  return segments_.size() - 1;
}

double path_sup_norm(const ParamPath& p) {
  double best = 0.0;
  for (const auto& seg : p.segments()) {
    best = std::max({best, coupling_norm(seg.W), seg.b.cwiseAbs().maxCoeff(), std::abs(seg.alpha)});
  }
  return best;
}

double path_distance(const ParamPath& p1, const ParamPath& p2) {
  if (p1.structure() != p2.structure()) throw StructuralError("paths have different structures");
  if (p1.channels() != p2.channels()) throw StructuralError("paths have different channel counts");
  const double tol = 1e-12 * std::max(p1.total_time(), p2.total_time());
  if (std::abs(p1.total_time() - p2.total_time()) > tol) throw StructuralError("paths have different total times");

  double best = 0.0;
  std::size_t i = 0, j = 0;
  double end1 = p1.segment(0).duration, end2 = p2.segment(0).duration;
  while (i < p1.size() && j < p2.size()) {
    const auto& s1 = p1.segment(i);
    const auto& s2 = p2.segment(j);
    best = std::max({best, coupling_difference_norm(s1.W, s2.W), bias_difference_norm(s1.b, s2.b),
                     std::abs(s1.alpha - s2.alpha)});
    if (std::abs(end1 - end2) <= tol) {
      if (++i < p1.size()) end1 += p1.segment(i).duration;
      if (++j < p2.size()) end2 += p2.segment(j).duration;
    } else if (end1 < end2) {
      if (++i < p1.size()) end1 += p1.segment(i).duration;
    } else {
      if (++j < p2.size()) end2 += p2.segment(j).duration;
    }
  }
  return best;
}

ParamPath perturb(const ParamPath& p, const ParamPath& delta) {
  if (p.structure() != delta.structure()) throw StructuralError("perturbation has a different structure");
  if (p.size() != delta.size()) {
    throw StructuralError("perturbation has " + std::to_string(delta.size()) + " segments, path has " +
                          std::to_string(p.size()));
  }
  std::vector<ParamSegment> out;
  out.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p.segment(i);
    const auto& d = delta.segment(i);
    if (a.duration != d.duration) {
      throw StructuralError("perturbation segment " + std::to_string(i) + " has a different duration");
    }
    ParamSegment s;
    s.duration = a.duration;
    if (is_dense(a.W) != is_dense(d.W)) throw StructuralError("perturbation coupling kind differs");
    if (is_dense(a.W)) {
      const auto& wa = std::get<Matrix>(a.W);
      const auto& wd = std::get<Matrix>(d.W);
      if (wa.rows() != wd.rows() || wa.cols() != wd.cols()) throw StructuralError("perturbation W shape differs");
      s.W = Matrix(wa + wd);
    } else {
      s.W = std::get<ConvKernel>(a.W).plus(std::get<ConvKernel>(d.W));
    }
    if (a.b.rows() != d.b.rows() || a.b.cols() != d.b.cols()) throw StructuralError("perturbation b shape differs");
    s.b = a.b + d.b;
    s.alpha = a.alpha + d.alpha;
    out.push_back(std::move(s));
  }
  return ParamPath(p.structure(), std::move(out), p.allow_field_bias() || delta.allow_field_bias());
}

TimeCorrection time_correct(const ParamPath& p, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step must be positive, got " + std::to_string(dt));
  std::vector<ParamSegment> segs = p.segments();
  double max_shift = 0.0;
  for (auto& seg : segs) {
    const double r = seg.duration / dt;
    // Nearest multiple; the slack keeps exact ties that land a few ulps low
    // (0.45 / 0.1) rounding upward.
    double m = std::floor(r + 0.5 + 1e-9 * std::max(1.0, r));
    if (m < 1.0) m = 1.0;
    const double corrected = m * dt;
    max_shift = std::max(max_shift, std::abs(seg.duration - corrected));
    seg.duration = corrected;
  }
  return {ParamPath(p.structure(), std::move(segs), p.allow_field_bias()), max_shift};
}

std::vector<long> aligned_steps(const ParamPath& p, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time step must be positive, got " + std::to_string(dt));
  std::vector<long> steps;
  steps.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    long m = 0;
    if (!near_integer(p.segment(i).duration / dt, m) || m < 1) {
      throw AlignmentError("segment " + std::to_string(i) + " duration " +
                           std::to_string(p.segment(i).duration) + " is not a multiple of dt = " +
                           std::to_string(dt) + "; run time correction first");
    }
    steps.push_back(m);
  }
  return steps;
}

std::pair<ParamPath, ParamPath> split_path(const ParamPath& p, double t) {
  if (!(t > 0.0 && t < p.total_time())) throw DomainError("split time must lie strictly inside (0, T)");
  std::vector<ParamSegment> first, second;
  double start = 0.0;
  for (const auto& seg : p.segments()) {
    const double end = start + seg.duration;
    if (end <= t) {
      first.push_back(seg);
    } else if (start >= t) {
      second.push_back(seg);
    } else {
      ParamSegment a = seg, b = seg;
      a.duration = t - start;
      b.duration = end - t;
      first.push_back(std::move(a));
      second.push_back(std::move(b));
    }
    start = end;
  }
  return {ParamPath(p.structure(), std::move(first), p.allow_field_bias()),
          ParamPath(p.structure(), std::move(second), p.allow_field_bias())};
}

}  // namespace nflow

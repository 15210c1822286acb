#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "nflow/convops.hpp"
#include "nflow/core.hpp"

namespace nflow {

enum class Structure { Composition, Separation };

const char* to_string(Structure s) noexcept;
Structure structure_from_string(const std::string& s);

/// Channel coupling: a dense D x D matrix acting pointwise, or a periodic
/// convolution on grid channels.
using Coupling = std::variant<Matrix, ConvKernel>;

int coupling_channels(const Coupling& c);
double coupling_norm(const Coupling& c);
bool is_dense(const Coupling& c) noexcept;
/// Applies the coupling to a D x points value block.
Matrix apply_coupling(const Coupling& c, const Matrix& values);

/// One constant piece of a parameter path.
struct ParamSegment {
  double duration = 0.0;
  Coupling W = Matrix();
  /// D x 1 (one constant per channel) or D x points (field bias, opt-in).
  Matrix b;
  /// Separation structure only; composition segments carry 0.
  double alpha = 0.0;
};

/// Piecewise-constant control theta_t = (W_t, b_t, alpha_t) on (0, T].
class ParamPath {
 public:
  ParamPath(Structure structure, std::vector<ParamSegment> segments, bool allow_field_bias = false);

  Structure structure() const noexcept { return structure_; }
  const std::vector<ParamSegment>& segments() const noexcept { return segments_; }
  const ParamSegment& segment(std::size_t i) const { return segments_.at(i); }
  std::size_t size() const noexcept { return segments_.size(); }
  int channels() const noexcept { return channels_; }
  double total_time() const noexcept { return total_time_; }
  bool allow_field_bias() const noexcept { return allow_field_bias_; }

  /// Segment index active on (t_{k}, t_{k+1}] for a time inside (0, T].
  std::size_t segment_at(double t) const;

 private:
  Structure structure_;
  std::vector<ParamSegment> segments_;
  bool allow_field_bias_;
  int channels_;
  double total_time_;
};

/// max over segments of max(||W||_inf, ||b||_inf, |alpha|).
double path_sup_norm(const ParamPath& p);

/// ||theta1 - theta2||_{inf,inf}, evaluated on the common refinement of
/// both segmentations.
double path_distance(const ParamPath& p1, const ParamPath& p2);

/// Entrywise sum; durations must agree.
ParamPath perturb(const ParamPath& p, const ParamPath& delta);

struct TimeCorrection {
  ParamPath path;
  double max_shift;
};

/// Snaps every duration to the nearest multiple of dt (ties toward +inf,
/// zero results promoted to one step).
TimeCorrection time_correct(const ParamPath& p, double dt);

/// Number of dt steps in each segment. Throws AlignmentError if a duration
/// is not an integer multiple of dt.
std::vector<long> aligned_steps(const ParamPath& p, double dt);

/// Splits the path at time t into [0, t] and [t, T].
std::pair<ParamPath, ParamPath> split_path(const ParamPath& p, double t);

}  // namespace nflow

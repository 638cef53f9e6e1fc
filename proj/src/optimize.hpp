#pragma once

#include <functional>
#include <vector>

namespace ionkit::detail {

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// GSL nmsimplex2 from `x0` with initial steps `step`; stops when the simplex
/// size falls below `size_tolerance`.
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x0,
                          const std::vector<double>& step, int max_iterations, double size_tolerance);

}  // namespace ionkit::detail

#include "optimize.hpp"

#include <cmath>
#include <limits>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "ionkit/errors.hpp"

namespace ionkit::detail {

namespace {

struct Context {
  const std::function<double(const std::vector<double>&)>* f;
  std::vector<double> buffer;
};

double trampoline(const gsl_vector* v, void* params) {
  auto* ctx = static_cast<Context*>(params);
  for (std::size_t i = 0; i < ctx->buffer.size(); ++i) ctx->buffer[i] = gsl_vector_get(v, i);
  const double value = (*ctx->f)(ctx->buffer);
  return std::isfinite(value) ? value : std::numeric_limits<double>::max();
}

}  // namespace

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x0,
                          const std::vector<double>& step, int max_iterations, double size_tolerance) {
  const std::size_t n = x0.size();
  if (n == 0 || step.size() != n) throw InvalidArgument("nelder_mead: dimension mismatch");
  gsl_set_error_handler_off();

  Context ctx{&f, std::vector<double>(n)};
  gsl_multimin_function fn{&trampoline, n, &ctx};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* s = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    gsl_vector_set(s, i, step[i]);
  }
  gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(m, &fn, x, s);

  SimplexResult r;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && r.iterations < max_iterations) {
    ++r.iterations;
    if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), size_tolerance);
  }
  r.converged = status == GSL_SUCCESS;
  r.value = m->fval;
  r.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.x[i] = gsl_vector_get(m->x, i);

  gsl_multimin_fminimizer_free(m);
  gsl_vector_free(s);
  gsl_vector_free(x);
  return r;
}

}  // namespace ionkit::detail

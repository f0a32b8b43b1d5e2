#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "jpis/autograd.hpp"

namespace jpis {

/// Builds a scalar loss on the given tape from parameters it binds itself.
using LossProgram = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// |a - b| / max(1e-8, |a| + |b|)
double relative_error(double a, double b);

/// Compares backward-pass gradients with central differences
/// (f(x+eps) - f(x-eps)) / 2eps for every element of every parameter.
/// Rejects epsilon outside [1e-6, 1e-4] and programs that use dropout.
/// Parameter values are restored and gradients left as computed by backward.
GradCheckReport grad_check_report(const LossProgram& program,
                                  ParameterStore& params, double epsilon);

double grad_check(const LossProgram& program, ParameterStore& params,
                  double epsilon);

}  // namespace jpis

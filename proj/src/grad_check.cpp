#include "jpis/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "jpis/errors.hpp"

namespace jpis {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

GradCheckReport grad_check_report(const LossProgram& program,
                                  ParameterStore& params, double epsilon) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4)) {
    throw ValidationError("grad_check: epsilon must lie in [1e-6, 1e-4]");
  }
  params.zero_grad();
  {
    Tape tape;
    Var loss = program(tape);
    if (tape.stochastic()) {
      throw ValidationError(
          "grad_check: program is non-deterministic (dropout enabled)");
    }
    tape.backward(loss);
  }

  auto evaluate = [&]() {
    Tape tape(/*recording=*/false);
    return program(tape).value().item();
  };

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& param = params[p];
    auto values = param.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = evaluate();
      values[i] = saved - epsilon;
      const double minus = evaluate();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = param.grad[i];
      const double err = relative_error(analytic, numeric);
      ++report.elements_checked;
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = param.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

double grad_check(const LossProgram& program, ParameterStore& params,
                  double epsilon) {
  return grad_check_report(program, params, epsilon).max_relative_error;
}

}  // namespace jpis

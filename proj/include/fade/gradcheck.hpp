#pragma once

#include <functional>
#include <string>

#include "fade/tape.hpp"

namespace fade {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    bool passed = false;
    std::string summary() const;
};

// Builds the scalar function on a fresh tape; the parameter enters as the
// (single) differentiable leaf.
using ScalarFn = std::function<Var(Tape&, Var param)>;

// Compares reverse-mode gradients against central finite differences
// (f(p+h e_i) - f(p-h e_i)) / 2h. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport check_gradient(const ScalarFn& f, const Tensor& p, double h, double tol);

}  // namespace fade

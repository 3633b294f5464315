#include "fade/gradcheck.hpp"

#include <cmath>

namespace fade {

std::string GradCheckReport::summary() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s max_rel_err=%.3e at index %zu (analytic=%.6e numeric=%.6e)",
                  passed ? "pass" : "FAIL", max_rel_error, worst_index, analytic_at_worst,
                  numeric_at_worst);
    return buf;
}

static double eval_scalar(const ScalarFn& f, const Tensor& p) {
    Tape tape;
    Var param = tape.leaf(p, false);
    Var out = f(tape, param);
    double v = tape.scalar_value(out);
    if (!std::isfinite(v)) throw NumericError("check_gradient: non-finite value at probe point");
    return v;
}

GradCheckReport check_gradient(const ScalarFn& f, const Tensor& p, double h, double tol) {
    if (h <= 0.0) throw DataError("check_gradient: step must be positive");

    Tape tape;
    Var param = tape.leaf(p, true);
    Var out = f(tape, param);
    if (!tape.value(out).is_scalar())
        throw DataError("check_gradient: function must produce a scalar");
    tape.backward(out);
    Tensor analytic = tape.grad(param);

    GradCheckReport rep;
    rep.passed = true;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        Tensor plus = p, minus = p;
        plus.data[i] += h;
        minus.data[i] -= h;
        double numeric = (eval_scalar(f, plus) - eval_scalar(f, minus)) / (2.0 * h);
        double a = analytic.data[i];
        double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        double rel = std::fabs(a - numeric) / denom;
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_index = i;
            rep.analytic_at_worst = a;
            rep.numeric_at_worst = numeric;
        }
    }
    rep.passed = rep.max_rel_error <= tol;
    return rep;
}

}  // namespace fade

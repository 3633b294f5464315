#include "fade/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fade {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

constexpr double kTinyNorm = 1e-150;

}  // namespace

Tape::Node& Tape::node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
const Tape::Node& Tape::node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

void Tape::check_owned(Var v, const char* what) const {
    if (v.tape != this || v.id < 0 || v.id >= size())
        throw DataError(std::string(what) + ": variable is not on this tape");
}

Tensor& Tape::grad_buffer(int node_id) {
    Node& n = nodes_[static_cast<std::size_t>(node_id)];
    if (n.grad.numel() == 0 && n.value.numel() != 0) n.grad = Tensor::zeros(n.value.shape);
    if (n.grad.numel() == 0 && n.value.numel() == 0) n.grad = Tensor(n.value.shape, {});
    return n.grad;
}

void Tape::accum(int node_id, std::size_t flat_index, double g) {
    Node& n = nodes_[static_cast<std::size_t>(node_id)];
    if (!n.requires_grad) return;
    grad_buffer(node_id).data[flat_index] += g;
}

Var Tape::push(Tensor value, std::vector<int> inputs, bool requires_grad, const char* op,
               std::function<void(Tape&, int)> back) {
    if (!value.all_finite())
        throw NumericError(std::string(op) + ": produced a non-finite value");
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.requires_grad = requires_grad;
    n.op = op;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite()) throw NumericError("leaf: non-finite input tensor");
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, size() - 1};
}

const Tensor& Tape::value(Var v) const {
    check_owned(v, "value");
    return node(v).value;
}

Tensor Tape::grad(Var v) const {
    check_owned(v, "grad");
    const Node& n = node(v);
    if (n.grad.numel() == n.value.numel() && !n.grad.data.empty()) return n.grad;
    return Tensor::zeros(n.value.shape);
}

// ---------------------------------------------------------------------------
// elementwise binary ops with scalar broadcast

namespace {
enum class Bcast { None, Left, Right };
}

static Bcast binary_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (same_shape(a.shape, b.shape)) return Bcast::None;
    if (b.is_scalar()) return Bcast::Right;  // keep the left operand's shape
    if (a.is_scalar()) return Bcast::Left;
    throw DataError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                    shape_str(b.shape));
}

template <class F>
static Tensor apply_binary(const Tensor& a, const Tensor& b, Bcast mode, F f) {
    if (mode == Bcast::Left) {
        Tensor out = Tensor::zeros(b.shape);
        for (std::size_t i = 0; i < b.numel(); ++i) out.data[i] = f(a.data[0], b.data[i]);
        return out;
    }
    if (mode == Bcast::Right) {
        Tensor out = Tensor::zeros(a.shape);
        for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i], b.data[0]);
        return out;
    }
    Tensor out = Tensor::zeros(a.shape);
    for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i], b.data[i]);
    return out;
}

Var Tape::add(Var a, Var b) {
    check_owned(a, "add");
    check_owned(b, "add");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    Bcast mode = binary_mode(ta, tb, "add");
    Tensor out = apply_binary(ta, tb, mode, [](double x, double y) { return x + y; });
    bool rg = needs_grad(a) || needs_grad(b);
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, rg, "add", [ia, ib](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            double gv = g.data[i];
            std::size_t ai = t.nodes_[ia].value.is_scalar() ? 0 : i;
            std::size_t bi = t.nodes_[ib].value.is_scalar() ? 0 : i;
            t.accum(ia, ai, gv);
            t.accum(ib, bi, gv);
        }
    });
}

Var Tape::sub(Var a, Var b) {
    check_owned(a, "sub");
    check_owned(b, "sub");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    Bcast mode = binary_mode(ta, tb, "sub");
    Tensor out = apply_binary(ta, tb, mode, [](double x, double y) { return x - y; });
    bool rg = needs_grad(a) || needs_grad(b);
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, rg, "sub", [ia, ib](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            double gv = g.data[i];
            std::size_t ai = t.nodes_[ia].value.is_scalar() ? 0 : i;
            std::size_t bi = t.nodes_[ib].value.is_scalar() ? 0 : i;
            t.accum(ia, ai, gv);
            t.accum(ib, bi, -gv);
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check_owned(a, "mul");
    check_owned(b, "mul");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    Bcast mode = binary_mode(ta, tb, "mul");
    Tensor out = apply_binary(ta, tb, mode, [](double x, double y) { return x * y; });
    bool rg = needs_grad(a) || needs_grad(b);
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, rg, "mul", [ia, ib](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& va = t.nodes_[ia].value;
        const Tensor& vb = t.nodes_[ib].value;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            double gv = g.data[i];
            std::size_t ai = va.is_scalar() ? 0 : i;
            std::size_t bi = vb.is_scalar() ? 0 : i;
            t.accum(ia, ai, gv * vb.data[bi]);
            t.accum(ib, bi, gv * va.data[ai]);
        }
    });
}

Var Tape::div(Var a, Var b) {
    check_owned(a, "div");
    check_owned(b, "div");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    Bcast mode = binary_mode(ta, tb, "div");
    Tensor out = apply_binary(ta, tb, mode, [](double x, double y) { return x / y; });
    bool rg = needs_grad(a) || needs_grad(b);
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, rg, "div", [ia, ib](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& va = t.nodes_[ia].value;
        const Tensor& vb = t.nodes_[ib].value;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            double gv = g.data[i];
            std::size_t ai = va.is_scalar() ? 0 : i;
            std::size_t bi = vb.is_scalar() ? 0 : i;
            double x = va.data[ai], y = vb.data[bi];
            t.accum(ia, ai, gv / y);
            t.accum(ib, bi, -gv * x / (y * y));
        }
    });
}

Var Tape::matmul(Var a, Var b) {
    check_owned(a, "matmul");
    check_owned(b, "matmul");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0))
        throw DataError("matmul: shape mismatch " + shape_str(ta.shape) + " vs " +
                        shape_str(tb.shape));
    int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = ta.at2(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at2(i, j) += av * tb.at2(p, j);
        }
    bool rg = needs_grad(a) || needs_grad(b);
    int ia = a.id, ib = b.id;
    return push(std::move(out), {ia, ib}, rg, "matmul", [ia, ib, m, k, n](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& va = t.nodes_[ia].value;
        const Tensor& vb = t.nodes_[ib].value;
        if (t.nodes_[ia].requires_grad) {
            Tensor& ga = t.grad_buffer(ia);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    double gv = g.at2(i, j);
                    if (gv == 0.0) continue;
                    for (int p = 0; p < k; ++p) ga.at2(i, p) += gv * vb.at2(p, j);
                }
        }
        if (t.nodes_[ib].requires_grad) {
            Tensor& gb = t.grad_buffer(ib);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    double gv = g.at2(i, j);
                    if (gv == 0.0) continue;
                    for (int p = 0; p < k; ++p) gb.at2(p, j) += gv * va.at2(i, p);
                }
        }
    });
}

// ---------------------------------------------------------------------------
// elementwise unary ops

template <class FwdF, class BwdF>
static Var unary_op(Tape& t, Var a, const char* op, FwdF fwd, BwdF bwd_factory) {
    const Tensor& ta = t.value(a);
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = fwd(ta.data[i]);
    return bwd_factory(std::move(out));
}

Var Tape::exp(Var a) {
    check_owned(a, "exp");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = std::exp(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "exp", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        for (std::size_t i = 0; i < g.numel(); ++i) t.accum(ia, i, g.data[i] * y.data[i]);
    });
}

Var Tape::log(Var a) {
    check_owned(a, "log");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = std::log(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "log", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& x = t.nodes_[ia].value;
        for (std::size_t i = 0; i < g.numel(); ++i) t.accum(ia, i, g.data[i] / x.data[i]);
    });
}

Var Tape::sqrt(Var a) {
    check_owned(a, "sqrt");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = std::sqrt(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "sqrt", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        for (std::size_t i = 0; i < g.numel(); ++i)
            t.accum(ia, i, g.data[i] * 0.5 / std::max(y.data[i], kTinyNorm));
    });
}

Var Tape::square(Var a) {
    check_owned(a, "square");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = ta.data[i] * ta.data[i];
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "square", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& x = t.nodes_[ia].value;
        for (std::size_t i = 0; i < g.numel(); ++i) t.accum(ia, i, g.data[i] * 2.0 * x.data[i]);
    });
}

Var Tape::sigmoid(Var a) {
    check_owned(a, "sigmoid");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = stable_sigmoid(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "sigmoid", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        for (std::size_t i = 0; i < g.numel(); ++i)
            t.accum(ia, i, g.data[i] * y.data[i] * (1.0 - y.data[i]));
    });
}

Var Tape::sin(Var a) {
    check_owned(a, "sin");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i) out.data[i] = std::sin(ta.data[i]);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "sin", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& x = t.nodes_[ia].value;
        for (std::size_t i = 0; i < g.numel(); ++i)
            t.accum(ia, i, g.data[i] * std::cos(x.data[i]));
    });
}

Var Tape::softmax_last(Var a) {
    check_owned(a, "softmax");
    const Tensor& ta = node(a).value;
    if (ta.rank() < 1) throw DataError("softmax: rank >= 1 required, got " + shape_str(ta.shape));
    std::size_t last = static_cast<std::size_t>(ta.shape.back());
    std::size_t rows = ta.numel() / last;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = ta.data.data() + r * last;
        double* y = out.data.data() + r * last;
        double mx = x[0];
        for (std::size_t j = 1; j < last; ++j) mx = std::max(mx, x[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < last; ++j) {
            y[j] = std::exp(x[j] - mx);
            total += y[j];
        }
        for (std::size_t j = 0; j < last; ++j) y[j] /= total;
    }
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "softmax",
                [ia, rows, last](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    const Tensor& y = t.nodes_[self].value;
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double* yr = y.data.data() + r * last;
                        const double* gr = g.data.data() + r * last;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < last; ++j) dot += yr[j] * gr[j];
                        for (std::size_t j = 0; j < last; ++j)
                            t.accum(ia, r * last + j, yr[j] * (gr[j] - dot));
                    }
                });
}

// ---------------------------------------------------------------------------
// reductions

Var Tape::sum(Var a) {
    check_owned(a, "sum");
    const Tensor& ta = node(a).value;
    double total = 0.0;
    for (double v : ta.data) total += v;
    int ia = a.id;
    return push(Tensor::scalar(total), {ia}, needs_grad(a), "sum", [ia](Tape& t, int self) {
        double g = t.nodes_[self].grad.data[0];
        const Tensor& x = t.nodes_[ia].value;
        for (std::size_t i = 0; i < x.numel(); ++i) t.accum(ia, i, g);
    });
}

Var Tape::sum_last(Var a) {
    check_owned(a, "sum_last");
    const Tensor& ta = node(a).value;
    if (ta.rank() < 1) throw DataError("sum_last: rank >= 1 required");
    std::size_t last = static_cast<std::size_t>(ta.shape.back());
    std::size_t rows = ta.numel() / last;
    Shape out_shape(ta.shape.begin(), ta.shape.end() - 1);
    Tensor out = Tensor::zeros(out_shape);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < last; ++j) s += ta.data[r * last + j];
        out.data[r] = s;
    }
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "sum_last",
                [ia, rows, last](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < last; ++j)
                            t.accum(ia, r * last + j, g.data[r]);
                });
}

Var Tape::mean(Var a) {
    check_owned(a, "mean");
    const Tensor& ta = node(a).value;
    if (ta.numel() == 0) throw DataError("mean: empty tensor");
    double total = 0.0;
    for (double v : ta.data) total += v;
    double inv = 1.0 / static_cast<double>(ta.numel());
    int ia = a.id;
    return push(Tensor::scalar(total * inv), {ia}, needs_grad(a), "mean",
                [ia, inv](Tape& t, int self) {
                    double g = t.nodes_[self].grad.data[0] * inv;
                    const Tensor& x = t.nodes_[ia].value;
                    for (std::size_t i = 0; i < x.numel(); ++i) t.accum(ia, i, g);
                });
}

Var Tape::max_last(Var a) {
    check_owned(a, "max_last");
    const Tensor& ta = node(a).value;
    if (ta.rank() < 1) throw DataError("max_last: rank >= 1 required");
    std::size_t last = static_cast<std::size_t>(ta.shape.back());
    if (last == 0) throw DataError("max_last: empty last axis");
    std::size_t rows = ta.numel() / last;
    Shape out_shape(ta.shape.begin(), ta.shape.end() - 1);
    Tensor out = Tensor::zeros(out_shape);
    std::vector<int> arg(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        double best = ta.data[r * last];
        int bi = 0;
        for (std::size_t j = 1; j < last; ++j) {
            if (ta.data[r * last + j] > best) {
                best = ta.data[r * last + j];
                bi = static_cast<int>(j);
            }
        }
        out.data[r] = best;
        arg[r] = bi;
    }
    int ia = a.id;
    Var v = push(std::move(out), {ia}, needs_grad(a), "max_last",
                 [ia, last](Tape& t, int self) {
                     const Tensor& g = t.nodes_[self].grad;
                     const std::vector<int>& arg = t.nodes_[self].aux_ints;
                     for (std::size_t r = 0; r < g.numel(); ++r)
                         t.accum(ia, r * last + static_cast<std::size_t>(arg[r]), g.data[r]);
                 });
    node(v).aux_ints = std::move(arg);
    return v;
}

Var Tape::max_all(Var a) {
    check_owned(a, "max_all");
    const Tensor& ta = node(a).value;
    if (ta.numel() == 0) throw DataError("max_all: empty tensor");
    double best = ta.data[0];
    int bi = 0;
    for (std::size_t i = 1; i < ta.numel(); ++i)
        if (ta.data[i] > best) {
            best = ta.data[i];
            bi = static_cast<int>(i);
        }
    int ia = a.id;
    Var v = push(Tensor::scalar(best), {ia}, needs_grad(a), "max_all", [ia](Tape& t, int self) {
        double g = t.nodes_[self].grad.data[0];
        t.accum(ia, static_cast<std::size_t>(t.nodes_[self].aux_ints[0]), g);
    });
    node(v).aux_ints = {bi};
    return v;
}

const std::vector<int>& Tape::argmax(Var reduced) const {
    check_owned(reduced, "argmax");
    return node(reduced).aux_ints;
}

Var Tape::l2norm(Var a) {
    check_owned(a, "l2norm");
    const Tensor& ta = node(a).value;
    double ss = 0.0;
    for (double v : ta.data) ss += v * v;
    double n = std::sqrt(ss);
    int ia = a.id;
    return push(Tensor::scalar(n), {ia}, needs_grad(a), "l2norm", [ia](Tape& t, int self) {
        double g = t.nodes_[self].grad.data[0];
        double n = std::max(t.nodes_[self].value.data[0], kTinyNorm);
        const Tensor& x = t.nodes_[ia].value;
        for (std::size_t i = 0; i < x.numel(); ++i) t.accum(ia, i, g * x.data[i] / n);
    });
}

Var Tape::cosine(Var a, Var b) {
    check_owned(a, "cosine");
    check_owned(b, "cosine");
    const Tensor& ta = node(a).value;
    const Tensor& tb = node(b).value;
    if (ta.numel() != tb.numel() || ta.numel() == 0)
        throw DataError("cosine: incompatible shapes " + shape_str(ta.shape) + " vs " +
                        shape_str(tb.shape));
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (std::size_t i = 0; i < ta.numel(); ++i) {
        dot += ta.data[i] * tb.data[i];
        na2 += ta.data[i] * ta.data[i];
        nb2 += tb.data[i] * tb.data[i];
    }
    double na = std::sqrt(na2), nb = std::sqrt(nb2);
    bool degenerate = (na * nb) < kTinyNorm;
    double cosv = degenerate ? 0.0 : dot / (na * nb);
    bool rg = needs_grad(a) || needs_grad(b);
    int ia = a.id, ib = b.id;
    return push(Tensor::scalar(cosv), {ia, ib}, rg, "cosine",
                [ia, ib, na, nb, cosv, degenerate](Tape& t, int self) {
                    if (degenerate) return;
                    double g = t.nodes_[self].grad.data[0];
                    const Tensor& x = t.nodes_[ia].value;
                    const Tensor& y = t.nodes_[ib].value;
                    double inv = 1.0 / (na * nb);
                    for (std::size_t i = 0; i < x.numel(); ++i) {
                        t.accum(ia, i, g * (y.data[i] * inv - cosv * x.data[i] / (na * na)));
                        t.accum(ib, i, g * (x.data[i] * inv - cosv * y.data[i] / (nb * nb)));
                    }
                });
}

Var Tape::clamp(Var a, double lo, double hi) {
    check_owned(a, "clamp");
    const Tensor& ta = node(a).value;
    Tensor out = Tensor::zeros(ta.shape);
    for (std::size_t i = 0; i < ta.numel(); ++i)
        out.data[i] = std::min(std::max(ta.data[i], lo), hi);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "clamp", [ia, lo, hi](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& x = t.nodes_[ia].value;
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (x.data[i] >= lo && x.data[i] <= hi) t.accum(ia, i, g.data[i]);
    });
}

// ---------------------------------------------------------------------------
// spatial ops

namespace {
// bilinear fetch with zero padding; also reports corner values for gradients
struct Corners {
    int x0, y0;
    double fx, fy;
    double v00, v10, v01, v11;
};

Corners fetch_corners(const Tensor& img, double x, double y, int c) {
    int h = img.dim(0), w = img.dim(1);
    Corners cr;
    cr.x0 = static_cast<int>(std::floor(x));
    cr.y0 = static_cast<int>(std::floor(y));
    cr.fx = x - cr.x0;
    cr.fy = y - cr.y0;
    auto pix = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
        return img.at3(yy, xx, c);
    };
    cr.v00 = pix(cr.y0, cr.x0);
    cr.v10 = pix(cr.y0, cr.x0 + 1);
    cr.v01 = pix(cr.y0 + 1, cr.x0);
    cr.v11 = pix(cr.y0 + 1, cr.x0 + 1);
    return cr;
}

double corners_value(const Corners& cr) {
    return cr.v00 * (1 - cr.fx) * (1 - cr.fy) + cr.v10 * cr.fx * (1 - cr.fy) +
           cr.v01 * (1 - cr.fx) * cr.fy + cr.v11 * cr.fx * cr.fy;
}

double corners_ddx(const Corners& cr) {
    return (cr.v10 - cr.v00) * (1 - cr.fy) + (cr.v11 - cr.v01) * cr.fy;
}

double corners_ddy(const Corners& cr) {
    return (cr.v01 - cr.v00) * (1 - cr.fx) + (cr.v11 - cr.v10) * cr.fx;
}
}  // namespace

Var Tape::bilinear_sample(Var image, Var coords) {
    check_owned(image, "bilinear_sample");
    check_owned(coords, "bilinear_sample");
    const Tensor& img = node(image).value;
    const Tensor& xy = node(coords).value;
    if (img.rank() != 3)
        throw DataError("bilinear_sample: image must be (H,W,C), got " + shape_str(img.shape));
    if (xy.rank() != 2 || xy.dim(1) != 2)
        throw DataError("bilinear_sample: coords must be (N,2), got " + shape_str(xy.shape));
    int n = xy.dim(0), c = img.dim(2);
    Tensor out = Tensor::zeros({n, c});
    for (int i = 0; i < n; ++i) {
        double x = xy.at2(i, 0), y = xy.at2(i, 1);
        for (int ch = 0; ch < c; ++ch) {
            Corners cr = fetch_corners(img, x, y, ch);
            out.at2(i, ch) = corners_value(cr);
        }
    }
    bool rg = needs_grad(image) || needs_grad(coords);
    int ii = image.id, ic = coords.id;
    return push(std::move(out), {ii, ic}, rg, "bilinear_sample",
                [ii, ic, n, c](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    const Tensor& img = t.nodes_[ii].value;
                    const Tensor& xy = t.nodes_[ic].value;
                    int h = img.dim(0), w = img.dim(1);
                    bool gi = t.nodes_[ii].requires_grad;
                    bool gc = t.nodes_[ic].requires_grad;
                    for (int i = 0; i < n; ++i) {
                        double x = xy.at2(i, 0), y = xy.at2(i, 1);
                        double ddx = 0.0, ddy = 0.0;
                        for (int ch = 0; ch < c; ++ch) {
                            double gv = g.at2(i, ch);
                            if (gv == 0.0) continue;
                            Corners cr = fetch_corners(img, x, y, ch);
                            if (gi) {
                                auto put = [&](int yy, int xx, double wgt) {
                                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return;
                                    std::size_t idx =
                                        (static_cast<std::size_t>(yy) * w + xx) * c + ch;
                                    t.accum(ii, idx, gv * wgt);
                                };
                                put(cr.y0, cr.x0, (1 - cr.fx) * (1 - cr.fy));
                                put(cr.y0, cr.x0 + 1, cr.fx * (1 - cr.fy));
                                put(cr.y0 + 1, cr.x0, (1 - cr.fx) * cr.fy);
                                put(cr.y0 + 1, cr.x0 + 1, cr.fx * cr.fy);
                            }
                            if (gc) {
                                ddx += gv * corners_ddx(cr);
                                ddy += gv * corners_ddy(cr);
                            }
                        }
                        if (gc) {
                            t.accum(ic, static_cast<std::size_t>(i) * 2, ddx);
                            t.accum(ic, static_cast<std::size_t>(i) * 2 + 1, ddy);
                        }
                    }
                });
}

Var Tape::translate(Var image, Var dx, Var dy) {
    check_owned(image, "translate");
    check_owned(dx, "translate");
    check_owned(dy, "translate");
    const Tensor& img = node(image).value;
    if (img.rank() != 3)
        throw DataError("translate: image must be (H,W,C), got " + shape_str(img.shape));
    double ox = node(dx).value.scalar_value();
    double oy = node(dy).value.scalar_value();
    int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    Tensor out = Tensor::zeros(img.shape);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                Corners cr = fetch_corners(img, x - ox, y - oy, ch);
                out.at3(y, x, ch) = corners_value(cr);
            }
    bool rg = needs_grad(image) || needs_grad(dx) || needs_grad(dy);
    int ii = image.id, ix = dx.id, iy = dy.id;
    return push(std::move(out), {ii, ix, iy}, rg, "translate",
                [ii, ix, iy, h, w, c, ox, oy](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    const Tensor& img = t.nodes_[ii].value;
                    bool gi = t.nodes_[ii].requires_grad;
                    bool gx = t.nodes_[ix].requires_grad;
                    bool gy = t.nodes_[iy].requires_grad;
                    double ax = 0.0, ay = 0.0;
                    for (int y = 0; y < h; ++y)
                        for (int x = 0; x < w; ++x)
                            for (int ch = 0; ch < c; ++ch) {
                                double gv = g.at3(y, x, ch);
                                if (gv == 0.0) continue;
                                Corners cr = fetch_corners(img, x - ox, y - oy, ch);
                                if (gi) {
                                    auto put = [&](int yy, int xx, double wgt) {
                                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return;
                                        std::size_t idx =
                                            (static_cast<std::size_t>(yy) * w + xx) * c + ch;
                                        t.accum(ii, idx, gv * wgt);
                                    };
                                    put(cr.y0, cr.x0, (1 - cr.fx) * (1 - cr.fy));
                                    put(cr.y0, cr.x0 + 1, cr.fx * (1 - cr.fy));
                                    put(cr.y0 + 1, cr.x0, (1 - cr.fx) * cr.fy);
                                    put(cr.y0 + 1, cr.x0 + 1, cr.fx * cr.fy);
                                }
                                // sample position is (x-ox, y-oy): d/d(ox) = -d/dsx
                                if (gx) ax -= gv * corners_ddx(cr);
                                if (gy) ay -= gv * corners_ddy(cr);
                            }
                    if (gx) t.accum(ix, 0, ax);
                    if (gy) t.accum(iy, 0, ay);
                });
}

// ---------------------------------------------------------------------------
// structural ops

Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw DataError("concat: no inputs");
    for (Var p : parts) check_owned(p, "concat");
    const Tensor& first = node(parts[0]).value;
    if (first.rank() < 1) throw DataError("concat: rank >= 1 required");
    Shape tail(first.shape.begin() + 1, first.shape.end());
    std::size_t row_numel = shape_numel(tail);
    int total_rows = 0;
    bool rg = false;
    std::vector<int> ids;
    for (Var p : parts) {
        const Tensor& tp = node(p).value;
        Shape ptail(tp.shape.begin() + 1, tp.shape.end());
        if (tp.rank() != first.rank() || ptail != tail)
            throw DataError("concat: shape mismatch " + shape_str(first.shape) + " vs " +
                            shape_str(tp.shape));
        total_rows += tp.dim(0);
        rg = rg || needs_grad(p);
        ids.push_back(p.id);
    }
    Shape out_shape = first.shape;
    out_shape[0] = total_rows;
    Tensor out = Tensor::zeros(out_shape);
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& tp = node(p).value;
        std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + off);
        off += tp.numel();
    }
    return push(std::move(out), ids, rg, "concat", [ids, row_numel](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        std::size_t off = 0;
        for (int id : ids) {
            std::size_t n = t.nodes_[id].value.numel();
            for (std::size_t i = 0; i < n; ++i) t.accum(id, i, g.data[off + i]);
            off += n;
        }
        (void)row_numel;
    });
}

Var Tape::slice_rows(Var a, int start, int len) {
    check_owned(a, "slice");
    const Tensor& ta = node(a).value;
    if (ta.rank() < 1) throw DataError("slice: rank >= 1 required");
    if (start < 0 || len < 0 || start + len > ta.dim(0))
        throw DataError("slice: range [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") out of " + std::to_string(ta.dim(0)));
    Shape out_shape = ta.shape;
    out_shape[0] = len;
    std::size_t row = ta.numel() / std::max<std::size_t>(1, ta.dim(0));
    Tensor out = Tensor::zeros(out_shape);
    std::copy(ta.data.begin() + start * row, ta.data.begin() + (start + len) * row,
              out.data.begin());
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "slice",
                [ia, start, row](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        t.accum(ia, static_cast<std::size_t>(start) * row + i, g.data[i]);
                });
}

Var Tape::gather_rows(Var a, const std::vector<int>& rows) {
    check_owned(a, "gather_rows");
    const Tensor& ta = node(a).value;
    if (ta.rank() < 1) throw DataError("gather_rows: rank >= 1 required");
    std::size_t row = ta.numel() / std::max<std::size_t>(1, ta.dim(0));
    Shape out_shape = ta.shape;
    out_shape[0] = static_cast<int>(rows.size());
    Tensor out = Tensor::zeros(out_shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= ta.dim(0)) throw DataError("gather_rows: index out of range");
        std::copy(ta.data.begin() + rows[i] * row, ta.data.begin() + (rows[i] + 1) * row,
                  out.data.begin() + i * row);
    }
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "gather_rows",
                [ia, rows, row](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    for (std::size_t i = 0; i < rows.size(); ++i)
                        for (std::size_t j = 0; j < row; ++j)
                            t.accum(ia, static_cast<std::size_t>(rows[i]) * row + j,
                                    g.data[i * row + j]);
                });
}

Var Tape::transpose2d(Var a) {
    check_owned(a, "transpose2d");
    const Tensor& ta = node(a).value;
    if (ta.rank() != 2) throw DataError("transpose2d: matrix required, got " + shape_str(ta.shape));
    int m = ta.dim(0), n = ta.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at2(j, i) = ta.at2(i, j);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "transpose2d", [ia, m, n](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                t.accum(ia, static_cast<std::size_t>(i) * n + j, g.at2(j, i));
    });
}

Var Tape::reshape(Var a, Shape s) {
    check_owned(a, "reshape");
    const Tensor& ta = node(a).value;
    if (shape_numel(s) != ta.numel())
        throw DataError("reshape: numel mismatch " + shape_str(ta.shape) + " -> " + shape_str(s));
    Tensor out(std::move(s), ta.data);
    int ia = a.id;
    return push(std::move(out), {ia}, needs_grad(a), "reshape", [ia](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) t.accum(ia, i, g.data[i]);
    });
}

Var Tape::stop_gradient(Var a) {
    check_owned(a, "stop_gradient");
    return push(node(a).value, {a.id}, false, "stop_gradient", nullptr);
}

Var Tape::avg_pool(Var image, int k) {
    check_owned(image, "avg_pool");
    const Tensor& img = node(image).value;
    if (img.rank() != 3)
        throw DataError("avg_pool: image must be (H,W,C), got " + shape_str(img.shape));
    int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    if (k < 1 || h % k != 0 || w % k != 0)
        throw DataError("avg_pool: dimensions " + shape_str(img.shape) +
                        " not divisible by k=" + std::to_string(k));
    int ph = h / k, pw = w / k;
    Tensor out = Tensor::zeros({ph, pw, c});
    double inv = 1.0 / (k * k);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            for (int ch = 0; ch < c; ++ch) {
                double s = 0.0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) s += img.at3(y * k + dy, x * k + dx, ch);
                out.at3(y, x, ch) = s * inv;
            }
    int ia = image.id;
    return push(std::move(out), {ia}, needs_grad(image), "avg_pool",
                [ia, k, ph, pw, c, w, inv](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    for (int y = 0; y < ph; ++y)
                        for (int x = 0; x < pw; ++x)
                            for (int ch = 0; ch < c; ++ch) {
                                double gv = g.at3(y, x, ch) * inv;
                                if (gv == 0.0) continue;
                                for (int dy = 0; dy < k; ++dy)
                                    for (int dx = 0; dx < k; ++dx) {
                                        std::size_t idx =
                                            (static_cast<std::size_t>(y * k + dy) * w +
                                             (x * k + dx)) * c + ch;
                                        t.accum(ia, idx, gv);
                                    }
                            }
                });
}

Var Tape::broadcast_rows(Var rowvec, int w, int c) {
    check_owned(rowvec, "broadcast_rows");
    const Tensor& tv = node(rowvec).value;
    if (tv.rank() != 1) throw DataError("broadcast_rows: vector required, got " +
                                        shape_str(tv.shape));
    int h = tv.dim(0);
    Tensor out = Tensor::zeros({h, w, c});
    for (int y = 0; y < h; ++y) {
        double v = tv.data[static_cast<std::size_t>(y)];
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) out.at3(y, x, ch) = v;
    }
    int ia = rowvec.id;
    return push(std::move(out), {ia}, needs_grad(rowvec), "broadcast_rows",
                [ia, h, w, c](Tape& t, int self) {
                    const Tensor& g = t.nodes_[self].grad;
                    for (int y = 0; y < h; ++y) {
                        double s = 0.0;
                        for (int x = 0; x < w; ++x)
                            for (int ch = 0; ch < c; ++ch) s += g.at3(y, x, ch);
                        t.accum(ia, static_cast<std::size_t>(y), s);
                    }
                });
}

Var Tape::soft_stripe_mask(Var rows, Var widths, double steepness, int height) {
    check_owned(rows, "soft_stripe_mask");
    check_owned(widths, "soft_stripe_mask");
    const Tensor& tr = node(rows).value;
    const Tensor& tw = node(widths).value;
    if (tr.rank() != 1 || tw.rank() != 1 || tr.dim(0) != tw.dim(0))
        throw DataError("soft_stripe_mask: rows " + shape_str(tr.shape) + " and widths " +
                        shape_str(tw.shape) + " must be equal-length vectors");
    if (steepness <= 0.0) throw DataError("soft_stripe_mask: steepness must be positive");
    int n = tr.dim(0);
    Tensor out = Tensor::zeros({height});
    std::vector<int> arg(static_cast<std::size_t>(height), -1);
    for (int y = 0; y < height; ++y) {
        double best = 0.0;
        int bi = -1;
        for (int k = 0; k < n; ++k) {
            double u = steepness * (y - tr.data[k]);
            double v = steepness * (tr.data[k] + tw.data[k] - y);
            double m = stable_sigmoid(u) * stable_sigmoid(v);
            if (bi < 0 || m > best) {
                best = m;
                bi = k;
            }
        }
        out.data[static_cast<std::size_t>(y)] = bi < 0 ? 0.0 : best;
        arg[static_cast<std::size_t>(y)] = bi;
    }
    bool rg = needs_grad(rows) || needs_grad(widths);
    int ir = rows.id, iw = widths.id;
    Var v = push(std::move(out), {ir, iw}, rg, "soft_stripe_mask",
                 [ir, iw, steepness, height](Tape& t, int self) {
                     const Tensor& g = t.nodes_[self].grad;
                     const std::vector<int>& arg = t.nodes_[self].aux_ints;
                     const Tensor& tr = t.nodes_[ir].value;
                     const Tensor& tw = t.nodes_[iw].value;
                     for (int y = 0; y < height; ++y) {
                         double gv = g.data[static_cast<std::size_t>(y)];
                         int k = arg[static_cast<std::size_t>(y)];
                         if (gv == 0.0 || k < 0) continue;
                         double u = steepness * (y - tr.data[k]);
                         double v2 = steepness * (tr.data[k] + tw.data[k] - y);
                         double su = stable_sigmoid(u), sv = stable_sigmoid(v2);
                         double dsu = su * (1 - su), dsv = sv * (1 - sv);
                         // d/dr = s*(su*dsv - dsu*sv), d/dw = s*su*dsv
                         t.accum(ir, static_cast<std::size_t>(k),
                                 gv * steepness * (su * dsv - dsu * sv));
                         t.accum(iw, static_cast<std::size_t>(k), gv * steepness * su * dsv);
                     }
                 });
    node(v).aux_ints = std::move(arg);
    return v;
}

namespace {

// RGGB site classes: 0=R, 1=G, 2=B
inline int bayer_site(int y, int x) {
    bool ye = (y % 2) == 0, xe = (x % 2) == 0;
    if (ye && xe) return 0;
    if (!ye && !xe) return 2;
    return 1;
}

inline int reflect101(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

// per-channel 3x3 bilinear kernels over same-class sites
const double kKernelG[3][3] = {{0, 0.25, 0}, {0.25, 1.0, 0.25}, {0, 0.25, 0}};
const double kKernelRB[3][3] = {{0.25, 0.5, 0.25}, {0.5, 1.0, 0.5}, {0.25, 0.5, 0.25}};

}  // namespace

Var Tape::demosaic_rggb(Var raw) {
    check_owned(raw, "demosaic");
    const Tensor& tr = node(raw).value;
    if (tr.rank() != 2) throw DataError("demosaic: raw plane must be (H,W), got " +
                                        shape_str(tr.shape));
    int h = tr.dim(0), w = tr.dim(1);
    if (h % 2 != 0 || w % 2 != 0)
        throw DataError("demosaic: dimensions must be even for an RGGB tiling, got " +
                        shape_str(tr.shape));
    Tensor out = Tensor::zeros({h, w, 3});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double(&kern)[3][3] = (c == 1) ? kKernelG : kKernelRB;
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        double kv = kern[dy + 1][dx + 1];
                        if (kv == 0.0) continue;
                        int sy = reflect101(y + dy, h), sx = reflect101(x + dx, w);
                        if (bayer_site(sy, sx) != c) continue;
                        acc += kv * tr.at2(sy, sx);
                    }
                out.at3(y, x, c) = acc;
            }
    int ia = raw.id;
    return push(std::move(out), {ia}, needs_grad(raw), "demosaic", [ia, h, w](Tape& t, int self) {
        const Tensor& g = t.nodes_[self].grad;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int c = 0; c < 3; ++c) {
                    double gv = g.at3(y, x, c);
                    if (gv == 0.0) continue;
                    const double(&kern)[3][3] = (c == 1) ? kKernelG : kKernelRB;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            double kv = kern[dy + 1][dx + 1];
                            if (kv == 0.0) continue;
                            int sy = reflect101(y + dy, h), sx = reflect101(x + dx, w);
                            if (bayer_site(sy, sx) != c) continue;
                            t.accum(ia, static_cast<std::size_t>(sy) * w + sx, gv * kv);
                        }
                }
    });
}

// ---------------------------------------------------------------------------

void Tape::backward(Var loss) {
    check_owned(loss, "backward");
    const Node& ln = node(loss);
    if (!ln.value.is_scalar())
        throw DataError("backward: loss must be scalar, got " + shape_str(ln.value.shape));
    for (Node& n : nodes_) n.grad = Tensor();
    grad_buffer(loss.id).data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || !n.back) continue;
        if (n.grad.data.empty()) continue;  // did not influence the loss
        n.back(*this, id);
    }
}

}  // namespace fade

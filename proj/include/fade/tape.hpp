#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "fade/tensor.hpp"

namespace fade {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode autodiff over dense tensors. One tape per attack instance;
// single writer, nodes in topological order, one backward visit per node.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }
    Var scalar(double v) { return constant(Tensor::scalar(v)); }

    // elementwise; shapes must match or one operand must be scalar
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);

    Var add(Var a, double b) { return add(a, scalar(b)); }
    Var sub(Var a, double b) { return sub(a, scalar(b)); }
    Var mul(Var a, double b) { return mul(a, scalar(b)); }
    Var div(Var a, double b) { return div(a, scalar(b)); }
    Var neg(Var a) { return mul(a, -1.0); }

    Var matmul(Var a, Var b);  // (m,k) x (k,n) -> (m,n)

    Var exp(Var a);
    Var log(Var a);
    Var sqrt(Var a);
    Var square(Var a);
    Var sigmoid(Var a);
    Var sin(Var a);
    Var softmax_last(Var a);

    Var sum(Var a);               // scalar
    Var sum_last(Var a);          // reduce last axis
    Var mean(Var a);              // scalar
    Var max_last(Var a);          // reduce last axis, ties -> lower index
    Var max_all(Var a);           // scalar, ties -> lower index
    const std::vector<int>& argmax(Var reduced) const;  // indices of a max_* node

    Var l2norm(Var a);            // scalar
    Var cosine(Var a, Var b);     // scalar; vectors of equal length

    // lo/hi may be +-inf; both boundaries pass gradient through
    Var clamp(Var a, double lo, double hi);

    // image (H,W,C), coords (N,2) as (x,y) pixel positions; zero outside
    Var bilinear_sample(Var image, Var coords);

    // whole-image shift by (dx,dy) pixels with zero padding
    Var translate(Var image, Var dx, Var dy);

    Var concat_rows(std::span<const Var> parts);       // along axis 0
    Var slice_rows(Var a, int start, int len);         // along axis 0
    Var transpose2d(Var a);
    Var gather_rows(Var a, const std::vector<int>& rows);
    Var reshape(Var a, Shape s);
    Var stop_gradient(Var a);

    Var avg_pool(Var image, int k);                    // (H,W,C) -> (H/k,W/k,C)
    Var broadcast_rows(Var rowvec, int w, int c);      // (H) -> (H,w,c)

    // per-row stripe mask: max_k sigmoid(s*(y-r_k)) * sigmoid(s*(r_k+w_k-y))
    Var soft_stripe_mask(Var rows, Var widths, double steepness, int height);

    // bilinear reconstruction of an RGGB raw plane (H,W) -> (H,W,3),
    // reflect-101 border so the Bayer phase is preserved at the edges
    Var demosaic_rggb(Var raw);

    const Tensor& value(Var v) const;
    double scalar_value(Var v) const { return value(v).scalar_value(); }

    // exact reverse sweep; repeated calls overwrite gradients
    void backward(Var loss);
    Tensor grad(Var v) const;

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // sized on demand during backward
        std::vector<int> inputs;
        std::function<void(Tape&, int)> back;  // null for leaves / constants
        std::vector<int> aux_ints;             // argmax indices etc.
        bool requires_grad = false;
        const char* op = "leaf";
    };

    Var push(Tensor value, std::vector<int> inputs, bool requires_grad, const char* op,
             std::function<void(Tape&, int)> back);
    Node& node(Var v);
    const Node& node(Var v) const;
    void check_owned(Var v, const char* what) const;
    bool needs_grad(Var v) const { return node(v).requires_grad; }
    void accum(int node_id, std::size_t flat_index, double g);
    Tensor& grad_buffer(int node_id);

    // deque: references to node values stay valid while new ops append
    std::deque<Node> nodes_;
    friend struct Var;
};

// operator sugar for loss expressions
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator+(Var a, double b) { return a.tape->add(a, b); }
inline Var operator-(Var a, double b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, double b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, double b) { return a.tape->div(a, b); }
inline Var operator-(double a, Var b) { return b.tape->sub(b.tape->scalar(a), b); }
inline Var operator*(double a, Var b) { return b.tape->mul(b, a); }
inline Var operator-(Var a) { return a.tape->neg(a); }

}  // namespace fade

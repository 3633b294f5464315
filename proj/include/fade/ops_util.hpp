#pragma once

#include "fade/tape.hpp"

namespace fade {

// composites over the primitive set

inline Var relu(Tape& t, Var x) {
    return t.clamp(x, 0.0, std::numeric_limits<double>::infinity());
}

// exact |x| with subgradient 0 at the kink
inline Var abs_t(Tape& t, Var x) {
    return t.add(relu(t, x), relu(t, t.neg(x)));
}

inline Var max_t(Tape& t, Var a, Var b) { return t.add(a, relu(t, t.sub(b, a))); }
inline Var min_t(Tape& t, Var a, Var b) { return t.sub(a, relu(t, t.sub(a, b))); }

// row of a matrix as a flat vector
inline Var row_vec(Tape& t, Var m, int r) {
    Var row = t.slice_rows(m, r, 1);
    const Shape& s = t.value(row).shape;
    return t.reshape(row, {static_cast<int>(shape_numel(s))});
}

// column of a (m,n) matrix as a length-m vector
inline Var col_vec(Tape& t, Var m, int c) {
    return row_vec(t, t.transpose2d(m), c);
}

}  // namespace fade

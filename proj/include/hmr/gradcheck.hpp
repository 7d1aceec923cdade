#pragma once

#include <functional>
#include <vector>

#include "hmr/tape.hpp"

namespace hmr {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int input_index = -1;   // which tensor held the worst coordinate
    int64_t coord = -1;     // flat offset within that tensor
    double analytic = 0.0;
    double numeric = 0.0;
    bool pass(double tol) const { return max_rel_err <= tol; }
};

// Builds a scalar loss from leaf values (one per input tensor).
using GradFn = std::function<Value(Tape&, const std::vector<Value>&)>;

// Compares the tape gradient of fn against central differences
// (f(x+he) - f(x-he)) / 2h over every coordinate of every input.
// Relative error per coordinate is |a-n| / max(|a|, |n|, 1e-2); the floor
// keeps finite-difference noise on near-zero gradients from dominating.
// Non-finite loss or gradient values raise NumericError.
GradCheckReport grad_check(const GradFn& fn, const std::vector<Tensor>& inputs,
                           double step = 1e-5);

}  // namespace hmr

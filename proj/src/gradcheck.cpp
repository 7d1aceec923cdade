#include "hmr/gradcheck.hpp"

#include <cmath>

namespace hmr {

namespace {

double eval_scalar(const GradFn& fn, const std::vector<Tensor>& inputs) {
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, false));
    Value loss = fn(tape, leaves);
    const Tensor& lv = tape.val(loss);
    if (lv.numel() != 1) throw ContractError("grad_check: fn must return a scalar");
    double v = lv.data[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss value");
    return v;
}

}  // namespace

GradCheckReport grad_check(const GradFn& fn, const std::vector<Tensor>& inputs, double step) {
    if (step <= 0.0) throw ContractError("grad_check: step must be positive");

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Value> leaves;
        for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, true));
        Value loss = fn(tape, leaves);
        const Tensor& lv = tape.val(loss);
        if (lv.numel() != 1) throw ContractError("grad_check: fn must return a scalar");
        if (!std::isfinite(lv.data[0])) throw NumericError("grad_check: non-finite loss value");
        tape.backward(loss);
        for (Value leaf : leaves) {
            Tensor g = tape.grad(leaf);
            if (!all_finite(g.data)) throw NumericError("grad_check: non-finite tape gradient");
            analytic.push_back(std::move(g));
        }
    }

    GradCheckReport rep;
    std::vector<Tensor> work = inputs;
    for (size_t k = 0; k < inputs.size(); ++k) {
        for (int64_t i = 0; i < inputs[k].numel(); ++i) {
            double x0 = inputs[k].data[i];
            work[k].data[i] = x0 + step;
            double fp = eval_scalar(fn, work);
            work[k].data[i] = x0 - step;
            double fm = eval_scalar(fn, work);
            work[k].data[i] = x0;
            double num = (fp - fm) / (2.0 * step);
            if (!std::isfinite(num)) throw NumericError("grad_check: non-finite central difference");
            double ana = analytic[k].data[i];
            double rel = std::abs(ana - num) /
                         std::max({std::abs(ana), std::abs(num), 1e-2});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.input_index = static_cast<int>(k);
                rep.coord = i;
                rep.analytic = ana;
                rep.numeric = num;
            }
        }
    }
    return rep;
}

}  // namespace hmr

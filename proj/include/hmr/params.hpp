#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hmr/tape.hpp"

namespace hmr {

// Named weight registry. Registration order is the canonical order for
// checkpoints and optimizer state.
class Params {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    const std::vector<std::string>& names() const { return order_; }
    int64_t scalar_count() const;

private:
    std::vector<std::string> order_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, size_t> index_;
};

// Binds every registered tensor as a leaf on one tape for a single
// forward/backward pass.
class Bind {
public:
    Bind(Tape& tape, const Params& params, bool requires_grad = true);
    // zip already-created leaves with their names (gradient checking)
    Bind(Tape& tape, const std::vector<std::string>& names, const std::vector<Value>& vals);
    Value operator[](const std::string& name) const;
    Tape& tape() const { return *tape_; }
    const Tensor& grad(const std::string& name) const;

private:
    Tape* tape_;
    std::unordered_map<std::string, Value> vals_;
};

// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weight + zero bias under
// `prefix + ".w"` / `".b"`
void init_linear(Params& p, Rng& rng, const std::string& prefix, int in, int out);
Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double lo, double hi);

// y = x W + b for params registered by init_linear
Value apply_linear(const Bind& w, const std::string& prefix, Value x);

}  // namespace hmr

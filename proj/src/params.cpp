#include "hmr/params.hpp"

#include <cmath>

namespace hmr {

Tensor& Params::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw ContractError("params: duplicate name " + name);
    index_[name] = tensors_.size();
    order_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
}

Tensor& Params::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("params: unknown name " + name);
    return tensors_[it->second];
}

const Tensor& Params::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("params: unknown name " + name);
    return tensors_[it->second];
}

int64_t Params::scalar_count() const {
    int64_t n = 0;
    for (const Tensor& t : tensors_) n += t.numel();
    return n;
}

Bind::Bind(Tape& tape, const Params& params, bool requires_grad) : tape_(&tape) {
    for (const std::string& name : params.names())
        vals_.emplace(name, tape.leaf(params.at(name), requires_grad));
}

Bind::Bind(Tape& tape, const std::vector<std::string>& names, const std::vector<Value>& vals)
    : tape_(&tape) {
    if (names.size() != vals.size()) throw ContractError("bind: names/values size mismatch");
    for (size_t i = 0; i < names.size(); ++i) vals_.emplace(names[i], vals[i]);
}

Value Bind::operator[](const std::string& name) const {
    auto it = vals_.find(name);
    if (it == vals_.end()) throw ContractError("bind: unknown name " + name);
    return it->second;
}

const Tensor& Bind::grad(const std::string& name) const {
    return tape_->grad((*this)[name]);
}

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

void init_linear(Params& p, Rng& rng, const std::string& prefix, int in, int out) {
    double s = std::sqrt(1.0 / in);
    p.add(prefix + ".w", uniform_tensor(rng, {in, out}, -s, s));
    p.add(prefix + ".b", Tensor({out}, 0.0));
}

Value apply_linear(const Bind& w, const std::string& prefix, Value x) {
    return linear(x, w[prefix + ".w"], w[prefix + ".b"]);
}

}  // namespace hmr

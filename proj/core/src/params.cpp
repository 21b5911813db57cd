#include "mvp/params.hpp"

#include "mvp/errors.hpp"

namespace mvp {

std::size_t ParamStore::add(const std::string& name, Array init) {
    if (has(name)) throw ConfigError("duplicate parameter name: " + name);
    Entry e;
    e.name = name;
    e.grad = Array(init.shape(), 0.0);
    e.m = Array(init.shape(), 0.0);
    e.v = Array(init.shape(), 0.0);
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
}

std::size_t ParamStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
    Array init(shape, 0.0);
    for (std::size_t i = 0; i < init.size(); ++i) init[i] = rng.uniform(-bound, bound);
    return add(name, std::move(init));
}

bool ParamStore::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

ParamStore::Entry& ParamStore::find(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return e;
    throw ConfigError("unknown parameter name: " + name);
}

std::size_t ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return i;
    throw ConfigError("unknown parameter name: " + name);
}

std::vector<Node*> ParamStore::bind(Graph& g) const {
    std::vector<Node*> nodes;
    nodes.reserve(entries_.size());
    for (const auto& e : entries_) nodes.push_back(g.param(e.value));
    return nodes;
}

void ParamStore::collect_grads(const std::vector<Node*>& bound) {
    if (bound.size() != entries_.size()) throw UsageError("collect_grads: node count mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        Entry& e = entries_[i];
        if (!e.grad.same_shape(bound[i]->grad)) throw UsageError("collect_grads: shape mismatch for " + e.name);
        const double* src = bound[i]->grad.data();
        double* dst = e.grad.data();
        for (std::size_t k = 0; k < e.grad.size(); ++k) dst[k] += src[k];
    }
}

void ParamStore::zero_grads() {
    for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParamStore::total_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

}  // namespace mvp

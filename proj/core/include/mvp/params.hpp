#pragma once

#include <string>
#include <vector>

#include "mvp/array.hpp"
#include "mvp/graph.hpp"
#include "mvp/rng.hpp"

namespace mvp {

// Named, ordered collection of trainable tensors. Insertion order is the
// canonical serialization order; names must be unique.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Array value;
        Array grad;   // accumulated by Graph::backward via the bound Node
        Array m;      // Adam first moment
        Array v;      // Adam second moment
    };

    // Registers a tensor and returns its index. Throws ConfigError on a
    // duplicate name.
    std::size_t add(const std::string& name, Array init);

    // Uniform(-bound, bound) init, the default for weight matrices.
    std::size_t add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);

    std::size_t size() const { return entries_.size(); }
    Entry& entry(std::size_t i) { return entries_[i]; }
    const Entry& entry(std::size_t i) const { return entries_[i]; }
    bool has(const std::string& name) const;
    Entry& find(const std::string& name);          // throws ConfigError if absent
    std::size_t index_of(const std::string& name) const;  // throws ConfigError if absent

    // Creates one param Node per entry on `g`, seeding values from the store.
    // Call collect_grads afterwards to pull gradients back out.
    std::vector<Node*> bind(Graph& g) const;

    // Adds each bound node's grad into the matching entry's grad buffer.
    void collect_grads(const std::vector<Node*>& bound);

    void zero_grads();

    std::size_t total_scalars() const;

private:
    std::vector<Entry> entries_;
};

}  // namespace mvp

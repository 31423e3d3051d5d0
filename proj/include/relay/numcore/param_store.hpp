#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relay/errors.hpp"
#include "relay/numcore/tape.hpp"
#include "relay/numcore/tensor.hpp"

namespace relay::num {

/// Named trainable tensors in insertion order. Insertion order is the
/// canonical order for optimiser state and checkpoints.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init) {
    if (index_.count(name)) {
      throw ContractError("ParamStore: duplicate parameter '" + name + "'");
    }
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, std::move(init)});
    return entries_.back().value;
  }

  Tensor& at(const std::string& name) {
    return entries_[static_cast<std::size_t>(index_of(name))].value;
  }
  const Tensor& at(const std::string& name) const {
    return entries_[static_cast<std::size_t>(index_of(name))].value;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  int count() const { return static_cast<int>(entries_.size()); }

  std::int64_t total_size() const {
    std::int64_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  int index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw ContractError("ParamStore: unknown parameter '" + name + "'");
    }
    return it->second;
  }

  const std::string& name_at(int i) const {
    return entries_[static_cast<std::size_t>(i)].name;
  }
  Tensor& value_at(int i) { return entries_[static_cast<std::size_t>(i)].value; }
  const Tensor& value_at(int i) const {
    return entries_[static_cast<std::size_t>(i)].value;
  }

 private:
  struct Entry {
    std::string name;
    Tensor value;
  };

  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Binds every parameter of a store onto one tape, once. All model parts
/// built against the same binding share nodes, so gradients from every
/// use site accumulate on the same buffers (this is what ties the local
/// agent weights across segments).
class Binding {
 public:
  Binding(Tape& tape, const ParamStore& store) : store_(&store) {
    vars_.reserve(static_cast<std::size_t>(store.count()));
    for (int i = 0; i < store.count(); ++i) {
      vars_.push_back(tape.param(store.value_at(i)));
    }
  }

  Var operator[](const std::string& name) const {
    return vars_[static_cast<std::size_t>(store_->index_of(name))];
  }

  /// Gradients in store order; zeros for parameters the loss never touched.
  std::vector<Tensor> grads(const Tape& tape) const {
    std::vector<Tensor> g;
    g.reserve(vars_.size());
    for (Var v : vars_) g.push_back(tape.grad(v));
    return g;
  }

  int count() const { return static_cast<int>(vars_.size()); }
  Var var_at(int i) const { return vars_[static_cast<std::size_t>(i)]; }

 private:
  const ParamStore* store_;
  std::vector<Var> vars_;
};

}  // namespace relay::num

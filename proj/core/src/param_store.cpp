#include "tabkit/param_store.hpp"

namespace tabkit::ad {

Tensor& ParamStore::add(const std::string& name, Tensor t, bool trainable) {
  if (index_.contains(name)) {
    throw InvalidValue("parameter " + name, "registered twice");
  }
  t.set_requires_grad(trainable);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, std::move(t), trainable});
  return entries_.back().tensor;
}

Tensor& ParamStore::add_parameter(const std::string& name, Tensor t) {
  return add(name, std::move(t), true);
}

Tensor& ParamStore::add_buffer(const std::string& name, Tensor t) {
  return add(name, std::move(t), false);
}

Tensor* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second].tensor;
}

const Tensor* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &entries_[it->second].tensor;
}

std::size_t ParamStore::trainable_value_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) {
    if (e.trainable) n += e.tensor.size();
  }
  return n;
}

std::size_t ParamStore::total_value_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::zero_grads() {
  for (Entry& e : entries_) {
    if (e.trainable) e.tensor.zero_grad();
  }
}

}  // namespace tabkit::ad

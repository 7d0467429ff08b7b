#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tabkit/tensor.hpp"

namespace tabkit::ad {

// Named registry of trainable parameters and persistent buffers (batch-norm
// running stats, init flags). Iteration follows registration order, keeping
// optimizer traversal and serialization deterministic.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    bool trainable;
  };

  Tensor& add_parameter(const std::string& name, Tensor t);
  Tensor& add_buffer(const std::string& name, Tensor t);

  const std::vector<Entry>& entries() const { return entries_; }
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;

  std::size_t trainable_value_count() const;
  std::size_t total_value_count() const;
  void zero_grads();

 private:
  Tensor& add(const std::string& name, Tensor t, bool trainable);

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tabkit::ad

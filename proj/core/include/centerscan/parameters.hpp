// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "centerscan/tensor.hpp"

namespace centerscan {

struct NamedParameter {
  std::string name;
  Tensor value;
  bool frozen = false;
};

/// Flat registry of a model's leaves. Frozen entries are created without
/// requires_grad, so no gradient can ever reach them.
class ParameterSet {
 public:
  /// Registers a leaf under `name` (must be unique) and returns the stored handle.
  Tensor add(const std::string& name, const Tensor& init, bool frozen);

  const std::vector<NamedParameter>& entries() const { return entries_; }
  const NamedParameter* find(const std::string& name) const;
  std::vector<Tensor> trainable() const;

  std::size_t frozen_count() const;
  std::size_t trainable_count() const;
  /// Element count of all entries whose name starts with prefix.
  std::size_t count_with_prefix(const std::string& prefix) const;

  void zero_grad();
  /// Copies values from another set with identical names and shapes.
  void load_values(const ParameterSet& other);

 private:
  std::vector<NamedParameter> entries_;
};

}  // namespace centerscan

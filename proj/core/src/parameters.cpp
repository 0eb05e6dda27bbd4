// SPDX-License-Identifier: Apache-2.0
#include "centerscan/parameters.hpp"

#include <algorithm>
#include <stdexcept>

namespace centerscan {

Tensor ParameterSet::add(const std::string& name, const Tensor& init, bool frozen) {
  if (find(name)) throw std::invalid_argument("ParameterSet: duplicate parameter '" + name + "'");
  entries_.push_back({name, init.clone(!frozen), frozen});
  return entries_.back().value;
}

const NamedParameter* ParameterSet::find(const std::string& name) const {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.name == name; });
  return it == entries_.end() ? nullptr : &*it;
}

std::vector<Tensor> ParameterSet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_) {
    if (!e.frozen) out.push_back(e.value);
  }
  return out;
}

std::size_t ParameterSet::frozen_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.frozen ? e.value.numel() : 0;
  return n;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.frozen ? 0 : e.value.numel();
  return n;
}

std::size_t ParameterSet::count_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.name.rfind(prefix, 0) == 0) n += e.value.numel();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

void ParameterSet::load_values(const ParameterSet& other) {
  for (auto& e : entries_) {
    const auto* src = other.find(e.name);
    if (!src) throw std::invalid_argument("ParameterSet: missing parameter '" + e.name + "'");
    if (src->value.shape() != e.value.shape()) {
      throw ShapeError("ParameterSet: shape mismatch for '" + e.name + "': " + shape_str(src->value.shape()) +
                       " vs " + shape_str(e.value.shape()));
    }
    auto dst = e.value.mutable_data();
    std::copy(src->value.data().begin(), src->value.data().end(), dst.begin());
  }
}

}  // namespace centerscan

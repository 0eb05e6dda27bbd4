// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "centerscan/container.hpp"
#include "centerscan/parameters.hpp"
#include "centerscan/rng.hpp"
#include "centerscan/tensor.hpp"

namespace centerscan {

/// Bounded FIFO of prototype rows written by earlier slices of one volume.
///
/// Rows are stored detached. Key/value projections are applied when the
/// memory is read, so the projection weights stay trainable.
class PrototypeMemory {
 public:
  PrototypeMemory(std::size_t capacity, std::size_t width);

  /// Appends every row of `rows` (n, width) tagged with slice_index; oldest
  /// rows are evicted beyond capacity. Slice tags must not decrease.
  void write(const Tensor& rows, int slice_index);
  void reset_volume();

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t width() const { return width_; }
  bool empty() const { return entries_.empty(); }
  /// Stored rows as a constant (size, width) tensor. Requires !empty().
  Tensor rows() const;
  std::vector<int> slice_tags() const;
  /// Throws if any stored row was written by slice_index or later.
  void check_causal(int slice_index) const;

  std::vector<NamedArray> dump(const std::string& prefix) const;

 private:
  struct Entry {
    std::vector<double> row;
    int slice = 0;
  };
  std::size_t capacity_, width_;
  std::deque<Entry> entries_;
};

/// z + softmax(z k^T / tau) v per row of queries (n, D); keys (m, D), values (m, D).
Tensor attend_memory(const Tensor& queries, const Tensor& keys, const Tensor& values, double tau);

struct SpsConfig {
  std::size_t num_anchors = 4;
  std::size_t width = 16;        // anchor width D, equal to context width
  std::size_t memory_capacity = 32;
  double tau_align = 0.0;        // <= 0 selects sqrt(D)
  double tau_memory = 0.0;       // <= 0 selects sqrt(D)

  double align_temperature() const;
  double memory_temperature() const;
};

struct SpsParams {
  Tensor anchors;                               // (N, D)
  Tensor theta_q, theta_k, theta_v;             // (D, D)
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;        // D -> D -> D
  Tensor norm_gain, norm_bias;                  // (D)
  Tensor phi_q, phi_k, phi_v;                   // (D, D)
  Tensor mem_key, mem_value;                    // (D, D)
  Tensor psi_w1, psi_b1, psi_w2, psi_b2;        // D -> D -> D

  static SpsParams create(ParameterSet& reg, const std::string& prefix, const SpsConfig& cfg, Rng& rng);
};

struct SpsOutput {
  Tensor Z;      // (N, D) context-aligned candidates
  Tensor Z_mem;  // (N, D) memory-refined candidates
  Tensor gate;   // (1, 1, H, W), in (0, 1)
  Tensor P_out;  // same shape as E_in
};

/// A' = A + Norm(MLP(softmax(A Tq (A Tk)^T / sqrt(D)) A Tv)).
Tensor intra_anchor(const SpsParams& p);
/// Z = (softmax_rows(A' Pq (F Pk)^T / tau) F) Pv. F: (T, D) context tokens.
Tensor align_context(const Tensor& anchors, const Tensor& context, const SpsParams& p, double tau);
/// Z + sum_j pi_j v_j with keys/values projected from stored rows; Z itself
/// when the memory is empty. Reads only rows from slices before slice_index.
Tensor memory_read(const Tensor& Z, const PrototypeMemory& mem, const SpsParams& p, double tau, int slice_index);
/// Stores Z's rows (detached) for later slices.
void memory_write(const Tensor& Z, PrototypeMemory& mem, int slice_index);
/// P_out = E_in * sigmoid(max_n <psi(Z_mem)_n, e_pixel>), gate broadcast over channels.
SpsOutput reweight(const Tensor& E_in, const Tensor& Z_mem, const SpsParams& p);

/// Full prompt-free prior path for one slice: anchors -> context alignment ->
/// memory read -> reweighting, then writes Z to memory.
SpsOutput sps_forward(const Tensor& E_in, const Tensor& context, const SpsParams& p, const SpsConfig& cfg,
                      PrototypeMemory& mem, int slice_index);

}  // namespace centerscan

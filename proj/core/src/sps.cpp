// SPDX-License-Identifier: Apache-2.0
#include "centerscan/sps.hpp"

#include <cmath>
#include <stdexcept>

#include "centerscan/nn.hpp"
#include "centerscan/ops.hpp"

namespace centerscan {

PrototypeMemory::PrototypeMemory(std::size_t capacity, std::size_t width) : capacity_(capacity), width_(width) {
  if (capacity == 0 || width == 0) throw std::invalid_argument("PrototypeMemory: capacity and width must be > 0");
}

void PrototypeMemory::write(const Tensor& rows, int slice_index) {
  if (rows.rank() != 2 || rows.dim(1) != width_) {
    throw ShapeError("PrototypeMemory::write: rows " + shape_str(rows.shape()) + " do not have width " +
                     std::to_string(width_));
  }
  if (!entries_.empty() && slice_index < entries_.back().slice) {
    throw std::logic_error("PrototypeMemory::write: slice " + std::to_string(slice_index) + " after slice " +
                           std::to_string(entries_.back().slice));
  }
  auto d = rows.data();
  for (std::size_t r = 0; r < rows.dim(0); ++r) {
    entries_.push_back({std::vector<double>(d.begin() + r * width_, d.begin() + (r + 1) * width_), slice_index});
    if (entries_.size() > capacity_) entries_.pop_front();
  }
}

void PrototypeMemory::reset_volume() { entries_.clear(); }

Tensor PrototypeMemory::rows() const {
  if (entries_.empty()) throw std::logic_error("PrototypeMemory::rows: empty memory");
  std::vector<double> flat;
  flat.reserve(entries_.size() * width_);
  for (const auto& e : entries_) flat.insert(flat.end(), e.row.begin(), e.row.end());
  return Tensor::from({entries_.size(), width_}, std::move(flat));
}

std::vector<int> PrototypeMemory::slice_tags() const {
  std::vector<int> tags;
  for (const auto& e : entries_) tags.push_back(e.slice);
  return tags;
}

void PrototypeMemory::check_causal(int slice_index) const {
  for (const auto& e : entries_) {
    if (e.slice >= slice_index) {
      throw std::logic_error("PrototypeMemory: slice " + std::to_string(slice_index) + " would read a row from slice " +
                             std::to_string(e.slice));
    }
  }
}

std::vector<NamedArray> PrototypeMemory::dump(const std::string& prefix) const {
  std::vector<NamedArray> out;
  if (entries_.empty()) return out;
  auto r = rows();
  out.push_back({prefix + "rows", r.shape(), {r.data().begin(), r.data().end()}, true});
  std::vector<double> tags;
  for (const auto& e : entries_) tags.push_back(e.slice);
  out.push_back({prefix + "slices", {tags.size()}, tags, true});
  return out;
}

Tensor attend_memory(const Tensor& queries, const Tensor& keys, const Tensor& values, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("attend_memory: tau must be > 0");
  Tensor scores = ops::scale(ops::matmul(queries, ops::transpose(keys)), 1.0 / tau);
  Tensor pi = ops::softmax(scores, 1);
  return ops::add(queries, ops::matmul(pi, values));
}

double SpsConfig::align_temperature() const {
  return tau_align > 0.0 ? tau_align : std::sqrt(static_cast<double>(width));
}

double SpsConfig::memory_temperature() const {
  return tau_memory > 0.0 ? tau_memory : std::sqrt(static_cast<double>(width));
}

SpsParams SpsParams::create(ParameterSet& reg, const std::string& prefix, const SpsConfig& cfg, Rng& rng) {
  const std::size_t N = cfg.num_anchors, D = cfg.width;
  if (N == 0 || D == 0) throw std::invalid_argument("SpsConfig: num_anchors and width must be > 0");
  const double sd = 1.0 / std::sqrt(static_cast<double>(D));
  auto mat = [&](const std::string& name, double s) { return reg.add(prefix + name, randn({D, D}, rng, s), false); };
  auto vec = [&](const std::string& name, double v) { return reg.add(prefix + name, Tensor::full({D}, v), false); };
  SpsParams p;
  p.anchors = reg.add(prefix + "anchors", randn({N, D}, rng, 1.0), false);
  p.theta_q = mat("theta_q", sd);
  p.theta_k = mat("theta_k", sd);
  p.theta_v = mat("theta_v", sd);
  p.mlp_w1 = mat("mlp.w1", sd);
  p.mlp_b1 = vec("mlp.b1", 0.0);
  p.mlp_w2 = mat("mlp.w2", sd);
  p.mlp_b2 = vec("mlp.b2", 0.0);
  p.norm_gain = vec("norm.gain", 1.0);
  p.norm_bias = vec("norm.bias", 0.0);
  p.phi_q = mat("phi_q", sd);
  p.phi_k = mat("phi_k", sd);
  p.phi_v = mat("phi_v", sd);
  p.mem_key = mat("mem_key", sd);
  p.mem_value = mat("mem_value", 0.1 * sd);
  p.psi_w1 = mat("psi.w1", sd);
  p.psi_b1 = vec("psi.b1", 0.0);
  p.psi_w2 = mat("psi.w2", 0.1 * sd);
  p.psi_b2 = vec("psi.b2", 0.0);
  return p;
}

Tensor intra_anchor(const SpsParams& p) {
  const Tensor& A = p.anchors;
  const double D = static_cast<double>(A.dim(1));
  Tensor q = ops::matmul(A, p.theta_q);
  Tensor k = ops::matmul(A, p.theta_k);
  Tensor v = ops::matmul(A, p.theta_v);
  Tensor scores = ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(D)), 1);
  Tensor mixed = ops::matmul(scores, v);
  Tensor hidden = ops::silu(nn::linear(mixed, p.mlp_w1, p.mlp_b1));
  Tensor mlp = nn::linear(hidden, p.mlp_w2, p.mlp_b2);
  return ops::add(A, nn::affine(ops::layer_norm(mlp), p.norm_gain, p.norm_bias));
}

Tensor align_context(const Tensor& anchors, const Tensor& context, const SpsParams& p, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("align_context: tau must be > 0");
  if (context.rank() != 2 || context.dim(1) != p.phi_k.dim(0)) {
    throw ShapeError("align_context: context " + shape_str(context.shape()) + " incompatible with phi_k " +
                     shape_str(p.phi_k.shape()));
  }
  Tensor q = ops::matmul(anchors, p.phi_q);
  Tensor k = ops::matmul(context, p.phi_k);
  Tensor attn = ops::softmax(ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / tau), 1);
  return ops::matmul(ops::matmul(attn, context), p.phi_v);
}

Tensor memory_read(const Tensor& Z, const PrototypeMemory& mem, const SpsParams& p, double tau, int slice_index) {
  if (mem.empty()) return Z;
  mem.check_causal(slice_index);
  Tensor stored = mem.rows();
  return attend_memory(Z, ops::matmul(stored, p.mem_key), ops::matmul(stored, p.mem_value), tau);
}

void memory_write(const Tensor& Z, PrototypeMemory& mem, int slice_index) { mem.write(Z.detach(), slice_index); }

SpsOutput reweight(const Tensor& E_in, const Tensor& Z_mem, const SpsParams& p) {
  if (E_in.rank() != 4 || E_in.dim(0) != 1 || E_in.dim(1) != p.psi_w2.dim(1)) {
    throw ShapeError("reweight: E_in " + shape_str(E_in.shape()) + " incompatible with psi output width " +
                     std::to_string(p.psi_w2.dim(1)));
  }
  const std::size_t H = E_in.dim(2), W = E_in.dim(3);
  Tensor psi = nn::linear(ops::silu(nn::linear(Z_mem, p.psi_w1, p.psi_b1)), p.psi_w2, p.psi_b2);
  Tensor scores = ops::matmul(nn::to_tokens(E_in), ops::transpose(psi));  // (HW, N)
  Tensor gate = ops::reshape(ops::sigmoid(ops::max_axis(scores, 1)), {1, 1, H, W});
  SpsOutput out;
  out.Z_mem = Z_mem;
  out.gate = gate;
  out.P_out = ops::mul(E_in, ops::broadcast_to(gate, E_in.shape()));
  return out;
}

SpsOutput sps_forward(const Tensor& E_in, const Tensor& context, const SpsParams& p, const SpsConfig& cfg,
                      PrototypeMemory& mem, int slice_index) {
  Tensor anchors = intra_anchor(p);
  Tensor Z = align_context(anchors, context, p, cfg.align_temperature());
  Tensor Z_mem = memory_read(Z, mem, p, cfg.memory_temperature(), slice_index);
  SpsOutput out = reweight(E_in, Z_mem, p);
  out.Z = Z;
  memory_write(Z, mem, slice_index);
  return out;
}

}  // namespace centerscan

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace centerscan {

/// Which trainable components are switched on.
/// A: center-scan SSM adapters in the encoder, B: structural prior synthesis,
/// C: memory decoder (context memory + multi-level supervision).
struct AblationConfig {
  bool A = true;
  bool B = true;
  bool C = true;

  std::string name() const;
  static AblationConfig parse(const std::string& name);
  /// Base, +A, +A+B, +A+B+C.
  static std::vector<AblationConfig> progressive();
  bool operator==(const AblationConfig&) const = default;
};

}  // namespace centerscan

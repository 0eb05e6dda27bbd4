// SPDX-License-Identifier: Apache-2.0
#include "centerscan/ablation_config.hpp"

#include <stdexcept>

namespace centerscan {

std::string AblationConfig::name() const {
  if (!A && !B && !C) return "Base";
  std::string s;
  if (A) s += "+A";
  if (B) s += "+B";
  if (C) s += "+C";
  return s;
}

AblationConfig AblationConfig::parse(const std::string& name) {
  if (name == "Base" || name == "base") return {false, false, false};
  AblationConfig c{false, false, false};
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char ch = name[i];
    if (ch == '+' || ch == ' ') continue;
    if (ch == 'A') c.A = true;
    else if (ch == 'B') c.B = true;
    else if (ch == 'C') c.C = true;
    else throw std::invalid_argument("AblationConfig: cannot parse '" + name + "'");
  }
  return c;
}

std::vector<AblationConfig> AblationConfig::progressive() {
  return {{false, false, false}, {true, false, false}, {true, true, false}, {true, true, true}};
}

}  // namespace centerscan

#pragma once

#include <string>
#include <vector>

namespace ncr {

// Analytic multiply-accumulate counts. conv: Cout*Cin*kH*kW*H'*W';
// dense layer: in*out.
struct LayerCost {
  std::string name;
  long long macs = 0;
};

inline long long conv_macs(int cout, int cin, int kh, int kw, int ho, int wo) {
  return static_cast<long long>(cout) * cin * kh * kw * ho * wo;
}

inline long long total_macs(const std::vector<LayerCost>& plan) {
  long long t = 0;
  for (const auto& l : plan) t += l.macs;
  return t;
}

}  // namespace ncr

// Prints the closed-form branches of sec(z) on [-pi, pi] x [-2, 2].
#include <iostream>
#include <numbers>

#include "realslice/realslice.hpp"

int main() {
  using namespace realslice;
  const Window w{-std::numbers::pi, std::numbers::pi, -2.0, 2.0};
  for (const auto& b : enumerate_branches(FunctionId::sec, w)) {
    std::cout << to_string(b.kind) << " n=" << b.n << " t in [" << b.t_min << ", " << b.t_max << "]: Re f = "
              << branch_rule(b) << "\n";
  }
}

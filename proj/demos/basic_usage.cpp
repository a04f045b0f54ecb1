// Slices sin(z) + 2, then asks which inputs give output 0.
#include <iostream>

#include "realslice/realslice.hpp"

int main() {
  using namespace realslice;
  const Expr f = parse("sin(z) + 2");
  const SliceSet s = extract_slice(f, standard_window(), GridSpec{});

  std::cout << to_string(f) << ": " << s.branches.size() << " branches\n";
  for (const auto& b : s.branches) {
    std::cout << "  " << to_string(b.kind);
    if (b.anchor) std::cout << " at " << *b.anchor;
    std::cout << ", " << b.points.size() << " points\n";
  }

  const auto roots = solve_level(f, 0.0, s);
  std::cout << "f(z) = 0 at\n";
  for (const auto& r : roots) std::cout << "  " << r.z.real() << (r.z.imag() < 0 ? " - " : " + ")
                                        << std::abs(r.z.imag()) << "i\n";
}

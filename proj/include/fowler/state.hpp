#pragma once

#include <array>
#include <cmath>

namespace fowler {

// Phase point (t, w1, w2, w1', w2') of the Fowler-transformed system.
struct FowlerState {
  double t = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
  double dw1 = 0.0;
  double dw2 = 0.0;

  double w(int i) const { return i == 0 ? w1 : w2; }
  double dw(int i) const { return i == 0 ? dw1 : dw2; }

  std::array<double, 4> phase() const { return {w1, w2, dw1, dw2}; }

  static FowlerState from_phase(double t, const std::array<double, 4>& y) {
    return {t, y[0], y[1], y[2], y[3]};
  }

  bool finite() const {
    return std::isfinite(t) && std::isfinite(w1) && std::isfinite(w2) &&
           std::isfinite(dw1) && std::isfinite(dw2);
  }

  friend bool operator==(const FowlerState&, const FowlerState&) = default;
};

}  // namespace fowler

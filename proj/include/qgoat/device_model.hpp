#pragma once

#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

namespace qgoat {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Converts a frequency quoted as X/2π in GHz to angular units (rad/ns).
constexpr double ghz_to_angular(double ghz) { return kTwoPi * ghz; }
constexpr double angular_to_ghz(double w) { return w / kTwoPi; }

enum class DriveTarget { transmon1, transmon2, both };

/// Two coupled fixed-frequency transmons. Energies in rad/ns, ħ = 1.
struct DeviceModel {
  double omega1 = ghz_to_angular(5.114);
  double omega2 = ghz_to_angular(4.914);
  double delta1 = ghz_to_angular(-0.330);
  double delta2 = ghz_to_angular(-0.330);
  double coupling = ghz_to_angular(0.0038);
  int levels = 3;
  DriveTarget drive = DriveTarget::transmon1;

  /// Hardware parameters used throughout the examples and presets.
  static DeviceModel table1() { return {}; }

  void validate() const {
    if (levels < 2) throw std::invalid_argument("DeviceModel: levels must be >= 2");
    if (coupling < 0) throw std::invalid_argument("DeviceModel: coupling must be >= 0");
    if (!std::isfinite(omega1) || !std::isfinite(omega2) || !std::isfinite(delta1) ||
        !std::isfinite(delta2) || !std::isfinite(coupling))
      throw std::invalid_argument("DeviceModel: non-finite parameter");
    if (delta1 > 0 || delta2 > 0)
      std::clog << "warning: positive anharmonicity is unusual for transmons\n";
  }
};

}  // namespace qgoat

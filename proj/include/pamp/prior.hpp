#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pamp {

/// Thrown when a configuration violates its documented invariants.
struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative numerical routine misses its tolerance.
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Atom {
  double value = 0.0;
  double probability = 0.0;

  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Discrete signal distribution: finitely many atoms plus the remaining mass at zero.
struct SignalPrior {
  std::vector<Atom> atoms;

  static SignalPrior zero() { return {}; }

  /// Mass `eps` at `value`, the rest at zero.
  static SignalPrior point_mass(double value, double eps) { return {{{value, eps}}}; }

  double nonzero_mass() const {
    return std::accumulate(atoms.begin(), atoms.end(), 0.0,
                           [](double acc, const Atom& a) { return acc + a.probability; });
  }

  double zero_mass() const { return 1.0 - nonzero_mass(); }

  double second_moment() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.probability * a.value * a.value;
    return m;
  }

  bool is_zero() const {
    for (const auto& a : atoms)
      if (a.probability > 0.0 && a.value != 0.0) return false;
    return true;
  }

  /// Same atom values, probabilities rescaled so the nonzero mass equals `eps`.
  SignalPrior with_nonzero_mass(double eps) const {
    const double total = nonzero_mass();
    SignalPrior out = *this;
    for (auto& a : out.atoms) a.probability = total > 0.0 ? a.probability * eps / total : 0.0;
    return out;
  }

  void validate() const {
    double sum = 0.0;
    for (const auto& a : atoms) {
      if (!(a.probability >= 0.0) || !std::isfinite(a.value))
        throw InvalidConfig("prior atom has negative probability or non-finite value");
      sum += a.probability;
    }
    if (sum > 1.0 + 1e-12) throw InvalidConfig("prior atom probabilities sum above 1");
  }

  friend bool operator==(const SignalPrior&, const SignalPrior&) = default;
};

}  // namespace pamp

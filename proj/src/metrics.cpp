#include "dynamiq/metrics.hpp"

#include <stdexcept>

namespace dynamiq {

namespace {

void check_lengths(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("metric length mismatch");
}

}  // namespace

double vnmse(std::span<const float> estimate, std::span<const float> truth) {
  check_lengths(estimate, truth);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = static_cast<double>(estimate[i]) - truth[i];
    err += e * e;
    ref += static_cast<double>(truth[i]) * truth[i];
  }
  if (ref == 0.0) throw std::invalid_argument("vnmse undefined for a zero-norm truth vector");
  return err / ref;
}

double mse(std::span<const float> estimate, std::span<const float> truth) {
  check_lengths(estimate, truth);
  if (truth.empty()) return 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = static_cast<double>(estimate[i]) - truth[i];
    err += e * e;
  }
  return err / static_cast<double>(truth.size());
}

double bits_per_coordinate(const WireVolume& wire) {
  if (wire.compressed_coordinates == 0) return 0.0;
  return static_cast<double>(wire.repr_bits) /
         static_cast<double>(wire.compressed_coordinates);
}

double stats_phase_fraction(const WireVolume& wire) {
  if (wire.transmitted_coordinates == 0) return 0.0;
  return static_cast<double>(wire.stats_bits) /
         (16.0 * static_cast<double>(wire.transmitted_coordinates));
}

}  // namespace dynamiq

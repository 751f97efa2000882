#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dynamiq {

// ||estimate - truth||^2 / ||truth||^2, accumulated in double. Throws on a
// zero-norm truth vector.
double vnmse(std::span<const float> estimate, std::span<const float> truth);

double mse(std::span<const float> estimate, std::span<const float> truth);

struct HopError {
  std::uint32_t chunk = 0;
  std::uint32_t hop_slot = 0;
  double mse = 0.0;  // of the transmitted partial sum vs its exact counterpart
};

// Wire accounting for one round, split by phase and by field so both the
// per-representation cost (comparable to the budget b) and the round total
// can be reported.
struct WireVolume {
  std::uint64_t stats_bits = 0;    // initial all-reduce, 2 x 32 per super-group per hop
  std::uint64_t payload_bits = 0;  // packed entries over all transmissions
  std::uint64_t scale_bits = 0;    // group + super-group scales over all transmissions
  std::uint64_t header_bits = 0;   // chunk headers over all transmissions

  // One sample per compression event (forwarded copies excluded): the bits of
  // that representation net of headers, and the coordinates it covers.
  std::uint64_t repr_bits = 0;
  std::uint64_t compressed_coordinates = 0;

  std::uint64_t transmitted_coordinates = 0;  // over all main-phase transmissions

  std::uint64_t total_bits() const {
    return stats_bits + payload_bits + scale_bits + header_bits;
  }
};

struct ErrorReport {
  double vnmse = 0.0;
  double mse = 0.0;
  double bits_per_coordinate = 0.0;  // per representation
  std::vector<HopError> per_hop;
};

// Average cost of a single compressed representation in bits per coordinate:
// (payload + scales) / coordinates, headers and stats phase excluded.
double bits_per_coordinate(const WireVolume& wire);

// Stats-phase volume relative to shipping the same coordinates uncompressed
// at 16 bits over the same hops.
double stats_phase_fraction(const WireVolume& wire);

}  // namespace dynamiq

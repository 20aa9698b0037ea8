#pragma once

#include <complex>
#include <span>
#include <vector>

#include <json.hpp>

#include "wsca/errors.hpp"

namespace wsca {

// Far-field signal chain: the baseband leakage envelope A(t) rides a carrier
// as s(t) = A(t)cos(2*pi*f*t + phi), attenuated by free-space distance and a
// fixed glass loss, then comes back through a zero-IF receiver.
struct RfChannelConfig {
  double carrier_hz = 2'565'000'000.0; // GPU boost clock
  double phase_rad = 0.0;
  double passband_rate_hz = 0.0;
  double baseband_rate_hz = 0.0;
  double rx_bandwidth_hz = 0.0;
  double distance_m = 1.0;
  double glass_loss_db = 0.0;
  double reference_gain = 1.0;

  // reference_gain / distance, scaled by 10^(-glass_loss_db/20)
  double amplitude_gain() const;
  // passband/baseband sample-rate ratio; must be integral
  int upsample_factor() const;
  void validate(bool direct_sampling = true) const;
};

nlohmann::json rf_to_json(const RfChannelConfig& cfg);
RfChannelConfig rf_from_json(const nlohmann::json& j);

// Upsample (zero-order hold), scale by the channel gain, and mix onto the
// carrier. The baseband sequence is an envelope and must be non-negative.
std::vector<double> modulate(std::span<const double> baseband, const RfChannelConfig& cfg);

// Complex mix to DC, cascaded boxcar low-pass (length = decimation factor,
// applied twice), then decimate back to the baseband rate. |y| ~ gain*A/2 for
// envelopes band-limited within the receiver bandwidth.
std::vector<std::complex<double>> zero_if_downconvert(std::span<const double> passband,
                                                      const RfChannelConfig& cfg);

std::vector<double> envelope_magnitude(std::span<const std::complex<double>> baseband);

// Near/far-field boundary R = 2*D^2/lambda.
double field_boundary(double largest_dimension_m, double wavelength_m);

} // namespace wsca

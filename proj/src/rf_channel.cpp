#include "wsca/rf_channel.hpp"

#include <cmath>

namespace wsca {

using nlohmann::json;

double RfChannelConfig::amplitude_gain() const {
  return reference_gain / distance_m * std::pow(10.0, -glass_loss_db / 20.0);
}

int RfChannelConfig::upsample_factor() const {
  require(baseband_rate_hz > 0.0 && passband_rate_hz > 0.0, Err::RateMismatch,
          "sample rates must be positive");
  const double ratio = passband_rate_hz / baseband_rate_hz;
  const int factor = int(std::lround(ratio));
  require(factor >= 1 && std::abs(ratio - double(factor)) < 1e-9, Err::RateMismatch,
          "passband rate must be an integer multiple of the baseband rate");
  return factor;
}

void RfChannelConfig::validate(bool direct_sampling) const {
  (void)upsample_factor();
  require(distance_m > 0.0, Err::BadArgument, "distance must be positive");
  require(glass_loss_db >= 0.0, Err::BadArgument, "glass loss must be >= 0 dB");
  require(carrier_hz > 0.0, Err::BadArgument, "carrier must be positive");
  if (direct_sampling)
    require(passband_rate_hz > 2.0 * carrier_hz, Err::RateMismatch,
            "passband rate must exceed twice the carrier for direct sampling");
  if (rx_bandwidth_hz > 0.0)
    require(rx_bandwidth_hz <= baseband_rate_hz, Err::RateMismatch,
            "receiver bandwidth cannot exceed the baseband rate");
}

json rf_to_json(const RfChannelConfig& cfg) {
  return json{{"carrier_hz", cfg.carrier_hz},
              {"phase_rad", cfg.phase_rad},
              {"passband_rate_hz", cfg.passband_rate_hz},
              {"baseband_rate_hz", cfg.baseband_rate_hz},
              {"rx_bandwidth_hz", cfg.rx_bandwidth_hz},
              {"distance_m", cfg.distance_m},
              {"glass_loss_db", cfg.glass_loss_db},
              {"reference_gain", cfg.reference_gain}};
}

RfChannelConfig rf_from_json(const json& j) {
  RfChannelConfig cfg;
  cfg.carrier_hz = j.value("carrier_hz", cfg.carrier_hz);
  cfg.phase_rad = j.value("phase_rad", 0.0);
  cfg.passband_rate_hz = j.value("passband_rate_hz", 0.0);
  cfg.baseband_rate_hz = j.value("baseband_rate_hz", 0.0);
  cfg.rx_bandwidth_hz = j.value("rx_bandwidth_hz", 0.0);
  cfg.distance_m = j.value("distance_m", 1.0);
  cfg.glass_loss_db = j.value("glass_loss_db", 0.0);
  cfg.reference_gain = j.value("reference_gain", 1.0);
  return cfg;
}

std::vector<double> modulate(std::span<const double> baseband, const RfChannelConfig& cfg) {
  cfg.validate();
  for (double a : baseband)
    require(a >= 0.0, Err::BadArgument, "baseband must be a non-negative envelope");

  const int up = cfg.upsample_factor();
  const double gain = cfg.amplitude_gain();
  const double ratio = cfg.carrier_hz / cfg.passband_rate_hz;
  std::vector<double> out(baseband.size() * size_t(up));
  for (size_t n = 0; n < out.size(); ++n) {
    const double arg = 2.0 * M_PI * std::fmod(double(n) * ratio, 1.0) + cfg.phase_rad;
    out[n] = gain * baseband[n / size_t(up)] * std::cos(arg);
  }
  return out;
}

namespace {

// Causal boxcar with zero prefill; linear, settles after `len` samples.
void boxcar_inplace(std::vector<std::complex<double>>& v, int len) {
  std::vector<std::complex<double>> out(v.size());
  std::complex<double> running = 0.0;
  for (size_t n = 0; n < v.size(); ++n) {
    running += v[n];
    if (n >= size_t(len)) running -= v[n - size_t(len)];
    out[n] = running / double(len);
  }
  v.swap(out);
}

} // namespace

std::vector<std::complex<double>> zero_if_downconvert(std::span<const double> passband,
                                                      const RfChannelConfig& cfg) {
  const int up = cfg.upsample_factor();
  const double ratio = cfg.carrier_hz / cfg.passband_rate_hz;

  std::vector<std::complex<double>> mixed(passband.size());
  for (size_t n = 0; n < passband.size(); ++n) {
    const double arg = -2.0 * M_PI * std::fmod(double(n) * ratio, 1.0);
    mixed[n] = passband[n] * std::complex<double>(std::cos(arg), std::sin(arg));
  }
  boxcar_inplace(mixed, up);
  boxcar_inplace(mixed, up);

  // Pick the mid-window position after the (up-1)-sample cascade delay.
  const size_t n_out = passband.size() / size_t(up);
  const size_t phase = size_t(up) - 1 + size_t(up) / 2;
  std::vector<std::complex<double>> out(n_out);
  for (size_t k = 0; k < n_out; ++k)
    out[k] = mixed[std::min(k * size_t(up) + phase, mixed.size() - 1)];
  return out;
}

std::vector<double> envelope_magnitude(std::span<const std::complex<double>> baseband) {
  std::vector<double> out(baseband.size());
  for (size_t i = 0; i < baseband.size(); ++i) out[i] = std::abs(baseband[i]);
  return out;
}

double field_boundary(double largest_dimension_m, double wavelength_m) {
  require(wavelength_m > 0.0, Err::NonpositiveWavelength, "wavelength must be positive");
  require(largest_dimension_m >= 0.0, Err::BadArgument, "dimension must be >= 0");
  return 2.0 * largest_dimension_m * largest_dimension_m / wavelength_m;
}

} // namespace wsca

#pragma once

#include "wasncal/geometry.hpp"
#include "wasncal/types.hpp"

#include <string>
#include <vector>

namespace wasncal {

enum class Attenuation { None, InverseDistance };

struct SynthesisOptions {
  // Upper bound on |clock offset| the schedule must absorb. Window sizing is
  // driven by this bound, not by the scenario's actual offset, so recordings
  // keep the same shape across trials.
  double max_offset = 1.0;  // seconds
  double guard = 0.01;      // scheduling margin, seconds
  Attenuation attenuation = Attenuation::None;
};

// Per-sensor recordings of the sequential emission schedule. Channels 0..M-1
// belong to the calibrated sensors, channel M to the new sensor (whose clock
// runs offset by the scenario's clock_offset).
struct RecordingSet {
  double sample_rate = 48000.0;  // Hz
  std::vector<std::vector<double>> channels;  // M + 1, equal lengths
  Attenuation attenuation_model = Attenuation::None;
  // Emission schedule on the reference clock.
  std::vector<double> emission_starts;  // per emitter, seconds
  double signal_duration = 0.0;         // seconds
  double max_offset = 1.0;              // offset bound used when scheduling

  double duration() const {
    return channels.empty() ? 0.0 : static_cast<double>(channels.front().size()) / sample_rate;
  }
};

struct TdoaEstimate {
  double value = 0.0;         // seconds
  double peak_quality = 0.0;  // peak-to-secondary ratio, >= 1
  double search_window = 0.0; // seconds
  bool reliable = true;       // false when peak_quality fell below threshold
};

struct TdoaEstimationOptions {
  double guard = 0.01;            // seconds added around the feasible lag range
  double min_peak_quality = 2.0;  // below this the estimate is flagged
  double speed_of_sound = 343.0;  // m/s, sizes the propagation search window
};

// One-second-style calibration signal: unit-variance white Gaussian noise.
std::vector<double> white_noise(int num_samples, Rng& rng);

// Free-field synthesis: every channel receives each emission delayed by the
// propagation time, the new-sensor channel additionally shifted by the clock
// offset. Fractional delays are applied by frequency-domain phase shift.
// Throws DurationError when |clock_offset| exceeds options.max_offset or the
// signal is empty.
RecordingSet synthesize_anechoic(const Scenario& scenario, const std::vector<double>& signal,
                                 double sample_rate, const SynthesisOptions& options = {});

// Variant driven by externally generated impulse responses, one mono WAV per
// (emitter, sensor) pair: <dir>/rir_e<j>_s<i>.wav and <dir>/rir_e<j>_new.wav
// (1-based indices). Propagation comes entirely from the responses; the
// clock offset is still applied to the new-sensor channel.
RecordingSet synthesize_from_impulse_responses(const Scenario& scenario,
                                               const std::vector<double>& signal,
                                               double sample_rate, const std::string& rir_dir,
                                               const SynthesisOptions& options = {});

// PHAT-weighted cross-correlation over lags [-max_lag, +max_lag]; the peak
// sits at lag k when y equals x delayed by k samples. Spectral bins whose
// cross-power magnitude falls below 1e-12 of the peak are zeroed rather than
// divided. Inputs must have equal length >= 2 * max_lag.
std::vector<double> gcc_phat(const std::vector<double>& x, const std::vector<double>& y,
                             int max_lag);

// Sub-sample peak refinement through three correlation samples at lags
// k-1, k, k+1; returns the fractional offset in (-1, 1). Throws
// FlatPeakError when the curvature is numerically zero.
double quadratic_interp(double c_minus, double c_0, double c_plus);

// Per (sensor, emitter) TDOA between the sensor channel and the new-sensor
// channel, windowed around each emission. The search window covers the
// largest estimated propagation delay plus the recording's offset bound.
// Low-quality peaks are flagged, never dropped.
std::vector<std::vector<TdoaEstimate>> estimate_tdoas(const RecordingSet& rec,
                                                      const PositionMatrix& emitter_estimates,
                                                      const PositionMatrix& sensor_estimates,
                                                      const TdoaEstimationOptions& options = {});

// Scales estimated TDOAs into an M x N range-difference matrix.
Matrix tdoas_to_range_diffs(const std::vector<std::vector<TdoaEstimate>>& tdoas,
                            double speed_of_sound);

// 32-bit-float multichannel RIFF WAVE io.
void write_wav(const std::string& path, const std::vector<std::vector<double>>& channels,
               double sample_rate);
std::pair<std::vector<std::vector<double>>, double> read_wav(const std::string& path);

}  // namespace wasncal

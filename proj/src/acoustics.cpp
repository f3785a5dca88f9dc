#include "wasncal/acoustics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

namespace wasncal {

namespace {

constexpr double kSpectralFloor = 1e-12;
constexpr int kSecondaryExclusion = 8;  // samples around the primary peak

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void fft_inplace(std::vector<std::complex<double>>& buf, int sign) {
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(buf.size()), data, data, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Delays the (real-signal) spectrum by a possibly fractional sample count.
// Conjugate symmetry is kept explicitly so the time-domain result stays real;
// the Nyquist bin gets the real part of its phase factor.
void apply_fractional_delay(std::vector<std::complex<double>>& spectrum, double shift_samples) {
  const std::size_t n = spectrum.size();
  const double step = -2.0 * std::numbers::pi * shift_samples / static_cast<double>(n);
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) {
    const std::complex<double> factor(std::cos(step * k), std::sin(step * k));
    spectrum[k] *= factor;
    spectrum[n - k] *= std::conj(factor);
  }
  if (n % 2 == 0) spectrum[n / 2] *= std::cos(step * static_cast<double>(n / 2));
}

// Zero-filled extraction so windows near the channel edges stay well defined.
std::vector<double> extract_window(const std::vector<double>& channel, long begin, long end) {
  std::vector<double> window(static_cast<std::size_t>(end - begin), 0.0);
  const long lo = std::max(begin, 0L);
  const long hi = std::min(end, static_cast<long>(channel.size()));
  for (long t = lo; t < hi; ++t) window[static_cast<std::size_t>(t - begin)] = channel[t];
  return window;
}

double max_emitter_receiver_distance(const Scenario& scenario) {
  double furthest = 0.0;
  for (int j = 0; j < scenario.num_emitters(); ++j) {
    for (int i = 0; i < scenario.num_sensors(); ++i)
      furthest = std::max(furthest, (scenario.emitters.col(j) - scenario.sensors.col(i)).norm());
    furthest = std::max(furthest, (scenario.emitters.col(j) - scenario.new_sensor).norm());
  }
  return furthest;
}

}  // namespace

std::vector<double> white_noise(int num_samples, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> signal(static_cast<std::size_t>(num_samples));
  for (auto& s : signal) s = gauss(rng);
  return signal;
}

RecordingSet synthesize_anechoic(const Scenario& scenario, const std::vector<double>& signal,
                                 double sample_rate, const SynthesisOptions& options) {
  if (signal.empty()) throw DurationError("synthesize_anechoic: empty calibration signal");
  if (!(sample_rate > 0.0)) throw DurationError("synthesize_anechoic: invalid sample rate");
  if (std::abs(scenario.clock_offset) > options.max_offset)
    throw DurationError("synthesize_anechoic: clock offset exceeds the configured bound");

  const int m = scenario.num_sensors();
  const int n = scenario.num_emitters();
  const double c = scenario.speed_of_sound;
  const double prop_max = max_emitter_receiver_distance(scenario) / c;

  const long sig_len = static_cast<long>(signal.size());
  const long lead = static_cast<long>(std::ceil((options.max_offset + options.guard) * sample_rate));
  const long prop_samples = static_cast<long>(std::ceil((prop_max + options.guard) * sample_rate));
  // The same signal is re-emitted by every source, so consecutive emissions
  // must be spaced far enough apart that no correlation window can ever see
  // two different copies: gap >= propagation + twice the offset bound.
  const long gap = prop_samples +
                   static_cast<long>(std::ceil((2.0 * options.max_offset + options.guard) * sample_rate));
  const long stride = sig_len + gap;

  const std::size_t local_len = next_pow2(static_cast<std::size_t>(sig_len + lead + prop_samples));
  const long total = (n - 1) * stride + lead + static_cast<long>(local_len);

  RecordingSet rec;
  rec.sample_rate = sample_rate;
  rec.attenuation_model = options.attenuation;
  rec.signal_duration = static_cast<double>(sig_len) / sample_rate;
  rec.max_offset = options.max_offset;
  rec.channels.assign(static_cast<std::size_t>(m + 1),
                      std::vector<double>(static_cast<std::size_t>(total), 0.0));
  rec.emission_starts.resize(n);

  std::vector<std::complex<double>> base(local_len);
  std::vector<std::complex<double>> shifted(local_len);

  for (int j = 0; j < n; ++j) {
    const long start = lead + static_cast<long>(j) * stride;
    rec.emission_starts[j] = static_cast<double>(start) / sample_rate;
    const long origin = start - lead;

    std::fill(base.begin(), base.end(), std::complex<double>(0.0, 0.0));
    for (long t = 0; t < sig_len; ++t) base[t] = signal[t];
    fft_inplace(base, FFTW_FORWARD);

    for (int ch = 0; ch <= m; ++ch) {
      const Vector receiver = (ch < m) ? Vector(scenario.sensors.col(ch)) : scenario.new_sensor;
      const double dist = (scenario.emitters.col(j) - receiver).norm();
      double delay = dist / c;
      if (ch == m) delay -= scenario.clock_offset;  // the new sensor's clock runs offset
      const double shift = static_cast<double>(lead) + delay * sample_rate;

      shifted = base;
      apply_fractional_delay(shifted, shift);
      fft_inplace(shifted, FFTW_BACKWARD);

      double gain = 1.0;
      if (options.attenuation == Attenuation::InverseDistance) gain = 1.0 / std::max(dist, 1e-2);
      auto& channel = rec.channels[ch];
      const double scale = gain / static_cast<double>(local_len);
      for (std::size_t t = 0; t < local_len; ++t)
        channel[static_cast<std::size_t>(origin) + t] += scale * shifted[t].real();
    }
  }
  return rec;
}

std::vector<double> gcc_phat(const std::vector<double>& x, const std::vector<double>& y,
                             int max_lag) {
  if (x.size() != y.size())
    throw DimensionError("gcc_phat: inputs must have equal length");
  if (max_lag < 0 || x.empty() || x.size() < static_cast<std::size_t>(2 * max_lag))
    throw DimensionError("gcc_phat: inputs must be at least twice the lag range");

  const std::size_t nfft = next_pow2(x.size() + static_cast<std::size_t>(max_lag));
  std::vector<std::complex<double>> spec_x(nfft), spec_y(nfft);
  for (std::size_t t = 0; t < x.size(); ++t) {
    spec_x[t] = x[t];
    spec_y[t] = y[t];
  }
  fft_inplace(spec_x, FFTW_FORWARD);
  fft_inplace(spec_y, FFTW_FORWARD);

  // Phase transform: keep phase, drop magnitude; bins with negligible
  // cross-power are zeroed instead of divided.
  std::vector<std::complex<double>> cross(nfft);
  double peak_power = 0.0;
  for (std::size_t k = 0; k < nfft; ++k) {
    cross[k] = std::conj(spec_x[k]) * spec_y[k];
    peak_power = std::max(peak_power, std::abs(cross[k]));
  }
  const double floor = kSpectralFloor * peak_power;
  for (std::size_t k = 0; k < nfft; ++k) {
    const double mag = std::abs(cross[k]);
    cross[k] = (mag > floor) ? cross[k] / mag : std::complex<double>(0.0, 0.0);
  }
  fft_inplace(cross, FFTW_BACKWARD);

  std::vector<double> correlation(static_cast<std::size_t>(2 * max_lag + 1));
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    const std::size_t idx = static_cast<std::size_t>((lag + static_cast<long>(nfft)) % nfft);
    correlation[static_cast<std::size_t>(lag + max_lag)] =
        cross[idx].real() / static_cast<double>(nfft);
  }
  return correlation;
}

double quadratic_interp(double c_minus, double c_0, double c_plus) {
  if (c_0 < c_minus || c_0 < c_plus)
    throw Error("quadratic_interp: center sample must dominate its neighbors");
  const double denom = c_minus - 2.0 * c_0 + c_plus;
  if (std::abs(denom) <= 1e-12 * std::abs(c_0))
    throw FlatPeakError("quadratic_interp: flat peak, sub-sample offset undefined");
  return (c_minus - c_plus) / (2.0 * denom);
}

std::vector<std::vector<TdoaEstimate>> estimate_tdoas(const RecordingSet& rec,
                                                      const PositionMatrix& emitter_estimates,
                                                      const PositionMatrix& sensor_estimates,
                                                      const TdoaEstimationOptions& options) {
  const int m = static_cast<int>(rec.channels.size()) - 1;
  const int n = static_cast<int>(rec.emission_starts.size());
  if (m < 1 || n < 1) throw DimensionError("estimate_tdoas: recording lacks channels or schedule");
  if (emitter_estimates.cols() != n || sensor_estimates.cols() != m)
    throw DimensionError("estimate_tdoas: position estimates disagree with the recording");

  const double fs = rec.sample_rate;
  // Propagation bound from the estimated geometry; the new sensor is assumed
  // to live at the same spatial scale as the rest of the network.
  double diameter = 0.0;
  PositionMatrix all(emitter_estimates.rows(), n + m);
  all.leftCols(n) = emitter_estimates;
  all.rightCols(m) = sensor_estimates;
  for (int a = 0; a < all.cols(); ++a)
    for (int b = a + 1; b < all.cols(); ++b)
      diameter = std::max(diameter, (all.col(a) - all.col(b)).norm());
  const double prop_bound = std::max(1.5 * diameter / options.speed_of_sound, 1e-3);

  const long sig_len = static_cast<long>(std::llround(rec.signal_duration * fs));
  const long lead = static_cast<long>(std::ceil((rec.max_offset + options.guard) * fs));
  const long prop_samples = static_cast<long>(std::ceil((prop_bound + options.guard) * fs));
  const int max_lag = static_cast<int>(
      std::ceil((prop_bound + rec.max_offset + 2.0 * options.guard) * fs));
  const int search = static_cast<int>(std::ceil((prop_bound + rec.max_offset + options.guard) * fs));

  std::vector<std::vector<TdoaEstimate>> estimates(
      static_cast<std::size_t>(m), std::vector<TdoaEstimate>(static_cast<std::size_t>(n)));

  for (int j = 0; j < n; ++j) {
    const long start = static_cast<long>(std::llround(rec.emission_starts[j] * fs));
    // Both windows share one origin, so the correlation lag is the TDOA
    // directly. The new-sensor window extends by the offset bound on both
    // sides of the sensor window.
    const long b0 = start - lead;
    const long a1 = start + sig_len + prop_samples;
    const long b1 = a1 + static_cast<long>(std::ceil(rec.max_offset * fs));

    std::vector<double> reference = extract_window(rec.channels[m], b0, b1);
    for (int i = 0; i < m; ++i) {
      std::vector<double> sensor_window = extract_window(rec.channels[i], b0, a1);
      sensor_window.resize(reference.size(), 0.0);

      const std::vector<double> corr = gcc_phat(reference, sensor_window, max_lag);

      const int lo = std::max(-search, -max_lag) + max_lag;
      const int hi = std::min(search, max_lag) + max_lag;
      int peak = lo;
      for (int k = lo + 1; k <= hi; ++k)
        if (corr[k] > corr[peak]) peak = k;

      double secondary = 0.0;
      for (int k = lo; k <= hi; ++k)
        if (std::abs(k - peak) > kSecondaryExclusion)
          secondary = std::max(secondary, std::abs(corr[k]));

      double frac = 0.0;
      if (peak > lo && peak < hi) {
        try {
          frac = quadratic_interp(corr[peak - 1], corr[peak], corr[peak + 1]);
        } catch (const FlatPeakError&) {
          frac = 0.0;  // keep the integer lag
        }
      }

      TdoaEstimate& est = estimates[i][j];
      est.value = (static_cast<double>(peak - max_lag) + frac) / fs;
      est.peak_quality = (secondary > 0.0) ? std::abs(corr[peak]) / secondary
                                           : std::numeric_limits<double>::infinity();
      est.search_window = static_cast<double>(max_lag) / fs;
      est.reliable = est.peak_quality >= options.min_peak_quality;
    }
  }
  return estimates;
}

Matrix tdoas_to_range_diffs(const std::vector<std::vector<TdoaEstimate>>& tdoas,
                            double speed_of_sound) {
  if (tdoas.empty() || tdoas.front().empty())
    throw DimensionError("tdoas_to_range_diffs: empty estimate matrix");
  Matrix r(tdoas.size(), tdoas.front().size());
  for (std::size_t i = 0; i < tdoas.size(); ++i) {
    if (tdoas[i].size() != static_cast<std::size_t>(r.cols()))
      throw DimensionError("tdoas_to_range_diffs: ragged estimate matrix");
    for (std::size_t j = 0; j < tdoas[i].size(); ++j)
      r(i, j) = speed_of_sound * tdoas[i][j].value;
  }
  return r;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(bytes, 2);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char bytes[2];
  in.read(reinterpret_cast<char*>(bytes), 2);
  return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const std::vector<std::vector<double>>& channels,
               double sample_rate) {
  if (channels.empty()) throw IoError("write_wav: no channels");
  const std::size_t frames = channels.front().size();
  for (const auto& ch : channels)
    if (ch.size() != frames) throw IoError("write_wav: channels must have equal length");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");

  const auto num_channels = static_cast<std::uint16_t>(channels.size());
  const auto rate = static_cast<std::uint32_t>(std::llround(sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * channels.size() * 4);

  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 3);  // IEEE float
  write_u16(out, num_channels);
  write_u32(out, rate);
  write_u32(out, rate * num_channels * 4);
  write_u16(out, static_cast<std::uint16_t>(num_channels * 4));
  write_u16(out, 32);
  out.write("data", 4);
  write_u32(out, data_bytes);

  for (std::size_t t = 0; t < frames; ++t)
    for (const auto& ch : channels) {
      const float sample = static_cast<float>(ch[t]);
      char raw[4];
      std::memcpy(raw, &sample, 4);
      out.write(raw, 4);
    }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::pair<std::vector<std::vector<double>>, double> read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("read_wav: not a RIFF file");
  read_u32(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("read_wav: not a WAVE file");

  std::uint16_t num_channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  std::uint16_t format = 0;
  std::vector<std::vector<double>> channels;

  while (in.read(tag, 4)) {
    const std::uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      num_channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (format != 3 || bits != 32)
        throw IoError("read_wav: only 32-bit IEEE float data is supported");
      if (num_channels == 0) throw IoError("read_wav: data chunk before fmt chunk");
      const std::size_t frames = chunk_size / (4u * num_channels);
      channels.assign(num_channels, std::vector<double>(frames));
      for (std::size_t t = 0; t < frames; ++t)
        for (std::uint16_t c = 0; c < num_channels; ++c) {
          char raw[4];
          in.read(raw, 4);
          float sample;
          std::memcpy(&sample, raw, 4);
          channels[c][t] = static_cast<double>(sample);
        }
      if (!in) throw IoError("read_wav: truncated data chunk");
      return {channels, static_cast<double>(rate)};
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw IoError("read_wav: no data chunk found");
}

RecordingSet synthesize_from_impulse_responses(const Scenario& scenario,
                                               const std::vector<double>& signal,
                                               double sample_rate, const std::string& rir_dir,
                                               const SynthesisOptions& options) {
  if (signal.empty()) throw DurationError("synthesize_from_impulse_responses: empty signal");
  if (std::abs(scenario.clock_offset) > options.max_offset)
    throw DurationError("synthesize_from_impulse_responses: clock offset exceeds the bound");

  const int m = scenario.num_sensors();
  const int n = scenario.num_emitters();

  // Load all responses first so the schedule can absorb their length.
  std::vector<std::vector<std::vector<double>>> rirs(n);
  std::size_t rir_len = 0;
  for (int j = 0; j < n; ++j) {
    rirs[j].resize(m + 1);
    for (int ch = 0; ch <= m; ++ch) {
      std::ostringstream name;
      name << rir_dir << "/rir_e" << (j + 1) << "_"
           << (ch < m ? "s" + std::to_string(ch + 1) : std::string("new")) << ".wav";
      auto [loaded, rate] = read_wav(name.str());
      if (loaded.size() != 1) throw IoError("impulse response must be mono: " + name.str());
      if (std::llround(rate) != std::llround(sample_rate))
        throw IoError("impulse response sample rate mismatch: " + name.str());
      rir_len = std::max(rir_len, loaded.front().size());
      rirs[j][ch] = std::move(loaded.front());
    }
  }

  const long sig_len = static_cast<long>(signal.size());
  const long lead = static_cast<long>(std::ceil((options.max_offset + options.guard) * sample_rate));
  const long tail = static_cast<long>(rir_len) +
                    static_cast<long>(std::ceil(options.guard * sample_rate));
  const long gap = tail + static_cast<long>(
                              std::ceil((2.0 * options.max_offset + options.guard) * sample_rate));
  const long stride = sig_len + gap;
  const std::size_t local_len =
      next_pow2(static_cast<std::size_t>(sig_len + lead + tail));
  const long total = (n - 1) * stride + lead + static_cast<long>(local_len);

  RecordingSet rec;
  rec.sample_rate = sample_rate;
  rec.attenuation_model = Attenuation::None;
  rec.signal_duration = static_cast<double>(sig_len) / sample_rate;
  rec.max_offset = options.max_offset;
  rec.channels.assign(static_cast<std::size_t>(m + 1),
                      std::vector<double>(static_cast<std::size_t>(total), 0.0));
  rec.emission_starts.resize(n);

  std::vector<std::complex<double>> base(local_len), work(local_len), rir_spec(local_len);
  for (int j = 0; j < n; ++j) {
    const long start = lead + static_cast<long>(j) * stride;
    rec.emission_starts[j] = static_cast<double>(start) / sample_rate;
    const long origin = start - lead;

    std::fill(base.begin(), base.end(), std::complex<double>(0.0, 0.0));
    for (long t = 0; t < sig_len; ++t) base[t] = signal[t];
    fft_inplace(base, FFTW_FORWARD);

    for (int ch = 0; ch <= m; ++ch) {
      std::fill(rir_spec.begin(), rir_spec.end(), std::complex<double>(0.0, 0.0));
      for (std::size_t t = 0; t < rirs[j][ch].size(); ++t) rir_spec[t] = rirs[j][ch][t];
      fft_inplace(rir_spec, FFTW_FORWARD);

      for (std::size_t k = 0; k < local_len; ++k) work[k] = base[k] * rir_spec[k];
      double shift = static_cast<double>(lead);
      if (ch == m) shift -= scenario.clock_offset * sample_rate;
      apply_fractional_delay(work, shift);
      fft_inplace(work, FFTW_BACKWARD);

      auto& channel = rec.channels[ch];
      const double scale = 1.0 / static_cast<double>(local_len);
      for (std::size_t t = 0; t < local_len; ++t)
        channel[static_cast<std::size_t>(origin) + t] += scale * work[t].real();
    }
  }
  return rec;
}

}  // namespace wasncal

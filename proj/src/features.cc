// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/features.h"

#include <complex>
#include <cstring>
#include <fstream>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace told {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filterbank over FFT bins 0..nfft/2, HTK-style mel scale
// from 0 Hz to Nyquist.
Mat build_mel_filterbank(int n_mels, int nfft, int sample_rate) {
  int n_bins = nfft / 2 + 1;
  double nyquist = sample_rate / 2.0;
  double mel_hi = hz_to_mel(nyquist);
  std::vector<double> centers(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    centers[i] = mel_to_hz(mel_hi * i / (n_mels + 1));
  Mat fb = Mat::Zero(n_mels, n_bins);
  double bin_width = static_cast<double>(sample_rate) / nfft;
  for (int m = 0; m < n_mels; ++m) {
    double left = centers[m], mid = centers[m + 1], right = centers[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      double f = k * bin_width;
      if (f <= left || f >= right) continue;
      fb(m, k) = (f <= mid) ? (f - left) / (mid - left)
                            : (right - f) / (right - mid);
    }
  }
  return fb;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

constexpr char kFeatMagic[8] = {'T', 'O', 'L', 'D', 'F', 'E', 'A', 'T'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("feature container: truncated file");
  return v;
}

}  // namespace

FeatureSequence compute_logmel(const AudioSignal& signal,
                               const FeatureConfig& cfg) {
  cfg.validate();
  if (signal.sample_rate <= 0)
    throw InvalidInput("compute_logmel: sample_rate must be positive");
  for (double s : signal.samples)
    if (!std::isfinite(s))
      throw InvalidInput("compute_logmel: non-finite sample");

  int window = static_cast<int>(std::lround(cfg.window_len * signal.sample_rate));
  int hop = static_cast<int>(std::lround(cfg.hop_len * signal.sample_rate));
  require(window >= 1 && hop >= 1, "compute_logmel: window too short");
  int64_t len = static_cast<int64_t>(signal.samples.size());
  if (len < window)
    throw InvalidInput("compute_logmel: signal shorter than one window");
  int64_t t_len = (len - window) / hop + 1;

  int nfft = next_pow2(window);
  Mat fb = build_mel_filterbank(cfg.n_mels, nfft, signal.sample_rate);

  std::vector<double> hamming(window);
  for (int i = 0; i < window; ++i)
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (window - 1));

  Eigen::FFT<double> fft;
  std::vector<double> buf(nfft, 0.0);
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd power(nfft / 2 + 1);

  FeatureSequence out;
  out.frames.resize(t_len, cfg.n_mels);
  out.origin_id = signal.id;
  for (int64_t t = 0; t < t_len; ++t) {
    const double* src = signal.samples.data() + t * hop;
    for (int i = 0; i < window; ++i) buf[i] = src[i] * hamming[i];
    std::fill(buf.begin() + window, buf.end(), 0.0);
    fft.fwd(spec, buf);
    for (int k = 0; k <= nfft / 2; ++k) power[k] = std::norm(spec[k]);
    Eigen::VectorXd mel = fb * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      out.frames(t, m) = std::log(std::max(mel[m], kMelLogFloor));
  }
  out.frame_period = cfg.hop_len;
  if (cfg.stack_context > 0 || cfg.subsample > 1)
    out = stack_and_subsample(out, cfg.stack_context, cfg.subsample);
  return out;
}

FeatureSequence stack_and_subsample(const FeatureSequence& features,
                                    int context, int factor) {
  require(context >= 0 && factor >= 1, "stack_and_subsample: bad arguments");
  int t_in = features.num_frames();
  int f_in = features.dim();
  require(t_in >= 1, "stack_and_subsample: empty input");
  int t_out = (t_in + factor - 1) / factor;
  int width = 2 * context + 1;
  FeatureSequence out;
  out.frames.resize(t_out, f_in * width);
  out.frame_period = features.frame_period * factor;
  out.origin_id = features.origin_id;
  for (int t = 0; t < t_out; ++t) {
    int center = t * factor;
    for (int c = -context; c <= context; ++c) {
      int src = std::clamp(center + c, 0, t_in - 1);
      out.frames.block(t, (c + context) * f_in, 1, f_in) =
          features.frames.block(src, 0, 1, f_in);
    }
  }
  return out;
}

AudioSignal read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char riff[4], wave[4];
  is.read(riff, 4);
  uint32_t riff_size = read_pod<uint32_t>(is);
  (void)riff_size;
  is.read(wave, 4);
  if (!is || std::memcmp(riff, "RIFF", 4) != 0 ||
      std::memcmp(wave, "WAVE", 4) != 0)
    throw InvalidInput("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  AudioSignal out;
  for (;;) {
    char id[4];
    is.read(id, 4);
    if (!is) break;
    uint32_t size = read_pod<uint32_t>(is);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_pod<uint16_t>(is);
      channels = read_pod<uint16_t>(is);
      rate = read_pod<uint32_t>(is);
      read_pod<uint32_t>(is);  // byte rate
      read_pod<uint16_t>(is);  // block align
      bits = read_pod<uint16_t>(is);
      if (size > 16) is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw InvalidInput("wav: data chunk before fmt");
      if (format != 1 || bits != 16)
        throw InvalidInput("wav: only 16-bit PCM is supported");
      if (channels != 1) throw InvalidInput("wav: only mono is supported");
      if (rate != 8000 && rate != 16000)
        throw InvalidInput("wav: sample rate must be 8 or 16 kHz");
      size_t n = size / 2;
      std::vector<int16_t> raw(n);
      is.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(size));
      if (!is) throw IoError("wav: truncated data chunk");
      out.samples.resize(n);
      for (size_t i = 0; i < n; ++i) out.samples[i] = raw[i] / 32768.0;
      out.sample_rate = static_cast<int>(rate);
      out.id = path;
      return out;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw InvalidInput("wav: no data chunk found: " + path);
}

void write_wav(const std::string& path, const AudioSignal& signal) {
  require(signal.sample_rate == 8000 || signal.sample_rate == 16000,
          "write_wav: sample rate must be 8 or 16 kHz");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  uint32_t n = static_cast<uint32_t>(signal.samples.size());
  uint32_t data_size = n * 2;
  os.write("RIFF", 4);
  write_pod<uint32_t>(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_pod<uint32_t>(os, 16);
  write_pod<uint16_t>(os, 1);  // PCM
  write_pod<uint16_t>(os, 1);  // mono
  write_pod<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate));
  write_pod<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate * 2));
  write_pod<uint16_t>(os, 2);
  write_pod<uint16_t>(os, 16);
  os.write("data", 4);
  write_pod<uint32_t>(os, data_size);
  for (double s : signal.samples) {
    double clamped = std::clamp(s, -1.0, 1.0);
    auto v = static_cast<int16_t>(std::lround(clamped * 32767.0));
    write_pod<int16_t>(os, v);
  }
  if (!os) throw IoError("write failed: " + path);
}

void write_features(const std::string& path, const FeatureSequence& fs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kFeatMagic, sizeof(kFeatMagic));
  write_pod<uint32_t>(os, 1);  // version
  write_pod<uint32_t>(os, static_cast<uint32_t>(fs.num_frames()));
  write_pod<uint32_t>(os, static_cast<uint32_t>(fs.dim()));
  write_pod<double>(os, fs.frame_period);
  write_pod<uint32_t>(os, static_cast<uint32_t>(fs.origin_id.size()));
  os.write(fs.origin_id.data(),
           static_cast<std::streamsize>(fs.origin_id.size()));
  for (int t = 0; t < fs.num_frames(); ++t)
    for (int f = 0; f < fs.dim(); ++f)
      write_pod<float>(os, static_cast<float>(fs.frames(t, f)));
  if (!os) throw IoError("write failed: " + path);
}

FeatureSequence read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kFeatMagic, sizeof(magic)) != 0)
    throw IoError("not a feature container: " + path);
  uint32_t version = read_pod<uint32_t>(is);
  if (version != 1) throw IoError("unsupported feature container version");
  uint32_t t_len = read_pod<uint32_t>(is);
  uint32_t dim = read_pod<uint32_t>(is);
  FeatureSequence fs;
  fs.frame_period = read_pod<double>(is);
  uint32_t id_len = read_pod<uint32_t>(is);
  fs.origin_id.resize(id_len);
  is.read(fs.origin_id.data(), id_len);
  fs.frames.resize(t_len, dim);
  for (uint32_t t = 0; t < t_len; ++t)
    for (uint32_t f = 0; f < dim; ++f) fs.frames(t, f) = read_pod<float>(is);
  if (!is) throw IoError("feature container: truncated payload");
  return fs;
}

std::string features_to_text(const FeatureSequence& fs) {
  std::ostringstream os;
  os.precision(9);
  os << fs.num_frames() << " " << fs.dim() << " " << fs.frame_period << " "
     << (fs.origin_id.empty() ? "-" : fs.origin_id) << "\n";
  for (int t = 0; t < fs.num_frames(); ++t) {
    for (int f = 0; f < fs.dim(); ++f) {
      if (f) os << " ";
      os << fs.frames(t, f);
    }
    os << "\n";
  }
  return os.str();
}

FeatureSequence features_from_text(const std::string& text) {
  std::istringstream is(text);
  int t_len, dim;
  double period;
  std::string id;
  if (!(is >> t_len >> dim >> period >> id))
    throw ParseError("feature text: bad header");
  FeatureSequence fs;
  fs.frame_period = period;
  fs.origin_id = (id == "-") ? "" : id;
  fs.frames.resize(t_len, dim);
  for (int t = 0; t < t_len; ++t)
    for (int f = 0; f < dim; ++f)
      if (!(is >> fs.frames(t, f)))
        throw ParseError("feature text: truncated at frame " +
                         std::to_string(t));
  return fs;
}

}  // namespace told

#include "lstmviz/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"

namespace lstmviz {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<Scalar> parse_list(const std::string& value) {
  std::vector<Scalar> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(trim(item)));
    } catch (const std::exception&) {
      throw FormatError(FormatError::Kind::syntax, "bad number in header list: " + item);
    }
  }
  return out;
}

int sign_extend_12(int v) { return v >= 2048 ? v - 4096 : v; }

}  // namespace

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (images.size() < 16) throw FormatError(FormatError::Kind::truncated, "IDX image header truncated");
  if (labels.size() < 8) throw FormatError(FormatError::Kind::truncated, "IDX label header truncated");
  if (read_be32(images, 0) != kIdxImageMagic) {
    throw FormatError(FormatError::Kind::bad_magic, "IDX image file has wrong magic number");
  }
  if (read_be32(labels, 0) != kIdxLabelMagic) {
    throw FormatError(FormatError::Kind::bad_magic, "IDX label file has wrong magic number");
  }
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (count != label_count) {
    throw FormatError(FormatError::Kind::count_mismatch,
                      "IDX image count " + std::to_string(count) + " != label count " +
                          std::to_string(label_count));
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + count * pixels) {
    throw FormatError(FormatError::Kind::truncated, "IDX image payload truncated");
  }
  if (labels.size() < 8 + count) {
    throw FormatError(FormatError::Kind::truncated, "IDX label payload truncated");
  }

  Dataset out(count);
  for (std::size_t n = 0; n < count; ++n) {
    auto& seq = out[n];
    seq.values.resize(static_cast<Eigen::Index>(pixels), 1);
    const std::uint8_t* px = images.data() + 16 + n * pixels;
    for (std::size_t i = 0; i < pixels; ++i) {
      seq.values(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(px[i]) / 255.0;
    }
    seq.label = labels[8 + n];
  }
  return out;
}

Bytes encode_idx_images(const std::vector<Bytes>& images, std::uint32_t rows, std::uint32_t cols) {
  Bytes out;
  out.reserve(16 + images.size() * rows * cols);
  append_be32(out, kIdxImageMagic);
  append_be32(out, static_cast<std::uint32_t>(images.size()));
  append_be32(out, rows);
  append_be32(out, cols);
  for (const auto& img : images) {
    if (img.size() != std::size_t{rows} * cols) {
      throw std::invalid_argument("encode_idx_images: image size does not match rows*cols");
    }
    out.insert(out.end(), img.begin(), img.end());
  }
  return out;
}

Bytes encode_idx_labels(const std::vector<std::uint8_t>& labels) {
  Bytes out;
  append_be32(out, kIdxLabelMagic);
  append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<Scalar> RawRecord::physical(std::size_t channel) const {
  if (channel >= channels.size()) throw std::out_of_range("RawRecord: channel out of range");
  const Scalar g = channel < gain.size() && gain[channel] != 0.0 ? gain[channel] : 200.0;
  const Scalar base = channel < baseline.size() ? baseline[channel] : 0.0;
  std::vector<Scalar> out(channels[channel].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (static_cast<Scalar>(channels[channel][i]) - base) / g;
  }
  return out;
}

RawRecord read_212(std::span<const std::uint8_t> bytes, int channels, std::size_t sample_count) {
  if (channels < 1) throw std::invalid_argument("read_212: channel count must be >= 1");
  const std::size_t total = sample_count * static_cast<std::size_t>(channels);
  const std::size_t needed = (total / 2) * 3 + (total % 2 ? 2 : 0);
  if (bytes.size() < needed) {
    throw FormatError(FormatError::Kind::truncated,
                      "format 212 payload truncated: need " + std::to_string(needed) +
                          " bytes, have " + std::to_string(bytes.size()));
  }

  RawRecord rec;
  rec.channels.assign(static_cast<std::size_t>(channels), std::vector<int>(sample_count));
  for (std::size_t k = 0; k < total; ++k) {
    int value;
    const std::size_t group = (k / 2) * 3;
    if (k % 2 == 0) {
      value = bytes[group] + ((bytes[group + 1] & 0x0F) << 8);
    } else {
      value = bytes[group + 2] + ((bytes[group + 1] & 0xF0) << 4);
    }
    rec.channels[k % static_cast<std::size_t>(channels)][k / static_cast<std::size_t>(channels)] =
        sign_extend_12(value);
  }
  return rec;
}

Bytes encode_212(std::span<const int> interleaved) {
  Bytes out;
  out.reserve((interleaved.size() + 1) / 2 * 3);
  for (std::size_t k = 0; k < interleaved.size(); k += 2) {
    const int a = interleaved[k];
    if (a < -2048 || a > 2047) throw std::out_of_range("encode_212: sample outside 12-bit range");
    const unsigned ua = static_cast<unsigned>(a) & 0xFFFu;
    if (k + 1 < interleaved.size()) {
      const int b = interleaved[k + 1];
      if (b < -2048 || b > 2047) throw std::out_of_range("encode_212: sample outside 12-bit range");
      const unsigned ub = static_cast<unsigned>(b) & 0xFFFu;
      out.push_back(static_cast<std::uint8_t>(ua & 0xFF));
      out.push_back(static_cast<std::uint8_t>(((ua >> 8) & 0x0F) | ((ub >> 4) & 0xF0)));
      out.push_back(static_cast<std::uint8_t>(ub & 0xFF));
    } else {
      out.push_back(static_cast<std::uint8_t>(ua & 0xFF));
      out.push_back(static_cast<std::uint8_t>((ua >> 8) & 0x0F));
    }
  }
  return out;
}

RecordHeader parse_record_header(const std::string& text) {
  RecordHeader h;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(FormatError::Kind::syntax, "header line without '=': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "fs") {
        h.fs = std::stod(value);
      } else if (key == "samples") {
        h.samples = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "channels") {
        h.channels = std::stoi(value);
      } else if (key == "gain") {
        h.gain = parse_list(value);
      } else if (key == "baseline") {
        h.baseline = parse_list(value);
      }
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError(FormatError::Kind::syntax, "bad value for header key " + key);
    }
  }
  if (h.fs <= 0.0 || h.channels < 1) {
    throw FormatError(FormatError::Kind::syntax, "header needs fs > 0 and channels >= 1");
  }
  return h;
}

std::vector<BeatAnnotation> parse_annotations(const std::string& text) {
  std::vector<BeatAnnotation> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long index = -1;
    std::string symbol;
    if (!(fields >> index >> symbol) || index < 0 || symbol.size() != 1) {
      throw FormatError(FormatError::Kind::syntax,
                        "annotation line " + std::to_string(line_no) + " malformed: " + line);
    }
    BeatAnnotation a{static_cast<std::size_t>(index), symbol[0]};
    if (!out.empty() && a.sample <= out.back().sample) {
      throw FormatError(FormatError::Kind::syntax,
                        "annotation indices must increase (line " + std::to_string(line_no) + ")");
    }
    out.push_back(a);
  }
  return out;
}

Vector design_fir(const FIRSpec& spec, Scalar fs) {
  if (spec.taps < 1 || spec.taps % 2 == 0) {
    throw std::invalid_argument("design_fir: tap count must be odd, got " +
                                std::to_string(spec.taps));
  }
  if (!(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz && spec.high_hz < fs / 2.0)) {
    throw std::invalid_argument("design_fir: need 0 < low < high < fs/2");
  }
  using std::numbers::pi;
  const int n = spec.taps;
  const Scalar centre = 0.5 * (n - 1);
  const Scalar lo = spec.low_hz / fs;   // cycles per sample
  const Scalar hi = spec.high_hz / fs;
  auto lowpass = [](Scalar cutoff, Scalar m) {
    return m == 0.0 ? 2.0 * cutoff : std::sin(2.0 * pi * cutoff * m) / (pi * m);
  };

  Vector c(n);
  for (int i = 0; i < n; ++i) {
    const Scalar m = i - centre;
    const Scalar window = 0.54 - 0.46 * std::cos(2.0 * pi * i / (n - 1));
    c[i] = (lowpass(hi, m) - lowpass(lo, m)) * window;
  }
  // Symmetrize exactly, then normalize to unit gain at the band centre.
  for (int i = 0; i < n / 2; ++i) {
    const Scalar avg = 0.5 * (c[i] + c[n - 1 - i]);
    c[i] = c[n - 1 - i] = avg;
  }
  c /= fir_magnitude(c, 0.5 * (spec.low_hz + spec.high_hz), fs);
  return c;
}

Scalar fir_magnitude(const Vector& coeffs, Scalar freq_hz, Scalar fs) {
  const Scalar w = 2.0 * std::numbers::pi * freq_hz / fs;
  Scalar re = 0.0;
  Scalar im = 0.0;
  for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
    re += coeffs[k] * std::cos(w * static_cast<Scalar>(k));
    im -= coeffs[k] * std::sin(w * static_cast<Scalar>(k));
  }
  return std::hypot(re, im);
}

std::vector<Scalar> filter_signal(std::span<const Scalar> signal, const Vector& coeffs) {
  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  const auto taps = static_cast<std::ptrdiff_t>(coeffs.size());
  const std::ptrdiff_t delay = (taps - 1) / 2;
  std::vector<Scalar> out(signal.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    Scalar acc = 0.0;
    for (std::ptrdiff_t k = 0; k < taps; ++k) {
      const std::ptrdiff_t j = i + delay - k;
      if (j >= 0 && j < n) acc += coeffs[k] * signal[static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

std::vector<std::size_t> detect_qrs(std::span<const Scalar> signal, Scalar fs) {
  const std::size_t n = signal.size();
  std::vector<std::size_t> detections;
  if (n < 3) return detections;

  const auto samples = [fs](Scalar seconds) {
    return std::max<std::ptrdiff_t>(1, std::lround(seconds * fs));
  };
  const std::ptrdiff_t ma_half = samples(0.08) / 2;
  const std::ptrdiff_t refractory = samples(0.2);
  const std::ptrdiff_t search = samples(0.1);
  const auto len = static_cast<std::ptrdiff_t>(n);

  std::vector<Scalar> deriv(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) deriv[i] = std::abs(signal[i] - signal[i - 1]);

  std::vector<Scalar> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + deriv[i];
  std::vector<Scalar> ma(n);
  for (std::ptrdiff_t i = 0; i < len; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - ma_half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len - 1, i + ma_half);
    ma[static_cast<std::size_t>(i)] =
        (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) /
        static_cast<Scalar>(hi - lo + 1);
  }

  // Candidate peaks: first sample of a local maximum that dominates +-100 ms.
  std::vector<std::size_t> candidates;
  for (std::ptrdiff_t i = 1; i < len; ++i) {
    const Scalar v = ma[static_cast<std::size_t>(i)];
    if (!(v > 0.0) || !(v > ma[static_cast<std::size_t>(i - 1)])) continue;
    // Earlier samples must be strictly lower, later ones not higher.
    bool dominant = true;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - search);
         j <= std::min<std::ptrdiff_t>(len - 1, i + search) && dominant; ++j) {
      const Scalar other = ma[static_cast<std::size_t>(j)];
      if ((j < i && other >= v) || (j > i && other > v)) dominant = false;
    }
    if (dominant) candidates.push_back(static_cast<std::size_t>(i));
  }
  if (candidates.empty()) return detections;

  // Running QRS/noise peak levels over the last 8 peaks of each kind.
  const std::size_t init_end = std::min<std::size_t>(n, static_cast<std::size_t>(samples(2.0)));
  Scalar initial = 0.0;
  for (std::size_t c : candidates) {
    if (c < init_end) initial = std::max(initial, ma[c]);
  }
  if (initial == 0.0) initial = ma[candidates.front()];
  std::deque<Scalar> qrs_peaks{initial};
  std::deque<Scalar> noise_peaks{0.0};
  auto mean = [](const std::deque<Scalar>& d) {
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<Scalar>(d.size());
  };
  auto push = [](std::deque<Scalar>& d, Scalar v) {
    d.push_back(v);
    if (d.size() > 8) d.pop_front();
  };

  std::vector<std::size_t> peaks;
  for (std::size_t c : candidates) {
    const Scalar qpk = mean(qrs_peaks);
    const Scalar npk = mean(noise_peaks);
    const Scalar threshold = npk + 0.3125 * (qpk - npk);
    if (ma[c] > threshold) {
      if (!peaks.empty() && static_cast<std::ptrdiff_t>(c - peaks.back()) < refractory) continue;
      peaks.push_back(c);
      push(qrs_peaks, ma[c]);
    } else {
      push(noise_peaks, ma[c]);
    }
  }

  for (std::size_t p : peaks) {
    const auto centre = static_cast<std::ptrdiff_t>(p);
    std::ptrdiff_t best = centre;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, centre - search);
         j <= std::min<std::ptrdiff_t>(len - 1, centre + search); ++j) {
      if (std::abs(signal[static_cast<std::size_t>(j)]) >
          std::abs(signal[static_cast<std::size_t>(best)])) {
        best = j;
      }
    }
    const auto refined = static_cast<std::size_t>(best);
    if (detections.empty() ||
        static_cast<std::ptrdiff_t>(refined) - static_cast<std::ptrdiff_t>(detections.back()) >=
            refractory) {
      detections.push_back(refined);
    }
  }
  return detections;
}

std::optional<int> beat_class(char symbol) {
  switch (symbol) {
    case 'N': return 0;
    case 'R': return 1;
    case '/': return 2;
    case 'V': return 3;
    default: return std::nullopt;
  }
}

Dataset segment_beats(std::span<const Scalar> signal, std::span<const std::size_t> rpeaks,
                      Scalar fs, std::span<const BeatAnnotation> annotations,
                      const std::string& patient_id) {
  const auto before = static_cast<std::ptrdiff_t>(std::lround(0.2 * fs));
  const auto after = static_cast<std::ptrdiff_t>(std::lround(0.4 * fs));
  const auto tolerance = static_cast<std::ptrdiff_t>(std::lround(0.05 * fs));
  const auto n = static_cast<std::ptrdiff_t>(signal.size());

  Dataset out;
  for (std::size_t r : rpeaks) {
    const auto peak = static_cast<std::ptrdiff_t>(r);
    if (peak - before < 0 || peak + after > n) continue;

    // Nearest annotation by sample distance (annotations are sorted).
    auto it = std::lower_bound(annotations.begin(), annotations.end(), r,
                               [](const BeatAnnotation& a, std::size_t s) { return a.sample < s; });
    const BeatAnnotation* nearest = nullptr;
    std::ptrdiff_t best = tolerance + 1;
    for (auto cand : {it, it == annotations.begin() ? annotations.end() : std::prev(it)}) {
      if (cand == annotations.end()) continue;
      const std::ptrdiff_t dist = std::abs(static_cast<std::ptrdiff_t>(cand->sample) - peak);
      if (dist < best) {
        best = dist;
        nearest = &*cand;
      }
    }
    if (!nearest) continue;
    const auto label = beat_class(nearest->symbol);
    if (!label) continue;

    Vector beat(before + after);
    for (std::ptrdiff_t i = 0; i < before + after; ++i) {
      beat[i] = signal[static_cast<std::size_t>(peak - before + i)];
    }
    const Scalar mu = beat.mean();
    const Scalar sd = std::sqrt((beat.array() - mu).square().mean());
    if (!(sd > 0.0)) continue;

    LabeledSequence seq;
    seq.values = ((beat.array() - mu) / sd).matrix();
    seq.label = *label;
    seq.patient_id = patient_id;
    out.push_back(std::move(seq));
  }
  return out;
}

Dataset extract_beats(const RawRecord& record, std::span<const BeatAnnotation> annotations,
                      std::size_t channel, const FIRSpec& fir) {
  const std::vector<Scalar> raw = record.physical(channel);
  const Vector coeffs = design_fir(fir, record.fs);
  const std::vector<Scalar> filtered = filter_signal(raw, coeffs);
  const std::vector<std::size_t> peaks = detect_qrs(filtered, record.fs);
  return segment_beats(filtered, peaks, record.fs, annotations, record.patient_id);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  out.write("SEQDS1", 6);
  detail::write_le<std::uint64_t>(out, data.size());
  for (const auto& seq : data) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.values.rows()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.values.cols()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.label));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq.patient_id.size()));
    out.write(seq.patient_id.data(), static_cast<std::streamsize>(seq.patient_id.size()));
    for (Eigen::Index t = 0; t < seq.values.rows(); ++t)
      for (Eigen::Index j = 0; j < seq.values.cols(); ++j)
        detail::write_le<double>(out, seq.values(t, j));
  }
  if (!out) throw std::runtime_error("write_dataset: write failed");
}

void write_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  write_dataset(out, data);
}

Dataset read_dataset(std::istream& in) {
  detail::expect_magic(in, "SEQDS1");
  const auto count = detail::read_le<std::uint64_t>(in, "count");
  Dataset out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t n = 0; n < count; ++n) {
    LabeledSequence seq;
    const auto T = detail::read_le<std::uint32_t>(in, "length");
    const auto d = detail::read_le<std::uint32_t>(in, "dimension");
    seq.label = static_cast<int>(detail::read_le<std::uint32_t>(in, "label"));
    const auto id_len = detail::read_le<std::uint32_t>(in, "patient id length");
    seq.patient_id.resize(id_len);
    if (id_len > 0 && !in.read(seq.patient_id.data(), id_len)) {
      throw FormatError(FormatError::Kind::truncated,
                        "truncated container while reading patient id");
    }
    seq.values.resize(T, d);
    for (Eigen::Index t = 0; t < seq.values.rows(); ++t)
      for (Eigen::Index j = 0; j < seq.values.cols(); ++j)
        seq.values(t, j) = detail::read_le<double>(in, "values");
    out.push_back(std::move(seq));
  }
  return out;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return read_dataset(in);
}

}  // namespace lstmviz

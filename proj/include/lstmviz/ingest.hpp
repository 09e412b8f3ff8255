#ifndef LSTMVIZ_INGEST_HPP
#define LSTMVIZ_INGEST_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmviz/format_error.hpp"
#include "lstmviz/numerics.hpp"
#include "lstmviz/sequence.hpp"

namespace lstmviz {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// MNIST IDX

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Decodes an IDX image/label pair into scanline sequences (rows*cols x 1),
/// pixels scaled to [0,1].
Dataset read_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

/// Encodes images (each rows*cols bytes) in the IDX3 layout.
Bytes encode_idx_images(const std::vector<Bytes>& images, std::uint32_t rows, std::uint32_t cols);
Bytes encode_idx_labels(const std::vector<std::uint8_t>& labels);

// ---------------------------------------------------------------------------
// MIT-BIH signals

struct RawRecord {
  std::vector<std::vector<int>> channels;
  Scalar fs = 360.0;
  std::vector<Scalar> gain;
  std::vector<Scalar> baseline;
  std::string patient_id;

  /// (adc - baseline) / gain for one channel.
  std::vector<Scalar> physical(std::size_t channel) const;
};

/// Decodes format-212 bytes: each 3-byte group holds two 12-bit two's-complement
/// samples; samples are interleaved across channels.
RawRecord read_212(std::span<const std::uint8_t> bytes, int channels, std::size_t sample_count);

/// Inverse of read_212 for interleaved samples in [-2048, 2047].
Bytes encode_212(std::span<const int> interleaved);

/// Header sidecar, one `key=value` per line ('#' starts a comment):
///   fs=360
///   samples=650000
///   channels=2
///   gain=200,200
///   baseline=1024,1024
struct RecordHeader {
  Scalar fs = 360.0;
  std::size_t samples = 0;
  int channels = 2;
  std::vector<Scalar> gain;
  std::vector<Scalar> baseline;
};
RecordHeader parse_record_header(const std::string& text);

struct BeatAnnotation {
  std::size_t sample = 0;
  char symbol = 'N';
};

/// Annotation text: one `sample_index symbol` pair per line, indices strictly
/// increasing; blank lines and '#' comments are ignored.
std::vector<BeatAnnotation> parse_annotations(const std::string& text);

struct FIRSpec {
  Scalar low_hz = 3.0;
  Scalar high_hz = 45.0;
  int taps = 301;
};

/// Hamming-windowed sinc bandpass, normalized to unit gain at the passband
/// centre. Throws std::invalid_argument for an even tap count or bad edges.
Vector design_fir(const FIRSpec& spec, Scalar fs);

/// |H(f)| of an FIR filter.
Scalar fir_magnitude(const Vector& coeffs, Scalar freq_hz, Scalar fs);

/// Zero-padded convolution shifted by the (taps-1)/2 group delay; the output
/// has the input's length and stays aligned with it.
std::vector<Scalar> filter_signal(std::span<const Scalar> signal, const Vector& coeffs);

/// R-peak sample indices: derivative, absolute value, 80 ms moving average,
/// adaptive peak threshold, 200 ms refractory period, then refinement to the
/// largest |signal| within +-100 ms.
std::vector<std::size_t> detect_qrs(std::span<const Scalar> signal, Scalar fs);

/// normal 0, RBBB 1, paced 2, PVC 3; other symbols have no class.
std::optional<int> beat_class(char symbol);

/// Cuts 0.2 s before to 0.4 s after each R-peak, labels each beat from the
/// nearest annotation within 50 ms, and z-scores it. Beats that overrun the
/// record, lack a mapped annotation, or are constant are dropped.
Dataset segment_beats(std::span<const Scalar> signal, std::span<const std::size_t> rpeaks,
                      Scalar fs, std::span<const BeatAnnotation> annotations,
                      const std::string& patient_id = {});

/// Full heartbeat pipeline for one record: physical units, bandpass, QRS
/// detection, segmentation.
Dataset extract_beats(const RawRecord& record, std::span<const BeatAnnotation> annotations,
                      std::size_t channel = 0, const FIRSpec& fir = {});

// ---------------------------------------------------------------------------
// SEQDS1 dataset container, little-endian:
//   "SEQDS1" | u64 count | per sequence: u32 T | u32 d_in | u32 label
//   | u32 patient_id length | patient_id bytes | T*d_in f64 (row-major)

void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::string& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

}  // namespace lstmviz

#endif  // LSTMVIZ_INGEST_HPP

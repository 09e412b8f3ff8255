#ifndef LSTMVIZ_SYNTHETIC_HPP
#define LSTMVIZ_SYNTHETIC_HPP

#include <cstdint>

#include "lstmviz/sequence.hpp"

namespace lstmviz {

/// Two-class testbed: Gaussian noise everywhere; class 1 sequences also carry
/// a short triangular spike lying entirely inside [window_begin, window_end].
/// Only the window distinguishes the classes.
struct SpikeSpec {
  int length = 64;
  int window_begin = 40;  // inclusive, 0-based
  int window_end = 48;    // inclusive
  Scalar amplitude = 1.0;
  int half_width = 1;     // spike covers centre +- half_width
  Scalar noise = 0.1;
};

/// `count` sequences, classes alternating 0/1, deterministic in `seed`.
Dataset make_spike_dataset(std::size_t count, std::uint64_t seed, const SpikeSpec& spec = {});

/// Centre index of the spike in a class-1 sequence generated with `spec`
/// (position of the largest value inside the window).
Eigen::Index spike_centre(const LabeledSequence& seq, const SpikeSpec& spec = {});

}  // namespace lstmviz

#endif  // LSTMVIZ_SYNTHETIC_HPP

#include "lstmviz/synthetic.hpp"

#include <random>
#include <stdexcept>

namespace lstmviz {

Dataset make_spike_dataset(std::size_t count, std::uint64_t seed, const SpikeSpec& spec) {
  if (spec.window_begin + spec.half_width > spec.window_end - spec.half_width ||
      spec.window_begin < 0 || spec.window_end >= spec.length) {
    throw std::invalid_argument("make_spike_dataset: spike does not fit inside the window");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> noise(0.0, spec.noise);
  std::uniform_int_distribution<int> centre(spec.window_begin + spec.half_width,
                                            spec.window_end - spec.half_width);
  Dataset out(count);
  for (std::size_t n = 0; n < count; ++n) {
    auto& seq = out[n];
    seq.label = static_cast<int>(n % 2);
    seq.values.resize(spec.length, 1);
    for (int t = 0; t < spec.length; ++t) seq.values(t, 0) = noise(rng);
    if (seq.label == 1) {
      const int c = centre(rng);
      for (int o = -spec.half_width; o <= spec.half_width; ++o) {
        const Scalar shape = 1.0 - static_cast<Scalar>(std::abs(o)) / (spec.half_width + 1);
        seq.values(c + o, 0) += spec.amplitude * shape;
      }
    }
  }
  return out;
}

Eigen::Index spike_centre(const LabeledSequence& seq, const SpikeSpec& spec) {
  Eigen::Index best = spec.window_begin;
  for (Eigen::Index t = spec.window_begin; t <= spec.window_end; ++t) {
    if (seq.values(t, 0) > seq.values(best, 0)) best = t;
  }
  return best;
}

}  // namespace lstmviz

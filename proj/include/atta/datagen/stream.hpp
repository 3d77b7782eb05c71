#pragma once

// Online stream assembly.
//
// Timeline of an N-sample stream with target fault F:
//   [0, N/4)      healthy
//   [N/4, N/2)    F
//   [N/2, 3N/4)   healthy
//   [3N/4, N)     F
// Operating-condition segments (steady → transitional → steady) are laid end
// to end along the same timeline; at stream position j inside a segment the
// j-th window of the scheduled class's pool for that segment is used, so the
// ramp progresses with stream time whichever class is on.

#include <atomic>
#include <string>
#include <vector>

#include "atta/datagen/window.hpp"

namespace atta {

class HiddenTruth;

/// An ordered batch of unlabeled samples. Adapters only ever see samples();
/// the labels are reachable through HiddenTruth, which the scorer uses.
class StreamBlock {
 public:
  StreamBlock(std::size_t index, Matrix samples, std::vector<int> truth)
      : index_(index), samples_(std::move(samples)), truth_(std::move(truth)) {}

  std::size_t index() const { return index_; }
  const Matrix& samples() const { return samples_; }
  std::size_t size() const { return static_cast<std::size_t>(samples_.rows()); }

 private:
  friend class HiddenTruth;
  std::size_t index_;
  Matrix samples_;
  std::vector<int> truth_;
};

/// Scorer-side access to block labels. Every access is counted so tests can
/// prove adapters never reach for them.
class HiddenTruth {
 public:
  static const std::vector<int>& labels(const StreamBlock& block) {
    counter().fetch_add(1, std::memory_order_relaxed);
    return block.truth_;
  }
  static std::uint64_t access_count() { return counter().load(); }

 private:
  static std::atomic<std::uint64_t>& counter() {
    static std::atomic<std::uint64_t> c{0};
    return c;
  }
};

struct StreamSegment {
  std::string tag;  ///< e.g. "steady-1", "transitional", "steady-2"
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Stream {
  std::vector<StreamBlock> blocks;
  std::vector<StreamSegment> segments;
  std::size_t total = 0;
  int fault_class = -1;

  /// Index into `segments` for each stream position.
  std::vector<int> segment_of_sample() const {
    std::vector<int> out(total, -1);
    for (std::size_t s = 0; s < segments.size(); ++s)
      for (std::size_t i = segments[s].begin; i < segments[s].end; ++i) out[i] = static_cast<int>(s);
    return out;
  }
};

/// Class scheduled at stream position i of n (healthy class is 0).
inline int scheduled_class(std::size_t i, std::size_t n, int fault_class) {
  const std::size_t q1 = n / 4;
  const std::size_t q2 = n / 2;
  const std::size_t q3 = 3 * n / 4;
  const bool faulty = (i >= q1 && i < q2) || i >= q3;
  return faulty ? fault_class : 0;
}

/// One operating-condition segment of the stream: the time-ordered online
/// pool of each class (index = class id) under that condition.
struct SegmentPools {
  std::string tag;
  std::vector<SampleSet> by_class;
};

inline Stream build_stream(const std::vector<SegmentPools>& segments, int fault_class,
                           std::size_t block_size) {
  if (block_size == 0) throw ConfigError("build_stream: block size must be positive");
  if (segments.empty()) throw DataError("build_stream: scenario has no online segments");
  if (fault_class <= 0) throw ConfigError("build_stream: target fault must be a non-healthy class");

  Stream stream;
  stream.fault_class = fault_class;
  std::vector<std::size_t> lengths;
  Eigen::Index dim = -1;
  for (const SegmentPools& seg : segments) {
    if (static_cast<std::size_t>(fault_class) >= seg.by_class.size()) {
      throw DataError("build_stream: segment '" + seg.tag + "' lacks class " +
                      std::to_string(fault_class));
    }
    const SampleSet& h = seg.by_class[0];
    const SampleSet& f = seg.by_class[static_cast<std::size_t>(fault_class)];
    lengths.push_back(std::min(h.size(), f.size()));
    if (!h.empty()) dim = h.x.cols();
  }
  for (std::size_t l : lengths) stream.total += l;
  if (stream.total == 0 || dim < 0) throw DataError("build_stream: scenario data is empty");

  Matrix all(static_cast<Eigen::Index>(stream.total), dim);
  std::vector<int> truth(stream.total);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    stream.segments.push_back({segments[s].tag, pos, pos + lengths[s]});
    for (std::size_t j = 0; j < lengths[s]; ++j, ++pos) {
      const int cls = scheduled_class(pos, stream.total, fault_class);
      const SampleSet& pool = segments[s].by_class[static_cast<std::size_t>(cls)];
      const std::size_t src = j * pool.size() / lengths[s];
      all.row(static_cast<Eigen::Index>(pos)) = pool.x.row(static_cast<Eigen::Index>(src));
      truth[pos] = cls;
    }
  }

  std::size_t t = 1;
  for (std::size_t begin = 0; begin < stream.total; begin += block_size, ++t) {
    const std::size_t end = std::min(stream.total, begin + block_size);
    stream.blocks.emplace_back(
        t, all.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)),
        std::vector<int>(truth.begin() + static_cast<std::ptrdiff_t>(begin),
                         truth.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return stream;
}

}  // namespace atta

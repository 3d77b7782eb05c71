#pragma once

// Sliding-window segmentation and the offline/online split.

#include <cmath>
#include <optional>
#include <vector>

#include "atta/datagen/recording.hpp"

namespace atta {

inline constexpr std::size_t kWindowLength = 1024;
inline constexpr std::size_t kWindowStride = 16;

/// One model input: the six channels of a window concatenated channel-major
/// (ch1 points 1..len, then ch2, ...).
struct WindowedSample {
  Matrix x;  // 1 × (6·len)
  std::optional<int> label;
  std::optional<int> condition;
};

/// Contiguous storage for many windows plus their labels.
struct SampleSet {
  Matrix x;
  std::vector<int> labels;
  std::vector<int> conditions;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  SampleSet slice(std::size_t begin, std::size_t end) const {
    SampleSet out;
    const auto b = static_cast<Eigen::Index>(begin);
    const auto n = static_cast<Eigen::Index>(end - begin);
    out.x = x.middleRows(b, n);
    out.labels.assign(labels.begin() + b, labels.begin() + b + n);
    out.conditions.assign(conditions.begin() + b, conditions.begin() + b + n);
    return out;
  }

  SampleSet subset(const std::vector<std::size_t>& rows) const {
    SampleSet out;
    out.x = gather_rows(x, rows);
    for (std::size_t r : rows) {
      out.labels.push_back(labels[r]);
      out.conditions.push_back(conditions[r]);
    }
    return out;
  }

  void append(const SampleSet& other) {
    if (other.empty()) return;
    if (empty()) {
      *this = other;
      return;
    }
    require_cols(other.x, x.cols(), "SampleSet::append");
    Matrix joined(x.rows() + other.x.rows(), x.cols());
    joined << x, other.x;
    x = std::move(joined);
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    conditions.insert(conditions.end(), other.conditions.begin(), other.conditions.end());
  }

  WindowedSample sample(std::size_t i) const {
    return {x.row(static_cast<Eigen::Index>(i)), labels[i], conditions[i]};
  }
};

inline std::size_t window_count(std::size_t length, std::size_t len = kWindowLength,
                                std::size_t stride = kWindowStride) {
  if (length < len) return 0;
  return (length - len) / stride + 1;
}

/// Windows of a recording as one SampleSet. Each window carries the
/// recording's label and the condition index at the window's first point.
inline SampleSet window_set(const RawRecording& rec, std::size_t len = kWindowLength,
                            std::size_t stride = kWindowStride) {
  if (len == 0 || stride == 0) throw ConfigError("window_set: length and stride must be positive");
  rec.validate(len);
  const std::size_t count = window_count(rec.length(), len, stride);
  const auto l = static_cast<Eigen::Index>(len);
  SampleSet out;
  out.x.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(kChannels * len));
  out.labels.assign(count, rec.fault_label);
  out.conditions.resize(count);
  for (std::size_t w = 0; w < count; ++w) {
    const auto start = static_cast<Eigen::Index>(w * stride);
    auto dst = out.x.row(static_cast<Eigen::Index>(w));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(kChannels); ++c) {
      dst.segment(c * l, l) = rec.channels.row(c).segment(start, l);
    }
    out.conditions[w] = rec.condition_trace.empty() ? 0 : rec.condition_trace[w * stride];
  }
  return out;
}

inline std::vector<WindowedSample> window_segment(const RawRecording& rec,
                                                  std::size_t len = kWindowLength,
                                                  std::size_t stride = kWindowStride) {
  const SampleSet set = window_set(rec, len, stride);
  std::vector<WindowedSample> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out.push_back(set.sample(i));
  return out;
}

/// Number of leading samples of an n-sample group that go offline:
/// floor(fraction·n), but never less than one.
inline std::size_t offline_count(std::size_t n, double fraction = 0.1) {
  if (n == 0) return 0;
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::max<std::size_t>(1, std::min(k, n));
}

struct OfflineOnlineSplit {
  SampleSet offline;                 ///< leading part of every group, concatenated
  std::vector<SampleSet> online;     ///< remainder of each group, same order as input
};

/// Splits each time-ordered (class, condition) group into a leading offline
/// part and an online remainder. The parts never overlap.
inline OfflineOnlineSplit split_offline_online(const std::vector<SampleSet>& groups,
                                               double fraction = 0.1) {
  OfflineOnlineSplit out;
  for (const SampleSet& g : groups) {
    const std::size_t k = offline_count(g.size(), fraction);
    out.offline.append(g.slice(0, k));
    out.online.push_back(g.slice(k, g.size()));
  }
  return out;
}

}  // namespace atta

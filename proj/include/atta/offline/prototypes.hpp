#pragma once

// Static anchor memory and class prototypes in the normalized latent space.

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "atta/datagen/window.hpp"
#include "atta/model/network.hpp"

namespace atta {

/// Per-class anchor samples drawn once from the offline set. Read-only after
/// construction.
class AnchorBank {
 public:
  AnchorBank(std::vector<SampleSet> per_class, std::vector<std::vector<std::size_t>> indices)
      : per_class_(std::move(per_class)), indices_(std::move(indices)) {
    if (per_class_.empty()) throw DataError("AnchorBank: no classes");
    for (std::size_t k = 0; k < per_class_.size(); ++k) {
      if (per_class_[k].empty()) {
        throw DataError("AnchorBank: class " + std::to_string(k) + " has no anchors");
      }
    }
  }

  std::size_t num_classes() const { return per_class_.size(); }
  const SampleSet& anchors(std::size_t k) const { return per_class_.at(k); }
  /// Row indices into the offline set the anchors were taken from.
  const std::vector<std::vector<std::size_t>>& indices() const { return indices_; }

 private:
  std::vector<SampleSet> per_class_;
  std::vector<std::vector<std::size_t>> indices_;
};

/// Splits `cap` across groups as evenly as their sizes allow; leftover
/// capacity from small groups flows to the larger ones.
inline std::vector<std::size_t> stratified_quota(const std::vector<std::size_t>& sizes,
                                                 std::size_t cap) {
  std::vector<std::size_t> quota(sizes.size(), 0);
  std::size_t remaining = cap;
  while (remaining > 0) {
    std::vector<std::size_t> open;
    for (std::size_t g = 0; g < sizes.size(); ++g)
      if (quota[g] < sizes[g]) open.push_back(g);
    if (open.empty()) break;
    const std::size_t share = std::max<std::size_t>(1, remaining / open.size());
    for (std::size_t g : open) {
      const std::size_t take = std::min({share, sizes[g] - quota[g], remaining});
      quota[g] += take;
      remaining -= take;
      if (remaining == 0) break;
    }
  }
  return quota;
}

/// Up to `anchors_per_class` offline samples per class, stratified across
/// conditions and drawn with a seeded shuffle. Indices come back sorted.
inline AnchorBank build_anchor_bank(const SampleSet& d0, std::size_t num_classes,
                                    std::size_t anchors_per_class, std::uint64_t seed) {
  if (anchors_per_class == 0) throw ConfigError("build_anchor_bank: cap must be positive");
  std::vector<std::map<int, std::vector<std::size_t>>> groups(num_classes);
  for (std::size_t i = 0; i < d0.size(); ++i) {
    const int k = d0.labels[i];
    if (k < 0 || static_cast<std::size_t>(k) >= num_classes) {
      throw DataError("build_anchor_bank: label " + std::to_string(k) + " out of range");
    }
    groups[static_cast<std::size_t>(k)][d0.conditions[i]].push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<SampleSet> per_class;
  std::vector<std::vector<std::size_t>> indices;
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (groups[k].empty()) {
      throw DataError("build_anchor_bank: class " + std::to_string(k) + " has no offline samples");
    }
    std::vector<std::size_t> sizes;
    for (const auto& [cond, rows] : groups[k]) sizes.push_back(rows.size());
    const auto quota = stratified_quota(sizes, anchors_per_class);
    std::vector<std::size_t> chosen;
    std::size_t g = 0;
    for (auto& [cond, rows] : groups[k]) {
      std::vector<std::size_t> pool = rows;
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[g++]));
    }
    std::sort(chosen.begin(), chosen.end());
    per_class.push_back(d0.subset(chosen));
    indices.push_back(std::move(chosen));
  }
  return AnchorBank(std::move(per_class), std::move(indices));
}

/// Rebuilds a bank from stored indices into the same offline set.
inline AnchorBank anchor_bank_from_indices(const SampleSet& d0,
                                           const std::vector<std::vector<std::size_t>>& indices) {
  std::vector<SampleSet> per_class;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    for (std::size_t r : indices[k]) {
      if (r >= d0.size()) throw DataError("anchor index " + std::to_string(r) + " out of range");
      if (d0.labels[r] != static_cast<int>(k)) {
        throw DataError("anchor index " + std::to_string(r) + " is not of class " +
                        std::to_string(k));
      }
    }
    per_class.push_back(d0.subset(indices[k]));
  }
  return AnchorBank(std::move(per_class), indices);
}

inline constexpr double kDegeneratePrototypeNorm = 1e-9;

struct PrototypeSet {
  Matrix mu;      ///< K × d, class means of unit latents
  Matrix mu_bar;  ///< K × d, each row of mu scaled to unit length
  std::uint64_t version = 0;

  std::size_t num_classes() const { return static_cast<std::size_t>(mu.rows()); }
};

/// μ_k = mean over class-k anchors of the normalized eval-mode latent.
inline PrototypeSet compute_prototypes(const AnchorBank& bank, const NetworkParams& params,
                                       std::uint64_t version = 0) {
  const auto d = static_cast<Eigen::Index>(params.spec.latent_dim());
  const auto k_count = static_cast<Eigen::Index>(bank.num_classes());
  PrototypeSet out;
  out.mu = Matrix::Zero(k_count, d);
  out.mu_bar = Matrix::Zero(k_count, d);
  out.version = version;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const SampleSet& a = bank.anchors(static_cast<std::size_t>(k));
    const Matrix z = extract_features(a.x, params);
    RowVector sum = RowVector::Zero(d);
    for (Eigen::Index r = 0; r < z.rows(); ++r) sum += normalize_latent(z.row(r)).unit;
    out.mu.row(k) = sum / static_cast<double>(z.rows());
    const double norm = out.mu.row(k).norm();
    if (!(norm >= kDegeneratePrototypeNorm)) {
      throw DegeneratePrototypeError("prototype of class " + std::to_string(k) +
                                         " has near-zero norm",
                                     static_cast<int>(k));
    }
    out.mu_bar.row(k) = out.mu.row(k) / norm;
  }
  return out;
}

}  // namespace atta

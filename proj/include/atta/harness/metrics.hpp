#pragma once

#include <map>
#include <string>
#include <vector>

#include "atta/errors.hpp"

namespace atta {

/// a_t = (Σ_{i≤t} correct_i) / t.
inline std::vector<double> cumulative_accuracy(const std::vector<int>& correct) {
  if (correct.empty()) throw DataError("cumulative_accuracy: empty sequence");
  std::vector<double> out;
  out.reserve(correct.size());
  long long hits = 0;
  for (std::size_t t = 0; t < correct.size(); ++t) {
    hits += correct[t] ? 1 : 0;
    out.push_back(static_cast<double>(hits) / static_cast<double>(t + 1));
  }
  return out;
}

/// Scores of one adapter on one stream.
struct RunMetrics {
  std::string scenario;
  std::string fault;
  std::string adapter;
  std::uint64_t seed = 0;
  std::vector<int> predictions;
  std::vector<int> truth;
  std::vector<int> correct;
  std::vector<double> cumulative;
  std::vector<std::string> segment;  ///< tag of each sample's condition segment

  double final_accuracy() const { return cumulative.empty() ? 0.0 : cumulative.back(); }

  /// Plain accuracy inside each segment tag.
  std::map<std::string, double> segment_accuracy() const {
    std::map<std::string, std::pair<double, double>> acc;
    for (std::size_t i = 0; i < correct.size(); ++i) {
      auto& a = acc[segment[i]];
      a.first += correct[i];
      a.second += 1.0;
    }
    std::map<std::string, double> out;
    for (const auto& [tag, a] : acc) out[tag] = a.first / a.second;
    return out;
  }
};

inline RunMetrics score_run(std::string scenario, std::string fault, std::string adapter,
                            std::uint64_t seed, std::vector<int> predictions,
                            std::vector<int> truth, std::vector<std::string> segment) {
  if (predictions.size() != truth.size() || segment.size() != truth.size()) {
    throw DimensionError("score_run: predictions, labels and segment tags differ in length");
  }
  RunMetrics m{std::move(scenario), std::move(fault), std::move(adapter), seed,
               std::move(predictions), std::move(truth), {}, {}, std::move(segment)};
  m.correct.resize(m.truth.size());
  for (std::size_t i = 0; i < m.truth.size(); ++i) m.correct[i] = m.predictions[i] == m.truth[i];
  m.cumulative = cumulative_accuracy(m.correct);
  return m;
}

}  // namespace atta

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "atta/model/checkpoint.hpp"
#include "atta/offline/artifact.hpp"
#include "fd_oracle.hpp"

namespace atta {
namespace {

using testing::numeric_gradient;
using testing::random_matrix;
using testing::relative_error;

NetworkSpec tiny_spec(std::size_t in = 8, std::size_t k = 3, std::size_t m = 3) {
  NetworkSpec s;
  s.input_dim = in;
  s.extractor_widths = {in, 12, 6};
  s.classifier_hidden = 5;
  s.discriminator_hidden = {7, 7, 4};
  s.discriminator_bn_layer = 2;
  s.num_classes = k;
  s.num_conditions = m;
  return s;
}

// Gaussian blobs: class moves dims [0, k), condition shifts dims [k, k+m).
SampleSet blobs(std::size_t per_group, std::size_t dim, std::size_t k, std::size_t m,
                double class_sep, double cond_shift, double noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  SampleSet s;
  s.x.resize(static_cast<Eigen::Index>(per_group * k * m), static_cast<Eigen::Index>(dim));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t cls = 0; cls < k; ++cls) {
      for (std::size_t i = 0; i < per_group; ++i, ++row) {
        for (std::size_t d = 0; d < dim; ++d) s.x(row, static_cast<Eigen::Index>(d)) = noise * n01(rng);
        s.x(row, static_cast<Eigen::Index>(cls)) += class_sep;
        s.x(row, static_cast<Eigen::Index>(k + c)) += cond_shift;
        s.labels.push_back(static_cast<int>(cls));
        s.conditions.push_back(static_cast<int>(c));
      }
    }
  }
  return s;
}

TEST(LambdaSchedule, WarmupThenConstant) {
  LambdaSchedule s;
  EXPECT_EQ(s.at(0.0), 0.0);
  EXPECT_NEAR(s.at(1.0 / 6.0), 0.5, 1e-12);
  EXPECT_EQ(s.at(1.0 / 3.0), 1.0);
  EXPECT_EQ(s.at(0.9), 1.0);
  s.constant = 0.25;
  EXPECT_EQ(s.at(0.0), 0.25);
  EXPECT_EQ(s.at(1.0), 0.25);
  s.constant = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(OfflineConfig, ValidationAndJson) {
  OfflineConfig c;
  EXPECT_EQ(c.epochs, 30u);
  EXPECT_EQ(c.batch_size, 128u);
  EXPECT_EQ(c.lr, 1e-3);
  EXPECT_EQ(c.anchors_per_class, 128u);
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.epochs = 4;
  c.lambda.constant = 0.5;
  const OfflineConfig back = offline_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(offline_config_from_json({{"epochs", "many"}}), ConfigError);
}

TEST(OfflineGradients, ReversalEqualsTwoSeparatePasses) {
  std::mt19937_64 rng(3);
  for (double lambda : {0.0, 0.3, 1.0, 2.5}) {
    NetworkParams p = init_network(tiny_spec(), 11);
    const Matrix x = random_matrix(8, 8, rng);
    const std::vector<int> y{0, 1, 2, 0, 1, 2, 0, 1};
    const std::vector<int> c{2, 2, 1, 0, 0, 1, 2, 0};
    const OfflineGradients g = offline_gradients(p, x, y, c, lambda, Mode::kBatchStats);

    // class path alone
    MlpTape te;
    MlpTape tc;
    const Matrix z = p.extractor.forward(x, Mode::kBatchStats, te);
    const Matrix py = softmax(p.classifier.forward(z, Mode::kBatchStats, tc));
    Gradients gy = p.classifier.zero_grads();
    const Matrix dz_class = p.classifier.backward(
        softmax_cross_entropy_grad(one_hot(y, 3), py), tc, gy, true);
    Gradients g_class = p.extractor.zero_grads();
    p.extractor.backward(dz_class, te, g_class, false);

    // domain path alone, no reversal
    MlpTape td;
    const Matrix pd = softmax(p.discriminator->forward(z, Mode::kBatchStats, td));
    Gradients gd = p.discriminator->zero_grads();
    const Matrix dz_dom = p.discriminator->backward(
        softmax_cross_entropy_grad(one_hot(c, 3), pd), td, gd, true);
    Gradients g_dom = p.extractor.zero_grads();
    p.extractor.backward(dz_dom, te, g_dom, false);

    // whole extractor gradient as one vector; biases ahead of batch norm are
    // exactly zero and carry only rounding noise on their own
    double diff = 0.0;
    double got = 0.0;
    double want = 0.0;
    for (std::size_t i = 0; i < g.extractor.size(); ++i) {
      const Matrix expected = g_class[i] - lambda * g_dom[i];
      diff += (g.extractor[i] - expected).squaredNorm();
      got += g.extractor[i].squaredNorm();
      want += expected.squaredNorm();
    }
    EXPECT_LT(std::sqrt(diff / std::max(got, want)), 1e-10) << "lambda " << lambda;
    for (std::size_t i = 0; i < gd.size(); ++i) EXPECT_EQ(g.discriminator[i], gd[i]);
    for (std::size_t i = 0; i < gy.size(); ++i) EXPECT_EQ(g.classifier[i], gy[i]);
  }
}

TEST(OfflineGradients, AdversarialLossMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const double lambda = 0.7;
  NetworkParams p = init_network(tiny_spec(), 4);
  const Matrix x = random_matrix(6, 8, rng);
  const std::vector<int> y{0, 1, 2, 2, 1, 0};
  const std::vector<int> c{0, 1, 2, 0, 1, 2};
  const OfflineGradients g = offline_gradients(p, x, y, c, lambda, Mode::kBatchStats);

  auto total = [&] { return offline_gradients(p, x, y, c, lambda, Mode::kBatchStats).loss; };
  auto domain = [&] { return offline_gradients(p, x, y, c, lambda, Mode::kBatchStats).domain_ce; };

  const auto ext = p.extractor.parameters();
  for (std::size_t i = 0; i < ext.size(); ++i)
    EXPECT_LT(relative_error(g.extractor[i], numeric_gradient(*ext[i], total)), 1e-4) << "f" << i;
  const auto cls = p.classifier.parameters();
  for (std::size_t i = 0; i < cls.size(); ++i)
    EXPECT_LT(relative_error(g.classifier[i], numeric_gradient(*cls[i], total)), 1e-4) << "y" << i;
  const auto dis = p.discriminator->parameters();
  for (std::size_t i = 0; i < dis.size(); ++i)
    EXPECT_LT(relative_error(g.discriminator[i], numeric_gradient(*dis[i], domain)), 1e-4) << "d" << i;
}

TEST(StratifiedBatches, EveryBatchSeesEveryCondition) {
  std::vector<int> conds;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 40 + 10 * c; ++i) conds.push_back(c);
  std::mt19937_64 rng(1);
  const auto batches = stratified_batches(conds, 16, rng);
  std::multiset<std::size_t> rows;
  for (const auto& b : batches) {
    std::set<int> seen;
    for (auto r : b) {
      seen.insert(conds[r]);
      rows.insert(r);
    }
    EXPECT_EQ(seen.size(), 3u);
  }
  ASSERT_EQ(rows.size(), conds.size());
  for (std::size_t i = 0; i < conds.size(); ++i) EXPECT_EQ(rows.count(i), 1u);
}

TEST(StratifiedBatches, NoSingletonTail) {
  std::vector<int> conds(33, 0);
  for (int i = 0; i < 16; ++i) conds[static_cast<std::size_t>(i)] = 1;
  std::mt19937_64 rng(2);
  const auto batches = stratified_batches(conds, 16, rng);
  for (const auto& b : batches) EXPECT_GE(b.size(), 2u);
}

TEST(TrainOffline, SeparableToyWithoutAdversary) {
  const SampleSet d = blobs(30, 8, 3, 3, 3.0, 1.0, 0.5, 7);
  OfflineConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.lr = 1e-2;
  cfg.lambda.constant = 0.0;
  cfg.seed = 3;
  const OfflineResult r = train_offline(d, tiny_spec(), cfg);
  EXPECT_GT(class_accuracy(r.deployment, d), 0.95);
  EXPECT_FALSE(r.deployment.discriminator.has_value());
  ASSERT_EQ(r.history.size(), 40u);
  EXPECT_LT(r.history.back().class_ce, r.history.front().class_ce);
}

TEST(TrainOffline, BitIdenticalAcrossRuns) {
  const SampleSet d = blobs(10, 8, 3, 3, 2.0, 1.0, 0.5, 1);
  OfflineConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = 9;
  const auto a = train_offline(d, tiny_spec(), cfg);
  const auto b = train_offline(d, tiny_spec(), cfg);
  EXPECT_EQ(snapshot(a.full()), snapshot(b.full()));
  cfg.seed = 10;
  EXPECT_NE(snapshot(train_offline(d, tiny_spec(), cfg).full()), snapshot(a.full()));
}

TEST(TrainOffline, AdversaryPushesConditionAccuracyTowardChance) {
  // Condition is plainly visible in the input; the class is too.
  const SampleSet train = blobs(60, 8, 3, 3, 3.0, 3.0, 0.6, 21);
  const SampleSet held = blobs(40, 8, 3, 3, 3.0, 3.0, 0.6, 22);
  OfflineConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 64;
  cfg.lr = 5e-3;
  cfg.seed = 2;

  cfg.lambda.constant = 0.0;
  const auto plain = train_offline(train, tiny_spec(), cfg);
  cfg.lambda.constant.reset();
  const auto adv = train_offline(train, tiny_spec(), cfg);

  const double plain_cls = class_accuracy(plain.deployment, held);
  const double adv_cls = class_accuracy(adv.deployment, held);
  const double plain_dom = domain_accuracy(plain.full(), held);
  const double adv_dom = domain_accuracy(adv.full(), held);
  EXPECT_NEAR(adv_dom, 1.0 / 3.0, 0.15) << "without adversary: " << plain_dom;
  EXPECT_GT(adv_cls, plain_cls - 0.05);
}

TEST(TrainOffline, RejectsSingleConditionAndMissingClass) {
  SampleSet d = blobs(5, 8, 3, 3, 2.0, 1.0, 0.5, 1);
  OfflineConfig cfg;
  cfg.epochs = 1;
  SampleSet one = d;
  std::fill(one.conditions.begin(), one.conditions.end(), 0);
  EXPECT_THROW(train_offline(one, tiny_spec(), cfg), ConfigError);
  SampleSet missing = d;
  for (int& l : missing.labels)
    if (l == 2) l = 1;
  EXPECT_THROW(train_offline(missing, tiny_spec(), cfg), DataError);
  EXPECT_THROW(train_offline(d, tiny_spec(8, 3, 1), cfg), ConfigError);
  SampleSet out_of_range = d;
  out_of_range.conditions[0] = 5;
  EXPECT_THROW(train_offline(out_of_range, tiny_spec(), cfg), DataError);
}

TEST(AnchorBank, QuotaSplitting) {
  EXPECT_EQ(stratified_quota({100, 100, 100}, 90), (std::vector<std::size_t>{30, 30, 30}));
  EXPECT_EQ(stratified_quota({10, 100, 100}, 90), (std::vector<std::size_t>{10, 40, 40}));
  EXPECT_EQ(stratified_quota({20, 20, 10}, 128), (std::vector<std::size_t>{20, 20, 10}));
  const auto q = stratified_quota({5, 5, 5}, 4);
  EXPECT_EQ(q[0] + q[1] + q[2], 4u);
}

TEST(AnchorBank, CapsAndStratifies) {
  SampleSet d = blobs(100, 8, 2, 3, 1.0, 1.0, 1.0, 3);
  // class 1 keeps only 50 rows
  std::vector<std::size_t> keep;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.labels[i] == 1 && ones++ >= 50) continue;
    keep.push_back(i);
  }
  d = d.subset(keep);

  const AnchorBank bank = build_anchor_bank(d, 2, 90, 4);
  ASSERT_EQ(bank.anchors(0).size(), 90u);
  std::map<int, int> per_cond;
  for (int c : bank.anchors(0).conditions) ++per_cond[c];
  EXPECT_EQ(per_cond[0], 30);
  EXPECT_EQ(per_cond[1], 30);
  EXPECT_EQ(per_cond[2], 30);

  const AnchorBank all = build_anchor_bank(d, 2, 128, 4);
  EXPECT_EQ(all.anchors(1).size(), 50u);

  const AnchorBank again = build_anchor_bank(d, 2, 90, 4);
  EXPECT_EQ(again.indices(), bank.indices());
  EXPECT_EQ(again.anchors(0).x, bank.anchors(0).x);
  EXPECT_NE(build_anchor_bank(d, 2, 90, 5).indices(), bank.indices());

  const AnchorBank rebuilt = anchor_bank_from_indices(d, bank.indices());
  EXPECT_EQ(rebuilt.anchors(1).x, bank.anchors(1).x);

  EXPECT_THROW(build_anchor_bank(d, 3, 90, 4), DataError);
}

NetworkParams random_deployment(std::uint64_t seed) {
  NetworkParams p = init_network(tiny_spec(), seed).deployment();
  // non-trivial running statistics so eval mode is not the identity
  std::mt19937_64 rng(seed + 100);
  for (auto& l : p.extractor.layers()) {
    l.stats.running_mean = random_matrix(1, l.out_dim(), rng, 0.3);
    l.stats.running_var = random_matrix(1, l.out_dim(), rng, 0.2).array() + 1.0;
    l.beta = random_matrix(1, l.out_dim(), rng, 0.5).array() + 0.5;
  }
  return p;
}

AnchorBank random_bank(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SampleSet> per;
  std::vector<std::vector<std::size_t>> idx;
  std::size_t next = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    SampleSet s;
    s.x = random_matrix(static_cast<Eigen::Index>(sizes[k]), 8, rng, 2.0);
    s.labels.assign(sizes[k], static_cast<int>(k));
    s.conditions.assign(sizes[k], 0);
    per.push_back(s);
    idx.emplace_back();
    for (std::size_t i = 0; i < sizes[k]; ++i) idx.back().push_back(next++);
  }
  return AnchorBank(per, idx);
}

TEST(Prototypes, BruteForceMeanOfUnitLatents) {
  const NetworkParams p = random_deployment(8);
  const AnchorBank bank = random_bank({5, 9, 3}, 12);
  const PrototypeSet ps = compute_prototypes(bank, p, 4);
  EXPECT_EQ(ps.version, 4u);
  for (std::size_t k = 0; k < 3; ++k) {
    const SampleSet& a = bank.anchors(k);
    RowVector sum = RowVector::Zero(6);
    for (Eigen::Index r = 0; r < a.x.rows(); ++r) {
      // one sample at a time through the layers by hand
      RowVector h = a.x.row(r);
      for (const auto& l : p.extractor.layers()) {
        RowVector pre = h * l.weight + l.bias;
        for (Eigen::Index j = 0; j < pre.cols(); ++j) {
          const double bn = (pre(j) - l.stats.running_mean(0, j)) /
                                std::sqrt(l.stats.running_var(0, j) + kBatchNormEps) *
                                l.gamma(0, j) +
                            l.beta(0, j);
          pre(j) = std::max(0.0, bn);
        }
        h = pre;
      }
      sum += h / h.norm();
    }
    const RowVector mu = sum / static_cast<double>(a.x.rows());
    EXPECT_LT((ps.mu.row(static_cast<Eigen::Index>(k)) - mu).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(ps.mu_bar.row(static_cast<Eigen::Index>(k)).norm(), 1.0, 1e-9);
  }
}

TEST(Prototypes, SingleAndDuplicateAnchors) {
  const NetworkParams p = random_deployment(2);
  const AnchorBank single = random_bank({1, 1}, 3);
  const PrototypeSet ps = compute_prototypes(single, p);
  const Matrix z = extract_features(single.anchors(0).x, p);
  EXPECT_LT((ps.mu.row(0) - z.row(0) / z.row(0).norm()).norm(), 1e-15);
  EXPECT_NEAR(ps.mu.row(0).norm(), 1.0, 1e-12);

  SampleSet dup = single.anchors(1);
  dup.append(single.anchors(1));
  const AnchorBank twice({single.anchors(0), dup}, {{0}, {1, 2}});
  const PrototypeSet pd = compute_prototypes(twice, p);
  EXPECT_LT((pd.mu.row(1) - ps.mu.row(1)).norm(), 1e-15);
}

TEST(Prototypes, OrderInvariantAndInsideUnitBall) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NetworkParams p = random_deployment(seed);
    const AnchorBank bank = random_bank({4 + seed % 5, 7, 2}, seed + 50);
    const PrototypeSet ps = compute_prototypes(bank, p);
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_LE(ps.mu.row(k).norm(), 1.0 + 1e-12);

    std::vector<SampleSet> shuffled;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<std::size_t> perm(bank.anchors(k).size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      shuffled.push_back(bank.anchors(k).subset(perm));
    }
    const PrototypeSet pq = compute_prototypes(AnchorBank(shuffled, bank.indices()), p);
    EXPECT_LT((pq.mu - ps.mu).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Prototypes, DegenerateClassIsReported) {
  NetworkParams p = random_deployment(1);
  auto& last = p.extractor.layers().back();
  last.gamma.setZero();
  last.beta.setZero();
  try {
    compute_prototypes(random_bank({2, 2}, 1), p);
    FAIL() << "expected DegeneratePrototypeError";
  } catch (const DegeneratePrototypeError& e) {
    EXPECT_EQ(e.class_id(), 0);
  }
}

TEST(OfflineArtifact, CheckpointRoundTrip) {
  const SampleSet d = blobs(6, 8, 3, 3, 2.0, 1.0, 0.5, 1);
  OfflineConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.anchors_per_class = 4;
  OfflineStage st = run_offline_stage(d, tiny_spec(), cfg);
  OfflineArtifact a{st.training.deployment, st.prototypes, st.bank.indices(), to_json(cfg)};
  const std::string bytes = encode_checkpoint(to_checkpoint(a));
  const OfflineArtifact back = artifact_from_checkpoint(decode_checkpoint(bytes));
  EXPECT_EQ(snapshot(back.params), snapshot(a.params));
  EXPECT_EQ(back.prototypes.mu, a.prototypes.mu);
  EXPECT_EQ(back.prototypes.mu_bar, a.prototypes.mu_bar);
  EXPECT_EQ(back.anchor_indices, a.anchor_indices);
  for (const auto& t : to_checkpoint(a).tensors) EXPECT_EQ(t.name.rfind("discriminator", 0), std::string::npos);

  // prototypes recomputed from the restored bank agree bit for bit
  const AnchorBank bank = anchor_bank_from_indices(d, back.anchor_indices);
  const PrototypeSet again = compute_prototypes(bank, back.params);
  EXPECT_EQ(again.mu, a.prototypes.mu);

  Checkpoint tampered = to_checkpoint(a);
  tampered.header["config"]["epochs"] = 99;
  EXPECT_THROW(artifact_from_checkpoint(tampered), SchemaError);
}

}  // namespace
}  // namespace atta

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "lstmviz/trainer.hpp"

using namespace lstmviz;

namespace {

LabeledSequence seq(double v, int label, std::string pid, int T = 3) {
  LabeledSequence s;
  s.values = Matrix::Constant(T, 1, v);
  s.label = label;
  s.patient_id = std::move(pid);
  return s;
}

// Class = sign of the mean; every sequence keeps |mean| >= 0.3 so the task is
// separable on the mean feature.
Dataset sign_of_mean(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> level(0.3, 1.0);
  Dataset out(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double mean = (label == 1 ? 1.0 : -1.0) * level(rng);
    Matrix x(6, 1);
    for (int t = 0; t < 6; ++t) x(t, 0) = noise(rng);
    x.array() += mean - x.mean();
    out[i].values = x;
    out[i].label = label;
  }
  return out;
}

// Logistic regression on the sequence mean, plain gradient descent.
double logistic_oracle_accuracy(const Dataset& train, const Dataset& test) {
  double w = 0.0, b = 0.0;
  for (int it = 0; it < 2000; ++it) {
    double gw = 0.0, gb = 0.0;
    for (const auto& s : train) {
      const double m = s.values.mean();
      const double p = 1.0 / (1.0 + std::exp(-(w * m + b)));
      gw += (p - s.label) * m;
      gb += p - s.label;
    }
    w -= 0.5 * gw / train.size();
    b -= 0.5 * gb / train.size();
  }
  int correct = 0;
  for (const auto& s : test) correct += ((w * s.values.mean() + b > 0) ? 1 : 0) == s.label;
  return static_cast<double>(correct) / test.size();
}

LstmConfig tiny(int classes = 2) {
  LstmConfig c;
  c.hidden = 8;
  c.classes = classes;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST(Apportion, PatientCounts) {
  const auto a = apportion(47, {0.7, 0.1, 0.2});
  EXPECT_EQ(a[0], 33u);
  EXPECT_EQ(a[1], 5u);
  EXPECT_EQ(a[2], 9u);
  for (std::size_t n : {3u, 10u, 11u, 99u, 1000u}) {
    const auto b = apportion(n, {0.7, 0.1, 0.2});
    EXPECT_EQ(b[0] + b[1] + b[2], n);
  }
}

TEST(SplitByPatient, FortySevenPatients) {
  Dataset data;
  for (int p = 0; p < 47; ++p)
    for (int i = 0; i < 20; ++i) data.push_back(seq(0.0, (p + i) % 2, "p" + std::to_string(p)));
  SplitSpec spec;
  spec.seed = 3;
  const auto s = split_by_patient(data, spec);
  EXPECT_EQ(s.patients[0].size(), 33u);
  EXPECT_EQ(s.patients[1].size(), 5u);
  EXPECT_EQ(s.patients[2].size(), 9u);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), data.size());
}

TEST(SplitByPatient, DisjointCompleteAndBalanced) {
  std::mt19937_64 rng(1);
  Dataset data;
  for (int p = 0; p < 20; ++p) {
    const int n = 5 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i)
      data.push_back(seq(0.0, static_cast<int>(rng() % 3), "pat" + std::to_string(p)));
  }
  SplitSpec spec;
  spec.seed = 11;
  const auto s = split_by_patient(data, spec);
  std::set<std::string> seen;
  for (const auto& group : s.patients)
    for (const auto& pid : group) EXPECT_TRUE(seen.insert(pid).second) << pid;
  EXPECT_EQ(seen.size(), 20u);
  const Dataset* parts[3] = {&s.train, &s.val, &s.test};
  std::array<std::vector<std::size_t>, 3> counts;
  for (int k = 0; k < 3; ++k) {
    std::set<std::string> members(s.patients[k].begin(), s.patients[k].end());
    for (const auto& item : *parts[k]) EXPECT_TRUE(members.count(item.patient_id));
    counts[k] = class_histogram(*parts[k], 3);
  }
  EXPECT_TRUE(split_is_balanced(counts, spec.fractions, spec.min_fraction));
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), data.size());

  const auto again = split_by_patient(data, spec);
  EXPECT_EQ(again.patients, s.patients);
}

TEST(SplitByPatient, SingleClassAlwaysPasses) {
  Dataset data;
  for (int p = 0; p < 10; ++p)
    for (int i = 0; i < 4; ++i) data.push_back(seq(0.0, 0, std::to_string(p)));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitSpec spec;
    spec.seed = seed;
    spec.max_retries = 1;
    EXPECT_NO_THROW(split_by_patient(data, spec));
  }
}

TEST(SplitByPatient, UnsatisfiableSetIsRejected) {
  // Class 1 lives entirely in patient "p0", so at most one split can hold it.
  Dataset data;
  for (int p = 0; p < 6; ++p)
    for (int i = 0; i < 5; ++i) data.push_back(seq(0.0, p == 0 ? 1 : 0, "p" + std::to_string(p)));

  // Exhaustive check over every patient assignment with the apportioned sizes.
  const std::array<Scalar, 3> fr{0.7, 0.1, 0.2};
  const auto sizes = apportion(6, fr);
  int feasible = 0;
  std::vector<int> assign(6);
  std::function<void(int)> rec = [&](int i) {
    if (i == 6) {
      std::array<std::size_t, 3> sz{};
      for (int a : assign) ++sz[a];
      if (sz != sizes) return;
      std::array<std::vector<std::size_t>, 3> counts;
      for (auto& c : counts) c.assign(2, 0);
      for (int p = 0; p < 6; ++p) counts[assign[p]][p == 0 ? 1 : 0] += 5;
      feasible += split_is_balanced(counts, fr, 0.9);
      return;
    }
    for (int s = 0; s < 3; ++s) {
      assign[i] = s;
      rec(i + 1);
    }
  };
  rec(0);
  ASSERT_EQ(feasible, 0);

  SplitSpec spec;
  spec.max_retries = 50;
  try {
    split_by_patient(data, spec);
    FAIL() << "expected SplitError";
  } catch (const SplitError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("50 attempts"), std::string::npos) << msg;
    EXPECT_NE(msg.find("class"), std::string::npos) << msg;
  }
}

TEST(SplitByPatient, PreconditionErrors) {
  Dataset data{seq(0, 0, "a"), seq(0, 0, "b")};
  EXPECT_THROW(split_by_patient(data, {}), std::invalid_argument);
  data.push_back(seq(0, 0, ""));
  EXPECT_THROW(split_by_patient(data, {}), std::invalid_argument);
}

TEST(SplitPlain, Examples) {
  Dataset data(60000);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = seq(static_cast<double>(i), 0, "", 1);
  const auto s = split_plain(data, 11.0 / 12.0, 5);
  EXPECT_EQ(s.train.size(), 55000u);
  EXPECT_EQ(s.val.size(), 5000u);
  const auto again = split_plain(data, 11.0 / 12.0, 5);
  for (std::size_t i = 0; i < s.val.size(); ++i) EXPECT_EQ(s.val[i].values, again.val[i].values);
  const auto all = split_plain(data, 1.0, 5);
  EXPECT_TRUE(all.val.empty());
  EXPECT_EQ(all.train.size(), 60000u);
}

TEST(Accuracy, HandCountedExamples) {
  // Zero weights except the output bias, which decides every prediction.
  auto cfg = tiny(3);
  auto p = LstmParams::zeros(cfg);
  p.out_bias << 0.0, 1.0, 0.5;
  Dataset data;
  const int labels[10] = {1, 1, 0, 2, 1, 1, 2, 0, 1, 1};
  for (int l : labels) data.push_back(seq(0.3, l, ""));
  EXPECT_DOUBLE_EQ(evaluate_accuracy(data, p, cfg), 0.6);
  EXPECT_DOUBLE_EQ(evaluate_accuracy(std::span(data).first(1), p, cfg), 1.0);
}

TEST(Accuracy, ZeroModelPicksLowestClass) {
  const auto cfg = tiny(4);
  const auto p = LstmParams::zeros(cfg);
  Dataset data;
  for (int i = 0; i < 8; ++i) data.push_back(seq(0.1 * i, i % 4, ""));
  EXPECT_DOUBLE_EQ(evaluate_accuracy(data, p, cfg), 0.25);
  for (int pred : predict(data, p, cfg)) EXPECT_EQ(pred, 0);
}

TEST(Train, ZeroEpochsReturnsInitialParams) {
  const auto cfg = tiny();
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 4;
  const Dataset d = sign_of_mean(10, 1);
  const auto r = train(d, d, cfg, tc);
  EXPECT_EQ(r.params, init_params(cfg, 4));
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, SeparableToyReachesFullAccuracy) {
  const Dataset tr = sign_of_mean(400, 1);
  const Dataset va = sign_of_mean(100, 2);
  ASSERT_EQ(logistic_oracle_accuracy(tr, va), 1.0);

  const auto cfg = tiny();
  TrainConfig tc;
  tc.epochs = 20;
  tc.minibatch = 20;
  tc.lr = 0.01;
  tc.seed = 7;
  int calls = 0;
  const auto r = train(tr, va, cfg, tc, [&](const EpochRecord&) { ++calls; });
  EXPECT_EQ(calls, 20);
  ASSERT_EQ(r.history.size(), 20u);
  EXPECT_EQ(evaluate_accuracy(va, r.params, cfg), 1.0);

  double best = r.history[0].val_loss;
  for (const auto& h : r.history) best = std::min(best, h.val_loss);
  EXPECT_EQ(r.best_val_loss, best);
  EXPECT_EQ(r.history[r.best_epoch - 1].val_loss, best);
  EXPECT_NEAR(mean_loss(va, r.params, cfg), best, 1e-9);
}

TEST(Train, DeterministicHistoryAndParams) {
  const Dataset tr = sign_of_mean(60, 3);
  const Dataset va = sign_of_mean(20, 4);
  auto cfg = tiny();
  cfg.dropout = 0.1;
  TrainConfig tc;
  tc.epochs = 3;
  tc.minibatch = 16;
  tc.seed = 9;
  tc.weight_decay = 0.001;
  const auto a = train(tr, va, cfg, tc);
  const auto b = train(tr, va, cfg, tc);
  EXPECT_EQ(a.params, b.params);
  std::ostringstream ha, hb;
  write_history_csv(ha, a.history);
  write_history_csv(hb, b.history);
  EXPECT_EQ(ha.str(), hb.str());
  EXPECT_EQ(ha.str().substr(0, ha.str().find('\n')), "epoch,train_loss,val_loss,val_accuracy");
}

TEST(Train, DivergenceNamesEpoch) {
  Dataset tr = sign_of_mean(10, 1);
  tr[3].values(0, 0) = std::numeric_limits<double>::infinity();
  TrainConfig tc;
  tc.epochs = 2;
  try {
    train(tr, sign_of_mean(4, 2), tiny(), tc);
    FAIL() << "expected divergence";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(Train, EmptySetsRejected) {
  EXPECT_THROW(train({}, sign_of_mean(2, 1), tiny(), {}), std::invalid_argument);
}

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "gkan/errors.hpp"
#include "gkan/synth.hpp"
#include "gkan/training.hpp"
#include "oracles.hpp"

using namespace gkan;

namespace {

CohortTable small_cohort(std::uint64_t seed, std::size_t per_class = 10, std::size_t n_roi = 12) {
  SynthSpec spec;
  spec.n_subjects_per_class = per_class;
  spec.n_roi = n_roi;
  spec.signal_rois = {1, 5};
  spec.signal_strength = 2.0;
  spec.correlation_blocks = default_blocks(n_roi, 4);
  spec.seed = seed;
  return generate_cohort(spec);
}

TrainConfig quick_config(std::uint64_t seed, std::size_t epochs = 3) {
  TrainConfig c;
  c.seed = seed;
  c.epochs_max = epochs;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_CASE("cross entropy examples") {
  const double zero[2] = {0, 0};
  CHECK(cross_entropy(zero, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(zero, 1) == doctest::Approx(0.693147).epsilon(1e-6));
  const double saturated[2] = {1000, -1000};
  CHECK(cross_entropy(saturated, 0) < 1e-12);
  CHECK(std::isfinite(cross_entropy(saturated, 1)));
  const double mild[2] = {1, 2};
  CHECK(cross_entropy(mild, 0) == doctest::Approx(std::log1p(std::exp(1.0))).epsilon(1e-14));
  CHECK(cross_entropy(mild, 0) == doctest::Approx(1.313262).epsilon(1e-6));
}

TEST_CASE("cross entropy matches the extended-precision oracle") {
  Rng rng = derive_rng(6, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const double l[2] = {uniform(rng, -20, 20), uniform(rng, -20, 20)};
    const std::size_t y = uniform_index(rng, 2);
    CHECK(std::abs(cross_entropy(l, y) - oracle::cross_entropy(l, y)) < 1e-10);
  }
}

TEST_CASE("adam with zero gradient and no decay leaves parameters unchanged") {
  auto p = ModelParams::init(ModelKind::gcn_kan, ModelShape{1, 4, 2, 3}, 1);
  const auto before = p.flatten();
  Gradients zero;
  for (auto [r, c] : p.slot_shapes()) zero.emplace_back(r, c);
  adam_step(p, zero, 0.01, 0.0);
  CHECK(p.flatten() == before);
  CHECK(p.adam.step == 1);
}

TEST_CASE("first adam step moves each parameter by about lr against the gradient sign") {
  auto p = ModelParams::init(ModelKind::gcn, ModelShape{1, 4, 2, 3}, 2);
  const auto before = p.flatten();
  Rng rng = derive_rng(2, 1);
  Gradients g;
  for (auto [r, c] : p.slot_shapes()) g.push_back(oracle::random_matrix(r, c, rng, -3, 3));
  std::vector<double> flat_g;
  for (const auto& m : g) flat_g.insert(flat_g.end(), m.data().begin(), m.data().end());
  const double lr = 1e-3;
  adam_step(p, g, lr, 0.0);
  const auto after = p.flatten();
  for (std::size_t i = 0; i < after.size(); ++i) {
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    const double expect = -lr * flat_g[i] / (std::abs(flat_g[i]) + 1e-8);
    CHECK(std::abs((after[i] - before[i]) - expect) < 1e-12);
  }
}

TEST_CASE("adam matches the scalar oracle over several steps with weight decay") {
  auto p = ModelParams::init(ModelKind::gcn_kan, ModelShape{1, 3, 2, 2}, 3);
  Rng rng = derive_rng(3, 1);
  std::vector<oracle::AdamScalar> ref;
  for (double v : p.flatten()) ref.push_back({v, 0.0, 0.0});
  for (std::uint64_t step = 1; step <= 5; ++step) {
    Gradients g;
    for (auto [r, c] : p.slot_shapes()) g.push_back(oracle::random_matrix(r, c, rng));
    std::size_t k = 0;
    for (const auto& m : g)
      for (double gv : m.data()) {
        ref[k] = oracle::adam(ref[k], gv, step, 5e-4, 1e-4);
        ++k;
      }
    adam_step(p, g, 5e-4, 1e-4);
  }
  const auto got = p.flatten();
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - ref[i].theta) < 1e-12);
}

TEST_CASE("adam rejects a non-finite gradient and names the tensor") {
  auto p = ModelParams::init(ModelKind::gcn_kan, ModelShape{1, 3, 2, 2}, 3);
  Gradients g;
  for (auto [r, c] : p.slot_shapes()) g.emplace_back(r, c);
  g[2](0, 0) = std::numeric_limits<double>::infinity();
  try {
    adam_step(p, g, 1e-3, 0.0);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("kan1") != std::string::npos);
  }
}

TEST_CASE("a small adam step lowers the loss of a fixed batch") {
  const auto cohort = small_cohort(4, 6, 8);
  const RoiGraph graph = build_adjacency(cohort, 0.1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = ModelParams::init(ModelKind::gcn_kan, ModelShape{}, seed);
    auto batch_loss = [&](Gradients* grads) {
      double total = 0.0;
      for (std::size_t s = 0; s < 6; ++s) {
        GradTape tape(p.slot_shapes());
        const auto trace = model_forward(tape, p, graph.norm_propagator, cohort.node_features(s), {});
        const Var loss = tape.softmax_cross_entropy(trace.logits, static_cast<std::size_t>(cohort.labels[s]));
        total += tape.value(loss)(0, 0);
        if (grads) {
          auto g = tape.backward(loss);
          if (grads->empty()) *grads = std::move(g);
          else
            for (std::size_t t = 0; t < g.size(); ++t) (*grads)[t] = add((*grads)[t], g[t]);
        }
      }
      return total / 6.0;
    };
    Gradients g;
    const double before = batch_loss(&g);
    for (auto& m : g) m = scaled(m, 1.0 / 6.0);
    adam_step(p, g, 1e-4, 0.0);
    CHECK(batch_loss(nullptr) < before);
  }
}

TEST_CASE("plateau scheduler traces") {
  SUBCASE("strictly improving losses never change lr") {
    PlateauScheduler s(0.01, 2, 0.1, 1e-6);
    for (int e = 0; e < 50; ++e) CHECK(s.step(1.0 - 0.01 * e) == 0.01);
  }
  SUBCASE("a flat run longer than patience drops lr one decade and resets") {
    PlateauScheduler s(0.01, 2, 0.1, 1e-6);
    // epoch 1 sets the best; epochs 2-4 do not improve; the third bad epoch
    // exceeds patience 2
    CHECK(s.step(1.0) == 0.01);
    CHECK(s.step(1.0) == 0.01);
    CHECK(s.step(1.0) == 0.01);
    CHECK(s.step(1.0) == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(s.bad_epochs() == 0);
    s.step(1.0);
    s.step(1.0);
    CHECK(s.step(1.0) == doctest::Approx(1e-4).epsilon(1e-15));
  }
  SUBCASE("gains below delta are not improvements") {
    PlateauScheduler s(0.01, 1, 0.1, 1e-6);
    s.step(1.0);
    s.step(1.0 - 5e-5);
    CHECK(s.step(1.0 - 9e-5) == doctest::Approx(0.001).epsilon(1e-15));
  }
  SUBCASE("lr is floored at min_lr") {
    PlateauScheduler s(5e-6, 0, 0.1, 1e-6);
    s.step(1.0);
    CHECK(s.step(1.0) == 1e-6);
    CHECK(s.step(1.0) == 1e-6);
  }
}

TEST_CASE("early stopping traces") {
  SUBCASE("improvement every epoch never stops") {
    EarlyStopping es(3);
    for (int e = 0; e < 100; ++e) CHECK_FALSE(es.check(10.0 - 0.01 * e));
  }
  SUBCASE("flat loss stops patience+1 epochs after the best") {
    const std::size_t patience = 5;
    EarlyStopping es(patience);
    std::size_t epoch = 0;
    bool stop = false;
    while (!stop) {
      ++epoch;
      stop = es.check(0.7);
    }
    CHECK(epoch == 1 + patience + 1);
  }
  SUBCASE("an improvement resets the count") {
    EarlyStopping es(2);
    const std::vector<double> losses{1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5};
    std::vector<bool> stops;
    for (double l : losses) stops.push_back(es.check(l));
    CHECK(stops == std::vector<bool>{false, false, false, false, false, false, true});
    CHECK(es.best() == 0.5);
  }
}

TEST_CASE("stratified folds partition subjects and keep class proportions") {
  std::vector<int> labels;
  for (int i = 0; i < 43; ++i) labels.push_back(0);
  for (int i = 0; i < 45; ++i) labels.push_back(1);
  Rng rng = derive_rng(1, 2);
  shuffle(labels.begin(), labels.end(), rng);
  const auto folds = stratified_folds(labels, 5, 9);
  std::size_t per_fold[5][2] = {};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    REQUIRE(folds[i] < 5);
    ++per_fold[folds[i]][labels[i]];
  }
  for (auto& f : per_fold) {
    const double size = static_cast<double>(f[0] + f[1]);
    // expected share of each class in a fold of this size
    CHECK(std::abs(static_cast<double>(f[0]) - size * 43.0 / 88.0) <= 1.0);
    CHECK(std::abs(static_cast<double>(f[1]) - size * 45.0 / 88.0) <= 1.0);
  }
  CHECK(stratified_folds(labels, 5, 9) == folds);
  CHECK_THROWS_AS(stratified_folds(std::vector<int>{0, 0, 1, 1, 1}, 3, 0), ConfigError);
}

TEST_CASE("train_one_fold contracts") {
  const auto cohort = small_cohort(1);
  const RoiGraph graph = build_adjacency(cohort, 0.1);
  const auto empty = cohort.subset({});
  CHECK_THROWS_AS(train_one_fold(cohort, empty, graph, quick_config(0)), ConfigError);

  auto config = quick_config(5, 12);
  config.early_stop_patience = 3;
  const auto train = cohort.subset({0, 1, 2, 3, 4, 5, 6, 7, 10, 11, 12, 13, 14, 15, 16, 17});
  const auto val = cohort.subset({8, 9, 18, 19});
  const auto a = train_one_fold(train, val, graph, config);
  CHECK(a.epochs_run <= config.epochs_max);
  CHECK(a.history.size() == a.epochs_run);
  for (const auto& rec : a.history) CHECK(a.best_val_loss <= rec.val_loss);
  CHECK(evaluate_model(a.params, graph, val).mean_loss == a.best_val_loss);

  const auto b = train_one_fold(train, val, graph, config);
  CHECK(a.params.flatten() == b.params.flatten());
  CHECK(a.best_val_loss == b.best_val_loss);
  CHECK(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].val_loss == b.history[i].val_loss);
}

TEST_CASE("cross-validation never scores a subject it trained on") {
  const auto cohort = small_cohort(2);
  const auto cv = run_cross_validation(cohort, quick_config(3, 2));
  REQUIRE(cv.folds.size() == 5);
  std::multiset<std::string> validated;
  for (const auto& f : cv.folds) {
    const std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
    for (const auto& id : f.val_ids) {
      CHECK(train.count(id) == 0);
      validated.insert(id);
    }
    for (const auto& s : f.metrics.per_subject) CHECK(train.count(s.id) == 0);
    CHECK(f.train_ids.size() + f.val_ids.size() == cohort.subject_count());
  }
  CHECK(validated.size() == cohort.subject_count());
  for (const auto& id : cohort.subject_ids) CHECK(validated.count(id) == 1);
  CHECK(cv.aggregate.folds == 5);
}

TEST_CASE("a fold's adjacency ignores its validation subjects") {
  const auto cohort = small_cohort(3);
  const auto config = quick_config(4, 1);
  const auto base = run_cross_validation(cohort, config);
  const auto& fold = base.folds[2];
  const std::string victim = fold.val_ids.front();
  auto perturbed = cohort;
  const auto row = static_cast<std::size_t>(
      std::find(cohort.subject_ids.begin(), cohort.subject_ids.end(), victim) - cohort.subject_ids.begin());
  for (double& v : perturbed.features.row(row)) v = v * 3.0 + 7.0;
  const auto again = run_cross_validation(perturbed, config);
  CHECK(again.folds[2].graph.adjacency == fold.graph.adjacency);
  // a fold that trained on the victim does see the change
  bool some_changed = false;
  for (std::size_t f = 0; f < 5; ++f)
    if (f != 2) some_changed = some_changed || !(again.folds[f].graph.adjacency == base.folds[f].graph.adjacency);
  CHECK(some_changed);
}

TEST_CASE("config validation names the field") {
  TrainConfig c;
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr = 0.0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lr") != std::string::npos);
  }
}

TEST_CASE("cross-validation requires folds subjects per class") {
  const auto cohort = small_cohort(5, 3);
  CHECK_THROWS_AS(run_cross_validation(cohort, quick_config(0)), ConfigError);
}

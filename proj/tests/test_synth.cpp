#include <cmath>

#include "doctest.h"
#include "gkan/errors.hpp"
#include "gkan/graph.hpp"
#include "gkan/synth.hpp"
#include "oracles.hpp"

using namespace gkan;

namespace {

// Welch t statistic of ROI `roi` between label 1 and label 0.
double welch_t(const CohortTable& c, std::size_t roi) {
  double sum[2] = {}, sq[2] = {};
  double n[2] = {};
  for (std::size_t s = 0; s < c.subject_count(); ++s) {
    const int y = c.labels[s];
    sum[y] += c.features(s, roi);
    n[y] += 1;
  }
  const double mean[2] = {sum[0] / n[0], sum[1] / n[1]};
  for (std::size_t s = 0; s < c.subject_count(); ++s) {
    const int y = c.labels[s];
    sq[y] += std::pow(c.features(s, roi) - mean[y], 2);
  }
  const double v0 = sq[0] / (n[0] - 1), v1 = sq[1] / (n[1] - 1);
  return (mean[1] - mean[0]) / std::sqrt(v0 / n[0] + v1 / n[1]);
}

}  // namespace

TEST_CASE("same seed gives bitwise identical cohorts") {
  SynthSpec spec;
  spec.n_subjects_per_class = 10;
  spec.nonlinearity = Nonlinearity::sine;
  spec.seed = 42;
  const auto a = generate_cohort(spec);
  const auto b = generate_cohort(spec);
  CHECK(a.features == b.features);
  CHECK(a.subject_ids == b.subject_ids);
  CHECK(a.labels == b.labels);
  spec.seed = 43;
  CHECK_FALSE(generate_cohort(spec).features == a.features);
}

TEST_CASE("within-block correlation approaches rho") {
  SynthSpec spec;
  spec.n_subjects_per_class = 1000;
  spec.n_roi = 6;
  spec.signal_rois = {};
  spec.correlation_blocks = {{{0, 1, 2}, 0.5}};
  spec.seed = 3;
  const auto c = generate_cohort(spec);
  CHECK(std::abs(oracle::pearson(c.features, 0, 1) - 0.5) < 0.1);
  CHECK(std::abs(oracle::pearson(c.features, 1, 2) - 0.5) < 0.1);
  CHECK(std::abs(oracle::pearson(c.features, 3, 4)) < 0.1);
  CHECK(std::abs(oracle::pearson(c.features, 0, 5)) < 0.1);
}

TEST_CASE("non-signal ROIs do not separate the classes") {
  SynthSpec spec;
  spec.n_subjects_per_class = 100;
  spec.n_roi = 40;
  spec.signal_rois = {7, 12, 30};
  spec.signal_strength = 3.0;
  spec.seed = 8;
  spec.correlation_blocks = default_blocks(40);
  const auto c = generate_cohort(spec);
  for (std::size_t r = 0; r < spec.n_roi; ++r) {
    if (r == 7 || r == 12 || r == 30) {
      CHECK(welch_t(c, r) > 3.0);
    } else {
      CHECK(std::abs(welch_t(c, r)) < 3.0);
    }
  }
}

TEST_CASE("a strongly correlated block is fully connected at tau 0.1") {
  SynthSpec spec;
  spec.n_subjects_per_class = 100;
  spec.n_roi = 8;
  spec.signal_rois = {};
  spec.correlation_blocks = {{{0, 1, 2, 3}, 0.9}};
  spec.seed = 2;
  const auto g = build_adjacency(generate_cohort(spec), 0.1);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) CHECK(g.adjacency(i, j) > 0.8);
}

TEST_CASE("three groups share one stream and scale the signal") {
  SynthSpec spec;
  spec.n_roi = 12;
  spec.signal_rois = {3};
  spec.signal_strength = 5.0;
  spec.correlation_blocks = default_blocks(12, 4);
  const auto g = generate_groups(spec, {{"CN", 200, 0.0}, {"MCI", 200, 0.5}, {"AD", 200, 1.0}});
  REQUIRE(g.subject_ids.size() == 600);
  CHECK(g.groups[0] == "CN");
  CHECK(g.groups[599] == "AD");
  double mean[3] = {};
  for (std::size_t s = 0; s < 600; ++s) mean[s / 200] += g.features(s, 3) / 200.0;
  CHECK(std::abs(mean[0]) < 0.3);
  CHECK(std::abs(mean[1] - 2.5) < 0.3);
  CHECK(std::abs(mean[2] - 5.0) < 0.3);
}

TEST_CASE("generator settings validation") {
  SynthSpec spec;
  spec.n_roi = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.signal_rois = {90};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.noise_sd = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.correlation_blocks = {{{0, 1}, 0.7}, {{1, 2}, 0.5}};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.correlation_blocks = {{{0, 1}, 1.0}};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(parse_nonlinearity("cubic"), ConfigError);
  CHECK(parse_nonlinearity(to_string(Nonlinearity::quadratic)) == Nonlinearity::quadratic);
}

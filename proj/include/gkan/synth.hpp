#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gkan/graph.hpp"

namespace gkan {

enum class Nonlinearity { none, quadratic, sine };

std::string to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(const std::string& text);

// ROIs sharing one latent factor with loading sqrt(rho). A ROI may belong to
// several blocks as long as its loadings sum below 1.
struct CorrelationBlock {
  std::vector<std::size_t> rois;
  double rho = 0.0;
};

// Contiguous blocks of `width` ROIs (the last may be shorter), all with `rho`.
std::vector<CorrelationBlock> contiguous_blocks(std::size_t n_roi, std::size_t width, double rho);

// Default layout: contiguous blocks of `width` at `block_rho` plus one block
// spanning every ROI at `global_rho`. The shared global factor keeps
// cross-block sample correlations positive; without it a node's signed
// degree in A + I can go negative on ~70 subjects.
std::vector<CorrelationBlock> default_blocks(std::size_t n_roi, std::size_t width = 10,
                                             double block_rho = 0.4, double global_rho = 0.2);

struct SynthSpec {
  std::size_t n_subjects_per_class = 45;
  std::size_t n_roi = 90;
  std::vector<std::size_t> signal_rois{7, 12, 30};
  double signal_strength = 1.0;
  Nonlinearity nonlinearity = Nonlinearity::none;
  double noise_sd = 1.0;
  std::vector<CorrelationBlock> correlation_blocks = default_blocks(90);
  std::uint64_t seed = 0;
  std::vector<std::string> roi_names;  // empty: ROI_000, ROI_001, ...

  void validate() const;
};

std::vector<std::string> default_roi_names(std::size_t n_roi);

// Group of subjects sharing a signal scale (0 = control, 1 = full signal).
struct SynthGroup {
  std::string name;
  std::size_t count = 0;
  double signal_scale = 0.0;
};

struct GroupedCohort {
  std::vector<std::string> subject_ids;
  std::vector<std::string> groups;
  Matrix features;
  std::vector<std::string> roi_names;
};

// Subjects of every group drawn from one generator stream, in group order.
GroupedCohort generate_groups(const SynthSpec& spec, const std::vector<SynthGroup>& groups);

// Two-class cohort: label 0 = no signal, label 1 = full signal, each with
// n_subjects_per_class subjects.
CohortTable generate_cohort(const SynthSpec& spec);

}  // namespace gkan

#include "gkan/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "gkan/errors.hpp"
#include "gkan/rng.hpp"

namespace gkan {

std::string to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::none: return "none";
    case Nonlinearity::quadratic: return "quadratic";
    case Nonlinearity::sine: return "sine";
  }
  return "none";
}

Nonlinearity parse_nonlinearity(const std::string& text) {
  if (text == "none") return Nonlinearity::none;
  if (text == "quadratic") return Nonlinearity::quadratic;
  if (text == "sine") return Nonlinearity::sine;
  throw ConfigError("unknown nonlinearity '" + text + "' (expected none, quadratic or sine)");
}

std::vector<CorrelationBlock> contiguous_blocks(std::size_t n_roi, std::size_t width, double rho) {
  std::vector<CorrelationBlock> blocks;
  if (width == 0) return blocks;
  for (std::size_t start = 0; start < n_roi; start += width) {
    CorrelationBlock b;
    b.rho = rho;
    for (std::size_t r = start; r < std::min(n_roi, start + width); ++r) b.rois.push_back(r);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

std::vector<CorrelationBlock> default_blocks(std::size_t n_roi, std::size_t width, double block_rho,
                                             double global_rho) {
  auto blocks = contiguous_blocks(n_roi, width, block_rho);
  if (global_rho > 0.0) {
    CorrelationBlock all;
    all.rho = global_rho;
    for (std::size_t r = 0; r < n_roi; ++r) all.rois.push_back(r);
    blocks.push_back(std::move(all));
  }
  return blocks;
}

std::vector<std::string> default_roi_names(std::size_t n_roi) {
  std::vector<std::string> names;
  names.reserve(n_roi);
  char buf[32];
  for (std::size_t r = 0; r < n_roi; ++r) {
    std::snprintf(buf, sizeof buf, "ROI_%03zu", r);
    names.emplace_back(buf);
  }
  return names;
}

void SynthSpec::validate() const {
  if (n_roi < 2) throw ConfigError("n_roi must be at least 2");
  if (!(noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
  if (!std::isfinite(signal_strength)) throw ConfigError("signal_strength must be finite");
  for (std::size_t r : signal_rois)
    if (r >= n_roi) {
      throw ConfigError("signal ROI " + std::to_string(r) + " outside [0, " +
                        std::to_string(n_roi) + ")");
    }
  std::vector<double> loading(n_roi, 0.0);
  for (const auto& b : correlation_blocks) {
    if (!(b.rho >= 0.0 && b.rho < 1.0)) {
      throw ConfigError("block correlation must satisfy 0 <= rho < 1, got " + std::to_string(b.rho));
    }
    for (std::size_t r : b.rois) {
      if (r >= n_roi) throw ConfigError("block ROI " + std::to_string(r) + " out of range");
      loading[r] += b.rho;
    }
  }
  for (std::size_t r = 0; r < n_roi; ++r)
    if (!(loading[r] < 1.0)) {
      throw ConfigError("ROI " + std::to_string(r) + " has total block loading >= 1");
    }
  if (!roi_names.empty() && roi_names.size() != n_roi) {
    throw ConfigError("got " + std::to_string(roi_names.size()) + " ROI names for " +
                      std::to_string(n_roi) + " ROIs");
  }
}

GroupedCohort generate_groups(const SynthSpec& spec, const std::vector<SynthGroup>& groups) {
  spec.validate();
  std::size_t total = 0;
  for (const auto& g : groups) total += g.count;

  // Per-ROI loadings on each block latent plus the idiosyncratic share.
  std::vector<std::vector<std::pair<std::size_t, double>>> loadings(spec.n_roi);
  std::vector<double> own(spec.n_roi, 1.0);
  for (std::size_t b = 0; b < spec.correlation_blocks.size(); ++b) {
    const auto& blk = spec.correlation_blocks[b];
    for (std::size_t r : blk.rois) {
      loadings[r].emplace_back(b, std::sqrt(blk.rho));
      own[r] -= blk.rho;
    }
  }
  for (double& o : own) o = std::sqrt(o);

  GroupedCohort out;
  out.roi_names = spec.roi_names.empty() ? default_roi_names(spec.n_roi) : spec.roi_names;
  out.features = Matrix(total, spec.n_roi);
  Rng rng = derive_rng(spec.seed, 0xc0407);
  std::vector<double> latent(spec.correlation_blocks.size());
  std::size_t row = 0;
  char id[32];
  for (const auto& g : groups) {
    for (std::size_t s = 0; s < g.count; ++s, ++row) {
      std::snprintf(id, sizeof id, "S%04zu", row + 1);
      out.subject_ids.emplace_back(id);
      out.groups.push_back(g.name);
      for (double& l : latent) l = standard_normal(rng);
      auto x = out.features.row(row);
      for (std::size_t r = 0; r < spec.n_roi; ++r) {
        double z = own[r] * standard_normal(rng);
        for (const auto& [b, w] : loadings[r]) z += w * latent[b];
        x[r] = spec.noise_sd * z;
      }
      // Drawn for every subject so group composition does not shift the stream.
      const double u_normal = standard_normal(rng);
      const double u_unit = uniform01(rng);
      double shift = 0.0;
      switch (spec.nonlinearity) {
        case Nonlinearity::none: shift = 1.0; break;
        case Nonlinearity::quadratic: shift = u_normal * u_normal; break;
        case Nonlinearity::sine: shift = std::sin(2.0 * std::numbers::pi * u_unit); break;
      }
      const double amount = g.signal_scale * spec.signal_strength * shift;
      for (std::size_t r : spec.signal_rois) x[r] += amount;
    }
  }
  return out;
}

CohortTable generate_cohort(const SynthSpec& spec) {
  const GroupedCohort g = generate_groups(
      spec, {{"control", spec.n_subjects_per_class, 0.0}, {"case", spec.n_subjects_per_class, 1.0}});
  CohortTable t;
  t.subject_ids = g.subject_ids;
  t.features = g.features;
  t.roi_names = g.roi_names;
  for (const auto& name : g.groups) t.labels.push_back(name == "case" ? 1 : 0);
  return t;
}

}  // namespace gkan

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metablue/ams_model.hpp"

namespace metablue {

/// Symmetric matrix of pairwise cosine similarities between directional
/// spectra, diagonal fixed at 1.
struct SimilarityMatrix {
  std::size_t size = 0;
  std::vector<double> values;  ///< size * size, row-major
  std::vector<double> angles;  ///< the grid directions, radians

  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
  double mean_offdiag() const;
  double max_offdiag() const;
};

struct OptimizerParams {
  double beta = 1.0;           ///< worst-case weight on the max similarity
  std::size_t max_iters = 20000;
  double init_temperature = 0.02;
  double cooling_rate = 0.9995;  ///< geometric schedule, in (0, 1)
  std::uint64_t seed = 1;
  double d_max = 0.033;  ///< upper thickness bound, m

  void validate() const;
};

/// Per-direction magnitude spectra |G_theta(f)| of a gain table.
std::vector<std::vector<double>> spectral_vectors(const DirectionalGainTable& t);

/// Pairwise cosine similarities of the spectra. Throws on an all-zero vector
/// (degenerate spectrum), naming the offending angle.
SimilarityMatrix similarity_matrix(const std::vector<std::vector<double>>& v,
                                   std::span<const double> angles = {});

/// Sum of off-diagonal similarities plus beta times the worst pair.
double objective(const SimilarityMatrix& sim, double beta);

struct IterationRecord {
  std::size_t iter = 0;
  double objective = 0.0;
  double temperature = 0.0;
};

struct OptimizeResult {
  MetasurfaceConfig config;
  double final_objective = 0.0;    ///< on the full evaluation grid
  double initial_objective = 0.0;  ///< random init, same grid
  std::vector<IterationRecord> log;
};

/// Simulated annealing over the solid lengths {d_i} with single-coordinate
/// proposals uniform in [0, d_max]. The score minimized is the mean
/// off-diagonal similarity plus beta times the max off-diagonal similarity,
/// evaluated on (angles, freqs) during the search and on (final_angles,
/// final_freqs) for the reported objectives. Fully reproducible from the
/// seed.
OptimizeResult optimize(const OptimizerParams& params,
                        const MetasurfaceConfig& template_cfg,
                        std::span<const double> angles,
                        std::span<const double> freqs,
                        std::span<const double> final_angles = {},
                        std::span<const double> final_freqs = {});

}  // namespace metablue

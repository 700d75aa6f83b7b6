#include "metablue/ams_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "metablue/common.hpp"
#include "metablue/errors.hpp"

namespace metablue {

double SimilarityMatrix::mean_offdiag() const {
  if (size < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      if (i != j) sum += at(i, j);
    }
  }
  return sum / static_cast<double>(size * (size - 1));
}

double SimilarityMatrix::max_offdiag() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      if (i != j) m = std::max(m, at(i, j));
    }
  }
  return m;
}

void OptimizerParams::validate() const {
  if (beta < 0.0) throw ConfigError("OptimizerParams: beta must be >= 0");
  if (cooling_rate <= 0.0 || cooling_rate >= 1.0) {
    throw ConfigError("OptimizerParams: cooling_rate must be in (0, 1)");
  }
  if (d_max <= 0.0) throw ConfigError("OptimizerParams: d_max must be > 0");
  if (init_temperature < 0.0) {
    throw ConfigError("OptimizerParams: init_temperature must be >= 0");
  }
}

std::vector<std::vector<double>> spectral_vectors(const DirectionalGainTable& t) {
  t.validate();
  std::vector<std::vector<double>> v(t.angle_count());
  for (std::size_t m = 0; m < t.angle_count(); ++m) {
    v[m].resize(t.freq_count());
    for (std::size_t l = 0; l < t.freq_count(); ++l) {
      v[m][l] = std::abs(t.at(m, l));
    }
  }
  return v;
}

SimilarityMatrix similarity_matrix(const std::vector<std::vector<double>>& v,
                                   std::span<const double> angles) {
  const std::size_t m = v.size();
  if (m == 0) throw std::invalid_argument("similarity_matrix: no vectors");
  const std::size_t l = v.front().size();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (v[i].size() != l) {
      throw std::invalid_argument("similarity_matrix: ragged vectors");
    }
    double e = 0.0;
    for (double x : v[i]) e += x * x;
    norms[i] = std::sqrt(e);
    if (norms[i] == 0.0) {
      const std::string where =
          angles.size() == m ? " at angle " + std::to_string(angles[i]) + " rad"
                             : " at index " + std::to_string(i);
      throw std::invalid_argument("similarity_matrix: degenerate zero spectrum" +
                                  where);
    }
  }
  SimilarityMatrix sim;
  sim.size = m;
  sim.values.assign(m * m, 1.0);
  sim.angles.assign(angles.begin(), angles.end());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < l; ++k) dot += v[i][k] * v[j][k];
      const double s = dot / (norms[i] * norms[j]);
      sim.values[i * m + j] = s;
      sim.values[j * m + i] = s;
    }
  }
  return sim;
}

double objective(const SimilarityMatrix& sim, double beta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < sim.size; ++i) {
    for (std::size_t j = 0; j < sim.size; ++j) {
      if (i != j) sum += sim.at(i, j);
    }
  }
  return sum + beta * sim.max_offdiag();
}

namespace {

// Incremental far-field state over a fixed (angle, freq) grid. The per-cell
// factor A(f,d) e^{j phi(f,d)} is the only thing a proposal changes, so the
// field sums can be updated cell-by-cell instead of rebuilt.
class FieldState {
 public:
  FieldState(const MetasurfaceConfig& cfg, std::span<const double> angles,
             std::span<const double> freqs)
      : cfg_(cfg),
        angles_(angles.begin(), angles.end()),
        freqs_(freqs.begin(), freqs.end()),
        m_(angles.size()),
        n_(cfg.cells.size()),
        l_(freqs.size()) {
    geom_.resize(m_ * n_ * l_);
    active_.assign(m_ * n_, false);
    for (std::size_t m = 0; m < m_; ++m) {
      for (std::size_t i = 0; i < n_; ++i) {
        const double delta = wrap_angle(angles_[m] - cfg_.cell_angles[i]);
        if (std::abs(delta) >= kPi / 2.0) continue;
        active_[m * n_ + i] = true;
        const double cosd = std::cos(delta);
        for (std::size_t l = 0; l < l_; ++l) {
          const double rim = kTwoPi * cfg_.outer_radius * freqs_[l] /
                             cfg_.materials.c_water;
          geom_[(m * n_ + i) * l_ + l] = std::polar(cosd, rim * cosd);
        }
      }
    }
    cell_factor_.resize(n_ * l_);
    sums_.assign(m_ * l_, {0.0, 0.0});
    for (std::size_t i = 0; i < n_; ++i) set_cell(i, cfg_.cells[i].solid_len);
  }

  // Replaces cell i's solid length and updates the field sums.
  void set_cell(std::size_t i, double d) {
    UnitCellSpec cell{d, cfg_.cells[i].total_len};
    for (std::size_t l = 0; l < l_; ++l) {
      const double a = amplitude_transmission(cell, freqs_[l], cfg_.materials);
      const double phi = unit_cell_phase(cell, freqs_[l], cfg_.materials);
      const std::complex<double> neu = std::polar(a, phi);
      const std::complex<double> delta = neu - cell_factor_[i * l_ + l];
      cell_factor_[i * l_ + l] = neu;
      for (std::size_t m = 0; m < m_; ++m) {
        if (!active_[m * n_ + i]) continue;
        sums_[m * l_ + l] += delta * geom_[(m * n_ + i) * l_ + l];
      }
    }
    cfg_.cells[i].solid_len = d;
  }

  double solid_len(std::size_t i) const { return cfg_.cells[i].solid_len; }
  const MetasurfaceConfig& config() const { return cfg_; }

  // Mean + beta * max off-diagonal cosine similarity of |sums| rows.
  double score(double beta) const {
    std::vector<std::vector<double>> v(m_, std::vector<double>(l_));
    for (std::size_t m = 0; m < m_; ++m) {
      for (std::size_t l = 0; l < l_; ++l) v[m][l] = std::abs(sums_[m * l_ + l]);
    }
    const SimilarityMatrix sim = similarity_matrix(v, angles_);
    return sim.mean_offdiag() + beta * sim.max_offdiag();
  }

 private:
  MetasurfaceConfig cfg_;
  std::vector<double> angles_;
  std::vector<double> freqs_;
  std::size_t m_, n_, l_;
  std::vector<std::complex<double>> geom_;         // (m, i, l), active only
  std::vector<char> active_;                       // (m, i)
  std::vector<std::complex<double>> cell_factor_;  // (i, l)
  std::vector<std::complex<double>> sums_;         // (m, l)
};

double grid_score(const MetasurfaceConfig& cfg, std::span<const double> angles,
                  std::span<const double> freqs, double beta) {
  const DirectionalGainTable t = build_gain_table(cfg, angles, freqs);
  const SimilarityMatrix sim = similarity_matrix(spectral_vectors(t), t.angles);
  return sim.mean_offdiag() + beta * sim.max_offdiag();
}

}  // namespace

OptimizeResult optimize(const OptimizerParams& params,
                        const MetasurfaceConfig& template_cfg,
                        std::span<const double> angles,
                        std::span<const double> freqs,
                        std::span<const double> final_angles,
                        std::span<const double> final_freqs) {
  params.validate();
  template_cfg.validate();
  if (angles.empty() || freqs.empty()) {
    throw ConfigError("optimize: empty search grid");
  }
  for (const auto& c : template_cfg.cells) {
    if (params.d_max > c.total_len + 1e-12) {
      throw ConfigError("optimize: d_max exceeds the cell length");
    }
  }
  if (final_angles.empty()) final_angles = angles;
  if (final_freqs.empty()) final_freqs = freqs;

  Rng rng(params.seed);
  MetasurfaceConfig init = template_cfg;
  for (auto& c : init.cells) c.solid_len = rng.uniform(0.0, params.d_max);

  OptimizeResult result;
  result.initial_objective =
      grid_score(init, final_angles, final_freqs, params.beta);
  if (params.max_iters == 0) {
    result.config = init;
    result.final_objective = result.initial_objective;
    return result;
  }

  FieldState state(init, angles, freqs);
  double current = state.score(params.beta);
  MetasurfaceConfig best_cfg = init;
  double best = current;

  double temperature = params.init_temperature;
  result.log.reserve(params.max_iters);
  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    const std::size_t i = rng.index(init.cells.size());
    const double old_d = state.solid_len(i);
    const double new_d = rng.uniform(0.0, params.d_max);
    state.set_cell(i, new_d);
    const double candidate = state.score(params.beta);
    const double delta = candidate - current;
    bool accept = delta <= 0.0;
    if (!accept && temperature > 0.0) {
      accept = rng.uniform() < std::exp(-delta / temperature);
    } else if (!accept) {
      rng.uniform();  // keep the draw count fixed for reproducibility
    }
    if (accept) {
      current = candidate;
      if (current < best) {
        best = current;
        best_cfg = state.config();
      }
    } else {
      state.set_cell(i, old_d);
    }
    result.log.push_back({iter, current, temperature});
    temperature *= params.cooling_rate;
  }

  result.config = best_cfg;
  result.final_objective =
      grid_score(best_cfg, final_angles, final_freqs, params.beta);
  return result;
}

}  // namespace metablue

#pragma once

// Entanglement witnesses for block-diagonal Gaussian states over bands.

#include "spopo/gaussian_state.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace spopo {

/// Bands in subset A are the set bits of `mask`; B is the complement.
class Bipartition {
 public:
  Bipartition(int n_bands, std::uint32_t mask);

  [[nodiscard]] int n_bands() const { return n_; }
  [[nodiscard]] std::uint32_t mask() const { return mask_; }
  [[nodiscard]] bool in_a(int band) const { return (mask_ >> band) & 1u; }
  [[nodiscard]] Bipartition complement() const;
  /// The representative that contains band 0.
  [[nodiscard]] Bipartition canonical() const;
  [[nodiscard]] std::vector<int> subset_a() const;
  [[nodiscard]] std::vector<int> subset_b() const;

 private:
  int n_;
  std::uint32_t mask_;
};

/// All 2^(n-1) - 1 canonical bipartitions, ascending by mask.
[[nodiscard]] std::vector<Bipartition> canonical_bipartitions(int n_bands);

inline constexpr int kMaxScanBands = 20;

/// Var((x_A + x_B)/sqrt2) + Var((p_A - p_B)/sqrt2) with x_A the unit-norm
/// weighted sum over A. Empty weights mean equal weights.
[[nodiscard]] double duan(const CovarianceState& state, const Bipartition& part,
                          const Eigen::VectorXd& weights = {});

/// Product of the conditional variances Var(q_A) - Cov(q_A, q_B)^2 / Var(q_B)
/// for q = x and q = p.
[[nodiscard]] double epr_product(const CovarianceState& state, const Bipartition& part,
                                 const Eigen::VectorXd& weights = {});

/// Smallest symplectic eigenvalue of the state with p flipped on subset A.
[[nodiscard]] double ppt_min_symplectic(const CovarianceState& state, const Bipartition& part);

/// 1 / sqrt(det Cx det Cp).
[[nodiscard]] double purity(const CovarianceState& state);

struct WitnessFlags {
  bool entangled_ppt = false;
  bool entangled_epr = false;
  bool duan_violated = false;
};

struct WitnessReport {
  std::uint32_t partition_mask = 0;
  double duan = 0.0;
  double epr = 0.0;
  double ppt_nu_min = 0.0;
  WitnessFlags flags;
};

[[nodiscard]] WitnessFlags witness_flags(double duan_value, double epr_value, double ppt_nu,
                                         double epsilon);

[[nodiscard]] WitnessReport evaluate_bipartition(const CovarianceState& state, const Bipartition& part,
                                                 double epsilon = 1e-9);

struct BipartitionScan {
  int n_bands = 0;
  std::vector<WitnessReport> reports;  ///< ascending EPR product, then mask
  int ppt_entangled = 0;
  int epr_entangled = 0;
  int duan_violated = 0;

  void recount();
};

/// Every canonical bipartition. Refuses n > kMaxScanBands.
[[nodiscard]] BipartitionScan scan_bipartitions(const CovarianceState& state, double epsilon = 1e-9);

}  // namespace spopo

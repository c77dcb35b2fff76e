#include "spopo/witnesses.hpp"

#include "spopo/errors.hpp"
#include "spopo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spopo {

Bipartition::Bipartition(int n_bands, std::uint32_t mask) : n_(n_bands), mask_(mask) {
  if (n_bands < 2 || n_bands > 31) {
    throw ConfigError("a bipartition needs between 2 and 31 bands, got " + std::to_string(n_bands));
  }
  const std::uint32_t full = (1u << n_bands) - 1u;
  if (mask == 0 || (mask & ~full) != 0 || mask == full) {
    throw ConfigError("bipartition mask " + std::to_string(mask) +
                      " is not a nonempty proper subset of " + std::to_string(n_bands) + " bands");
  }
}

Bipartition Bipartition::complement() const {
  return Bipartition(n_, ((1u << n_) - 1u) & ~mask_);
}

Bipartition Bipartition::canonical() const { return in_a(0) ? *this : complement(); }

std::vector<int> Bipartition::subset_a() const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i)
    if (in_a(i)) out.push_back(i);
  return out;
}

std::vector<int> Bipartition::subset_b() const {
  std::vector<int> out;
  for (int i = 0; i < n_; ++i)
    if (!in_a(i)) out.push_back(i);
  return out;
}

std::vector<Bipartition> canonical_bipartitions(int n_bands) {
  if (n_bands < 2 || n_bands > kMaxScanBands) {
    throw ConfigError("bipartition scan supports 2.." + std::to_string(kMaxScanBands) +
                      " bands, got " + std::to_string(n_bands));
  }
  const std::uint32_t full = (1u << n_bands) - 1u;
  std::vector<Bipartition> out;
  out.reserve((std::size_t{1} << (n_bands - 1)) - 1);
  for (std::uint32_t mask = 1; mask < full; mask += 2) out.emplace_back(n_bands, mask);
  return out;
}

namespace {

void check_part(const CovarianceState& state, const Bipartition& part) {
  if (state.n_bands() != part.n_bands()) {
    throw ConfigError("bipartition is over " + std::to_string(part.n_bands()) +
                      " bands but the state has " + std::to_string(state.n_bands()));
  }
}

// Unit-norm collective weight vectors for A and B.
std::pair<Eigen::VectorXd, Eigen::VectorXd> collective(const Bipartition& part,
                                                       const Eigen::VectorXd& weights) {
  const int n = part.n_bands();
  Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(n) : weights;
  if (w.size() != n) throw ConfigError("weight vector does not match the band count");
  if ((w.array() <= 0.0).any() || !w.allFinite()) {
    throw ConfigError("collective quadrature weights must be positive");
  }
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) (part.in_a(i) ? a : b)(i) = w(i);
  return {a / a.norm(), b / b.norm()};
}

}  // namespace

double duan(const CovarianceState& state, const Bipartition& part, const Eigen::VectorXd& weights) {
  check_part(state, part);
  const auto [a, b] = collective(part, weights);
  const Eigen::VectorXd sum = a + b;
  const Eigen::VectorXd diff = a - b;
  return 0.5 * sum.dot(state.cx() * sum) + 0.5 * diff.dot(state.cp() * diff);
}

double epr_product(const CovarianceState& state, const Bipartition& part, const Eigen::VectorXd& weights) {
  check_part(state, part);
  const auto [a, b] = collective(part, weights);
  double product = 1.0;
  for (Quadrature q : {Quadrature::x, Quadrature::p}) {
    const Eigen::MatrixXd& c = state.block(q);
    const double var_a = a.dot(c * a);
    const double var_b = b.dot(c * b);
    const double cov = a.dot(c * b);
    if (!(var_b > 0.0)) {
      throw DataError(std::string("collective ") + to_string(q) +
                      " variance of subset B is not positive");
    }
    product *= var_a - cov * cov / var_b;
  }
  return product;
}

double ppt_min_symplectic(const CovarianceState& state, const Bipartition& part) {
  check_part(state, part);
  Eigen::VectorXd flip(state.n_bands());
  for (int i = 0; i < state.n_bands(); ++i) flip(i) = part.in_a(i) ? -1.0 : 1.0;
  const Eigen::MatrixXd cp_t = flip.asDiagonal() * state.cp() * flip.asDiagonal();
  return symplectic_spectrum(state.cx(), cp_t)(0);
}

double purity(const CovarianceState& state) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::LLT<Eigen::MatrixXd> lx(state.cx());
  Eigen::LLT<Eigen::MatrixXd> lp(state.cp());
  if (lx.info() != Eigen::Success || lp.info() != Eigen::Success) {
    throw PhysicalityError("purity needs positive definite covariance blocks", nan);
  }
  // log det via the Cholesky diagonals avoids overflow for many bands.
  const double log_det = 2.0 * (lx.matrixLLT().diagonal().array().log().sum() +
                                lp.matrixLLT().diagonal().array().log().sum());
  return std::exp(-0.5 * log_det);
}

WitnessFlags witness_flags(double duan_value, double epr_value, double ppt_nu, double epsilon) {
  WitnessFlags f;
  f.entangled_ppt = ppt_nu < 1.0 - epsilon;
  f.entangled_epr = epr_value < 1.0 - epsilon;
  f.duan_violated = duan_value < 2.0 - epsilon;
  return f;
}

WitnessReport evaluate_bipartition(const CovarianceState& state, const Bipartition& part, double epsilon) {
  WitnessReport r;
  r.partition_mask = part.canonical().mask();
  r.duan = duan(state, part);
  r.epr = epr_product(state, part);
  r.ppt_nu_min = ppt_min_symplectic(state, part);
  r.flags = witness_flags(r.duan, r.epr, r.ppt_nu_min, epsilon);
  return r;
}

void BipartitionScan::recount() {
  ppt_entangled = epr_entangled = duan_violated = 0;
  for (const auto& r : reports) {
    ppt_entangled += r.flags.entangled_ppt;
    epr_entangled += r.flags.entangled_epr;
    duan_violated += r.flags.duan_violated;
  }
}

BipartitionScan scan_bipartitions(const CovarianceState& state, double epsilon) {
  const auto parts = canonical_bipartitions(state.n_bands());
  BipartitionScan scan;
  scan.n_bands = state.n_bands();
  scan.reports.resize(parts.size());
  parallel_for(parts.size(), [&](std::size_t i) {
    scan.reports[i] = evaluate_bipartition(state, parts[i], epsilon);
  });
  std::sort(scan.reports.begin(), scan.reports.end(), [](const WitnessReport& a, const WitnessReport& b) {
    if (a.epr != b.epr) return a.epr < b.epr;
    return a.partition_mask < b.partition_mask;
  });
  scan.recount();
  return scan;
}

}  // namespace spopo

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "qlasso/family.hpp"

namespace qlasso {

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd column_norms;  // ||X_j||_n
  double K_X = 0.0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }

  static DesignMatrix from_matrix(Eigen::MatrixXd X);
};

// Sorted set of column indices. Stored zero-based; every serialized surface
// uses the one-based {1..p} convention.
class IndexSet {
 public:
  IndexSet() = default;
  static IndexSet from_zero_based(std::vector<Eigen::Index> indices);
  static IndexSet from_one_based(const std::vector<Eigen::Index>& indices);

  Eigen::Index size() const { return static_cast<Eigen::Index>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  bool contains(Eigen::Index j) const;
  const std::vector<Eigen::Index>& indices() const { return indices_; }
  std::vector<Eigen::Index> one_based() const;
  std::vector<Eigen::Index> complement(Eigen::Index p) const;

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }
  bool operator==(const IndexSet& other) const { return indices_ == other.indices_; }

 private:
  std::vector<Eigen::Index> indices_;
};

enum class CompatibilityMethod { exact_qp_enumeration, projected_search };

struct CompatibilityResult {
  double phi_sq = 0.0;
  Eigen::VectorXd minimizer;
  CompatibilityMethod method = CompatibilityMethod::exact_qp_enumeration;
  double certificate_gap = 0.0;
};

struct CompatibilityOptions {
  int s_max = 12;
  double gap_tolerance = 1e-9;  // relative to max(1, phi_sq)
  int max_iterations = 200000;
  int restarts = 50;  // sign patterns sampled by the projected search
  std::uint64_t seed = 0x9d2c5680u;
};

// phi^2(L, S) = min { s ||X beta||_n^2 : ||beta_S||_1 = 1, ||beta_{S^c}||_1 <= L }
CompatibilityResult compatibility_constant(const DesignMatrix& design,
                                           const IndexSet& S, double L,
                                           const CompatibilityOptions& opts = {});
// Same minimization expressed through the Gram matrix Sigma = X^T X / n.
CompatibilityResult compatibility_from_gram(const Eigen::MatrixXd& sigma,
                                            const IndexSet& S, double L,
                                            const CompatibilityOptions& opts = {});

// phi_RE^2(L, S) = min { ||X beta||_n^2 / ||beta_S||_2^2 : ||beta_{S^c}||_1 <= L ||beta_S||_1 }
double restricted_eigenvalue(const DesignMatrix& design, const IndexSet& S,
                             double L, const CompatibilityOptions& opts = {});
double restricted_eigenvalue_from_gram(const Eigen::MatrixXd& sigma,
                                       const IndexSet& S, double L,
                                       const CompatibilityOptions& opts = {});

double effective_sparsity(const DesignMatrix& design, const IndexSet& S,
                          const CompatibilityOptions& opts = {});
double effective_sparsity_from_gram(const Eigen::MatrixXd& sigma, const IndexSet& S,
                                    const CompatibilityOptions& opts = {});

struct WeightedGram {
  Eigen::MatrixXd Sigma;
  Eigen::VectorXd weights_sq;
};

Eigen::MatrixXd gram(const DesignMatrix& design);
Eigen::MatrixXd gram_from_rows(const Eigen::MatrixXd& rows,
                               const Eigen::VectorXd& multiplicities);
WeightedGram weighted_gram(const DesignMatrix& design, const Eigen::VectorXd& beta0,
                           const Family& family);
WeightedGram weighted_gram_from_rows(const Eigen::MatrixXd& rows,
                                     const Eigen::VectorXd& multiplicities,
                                     const Eigen::VectorXd& beta0,
                                     const Family& family);

// theta = max_{||tau_S||_inf <= 1} || Sigma_{2,1} Sigma_{1,1}^{-1} tau_S ||_inf,
// i.e. the maximum absolute row sum of Sigma_{2,1} Sigma_{1,1}^{-1}.
double irrepresentable_theta(const Eigen::MatrixXd& sigma, const IndexSet& S,
                             double* rcond_out = nullptr);

double gram_sup_distance(const Eigen::MatrixXd& sigma_hat,
                         const Eigen::MatrixXd& sigma);

}  // namespace qlasso

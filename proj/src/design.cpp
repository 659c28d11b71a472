#include "qlasso/design.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qlasso/rng.hpp"

namespace qlasso {

namespace {

// Euclidean projection onto { u >= 0, sum u = radius }
void project_simplex(Eigen::VectorXd& u, double radius) {
  const Eigen::Index d = u.size();
  if (d == 0) return;
  std::vector<double> sorted(u.data(), u.data() + d);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = (sorted[0] - radius);
  Eigen::Index rho = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    cumsum += sorted[j];
    const double t = (cumsum - radius) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) {
      rho = j;
      theta = t;
    }
  }
  (void)rho;
  for (Eigen::Index j = 0; j < d; ++j) u[j] = std::max(u[j] - theta, 0.0);
}

// Euclidean projection onto { ||v||_1 <= radius }
void project_l1_ball(Eigen::VectorXd& v, double radius) {
  const Eigen::Index d = v.size();
  if (d == 0) return;
  if (v.lpNorm<1>() <= radius) return;
  Eigen::VectorXd a = v.cwiseAbs();
  project_simplex(a, radius);
  for (Eigen::Index j = 0; j < d; ++j) {
    v[j] = v[j] >= 0.0 ? a[j] : -a[j];
  }
}

struct PatternProblem {
  Eigen::MatrixXd Q;  // sign-folded, ordered [S coords | complement coords]
  Eigen::Index s = 0;
  Eigen::Index c = 0;
  double L = 0.0;
  double lipschitz = 0.0;  // 2 * lambda_max(Q)
};

struct PatternSolution {
  double value = 0.0;
  Eigen::VectorXd x;
  double gap = 0.0;
};

double quad(const PatternProblem& prob, const Eigen::VectorXd& x) {
  return x.dot(prob.Q * x);
}

void project_feasible(const PatternProblem& prob, Eigen::VectorXd& x) {
  Eigen::VectorXd u = x.head(prob.s);
  Eigen::VectorXd v = x.tail(prob.c);
  project_simplex(u, 1.0);
  project_l1_ball(v, prob.L);
  x.head(prob.s) = u;
  x.tail(prob.c) = v;
}

// Frank-Wolfe gap: certified bound on q(x) - q*, exact because the linear
// minimization over simplex x l1-ball is attained at a vertex.
double fw_gap(const PatternProblem& prob, const Eigen::VectorXd& x,
              const Eigen::VectorXd& grad) {
  const auto gu = grad.head(prob.s);
  const auto gv = grad.tail(prob.c);
  double gap = gu.dot(x.head(prob.s)) - gu.minCoeff();
  if (prob.c > 0) {
    gap += gv.dot(x.tail(prob.c)) + prob.L * gv.cwiseAbs().maxCoeff();
  }
  return gap;
}

// Solve the equality-constrained QP on the face active at x and repair to
// exact feasibility. Returns true when the polished point improved.
bool polish_on_face(const PatternProblem& prob, Eigen::VectorXd& x, double& value) {
  const double act_tol = 1e-10;
  std::vector<Eigen::Index> free_u, free_v;
  for (Eigen::Index j = 0; j < prob.s; ++j) {
    if (x[j] > act_tol) free_u.push_back(j);
  }
  for (Eigen::Index k = 0; k < prob.c; ++k) {
    if (std::abs(x[prob.s + k]) > act_tol) free_v.push_back(prob.s + k);
  }
  if (free_u.empty()) return false;
  const double v_norm = x.tail(prob.c).lpNorm<1>();
  const bool tight = prob.c > 0 && v_norm >= prob.L * (1.0 - 1e-9) && !free_v.empty();

  const Eigen::Index du = static_cast<Eigen::Index>(free_u.size());
  const Eigen::Index dv = static_cast<Eigen::Index>(free_v.size());
  const Eigen::Index d = du + dv;
  const Eigen::Index m = tight ? 2 : 1;

  Eigen::MatrixXd Qff(d, d);
  std::vector<Eigen::Index> free_all(free_u);
  free_all.insert(free_all.end(), free_v.begin(), free_v.end());
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      Qff(a, b) = prob.Q(free_all[a], free_all[b]);
    }
  }
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, d);
  Eigen::VectorXd rhs_c(m);
  C.row(0).head(du).setOnes();
  rhs_c[0] = 1.0;
  if (tight) {
    for (Eigen::Index b = 0; b < dv; ++b) {
      C(1, du + b) = x[free_v[b]] >= 0.0 ? 1.0 : -1.0;
    }
    rhs_c[1] = prob.L;
  }

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(d + m, d + m);
  kkt.topLeftCorner(d, d) = 2.0 * Qff;
  kkt.topRightCorner(d, m) = C.transpose();
  kkt.bottomLeftCorner(m, d) = C;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + m);
  rhs.tail(m) = rhs_c;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);

  Eigen::VectorXd cand = Eigen::VectorXd::Zero(prob.s + prob.c);
  for (Eigen::Index a = 0; a < du; ++a) cand[free_u[a]] = sol[a];
  for (Eigen::Index b = 0; b < dv; ++b) cand[free_v[b]] = sol[du + b];

  // feasibility with a small slack, then exact repair
  for (Eigen::Index j = 0; j < prob.s; ++j) {
    if (cand[j] < -1e-8) return false;
    cand[j] = std::max(cand[j], 0.0);
  }
  if (tight) {
    for (Eigen::Index b = 0; b < dv; ++b) {
      const double want = C(1, du + b);
      if (cand[free_v[b]] * want < -1e-8) return false;
    }
  }
  const double su = cand.head(prob.s).sum();
  if (su <= 0.5) return false;
  cand.head(prob.s) /= su;
  const double sv = cand.tail(prob.c).lpNorm<1>();
  if (sv > prob.L) cand.tail(prob.c) *= prob.L / sv;

  const double cand_value = quad(prob, cand);
  if (cand_value <= value + 1e-15 * std::max(1.0, std::abs(value))) {
    x = cand;
    value = cand_value;
    return true;
  }
  return false;
}

PatternSolution solve_pattern(const PatternProblem& prob,
                              const CompatibilityOptions& opts, double s_mult) {
  const Eigen::Index dim = prob.s + prob.c;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  x.head(prob.s).setConstant(1.0 / static_cast<double>(prob.s));

  double best_value = quad(prob, x);
  Eigen::VectorXd best_x = x;

  if (prob.lipschitz <= 0.0) {  // zero quadratic form
    return {best_value, best_x, 0.0};
  }
  const double step = 1.0 / prob.lipschitz;
  // certificate threshold in the (unscaled) per-pattern objective
  auto gap_tol = [&](double value) {
    return opts.gap_tolerance * std::max(1.0, s_mult * value) / s_mult;
  };

  Eigen::VectorXd y = x;
  Eigen::VectorXd x_prev = x;
  double t = 1.0;
  double gap = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    Eigen::VectorXd z = y - step * 2.0 * (prob.Q * y);
    project_feasible(prob, z);
    const double fz = quad(prob, z);
    if (fz < best_value) {
      best_value = fz;
      best_x = z;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = z + ((t - 1.0) / t_next) * (z - x_prev);
    if (fz > quad(prob, x_prev)) {  // adaptive restart
      y = z;
      t = 1.0;
    } else {
      t = t_next;
    }
    x_prev = z;

    if ((iter & 31) == 31 || iter == opts.max_iterations - 1) {
      polish_on_face(prob, best_x, best_value);
      const Eigen::VectorXd grad = 2.0 * (prob.Q * best_x);
      gap = fw_gap(prob, best_x, grad);
      if (gap <= gap_tol(best_value)) break;
      y = best_x;
      x_prev = best_x;
      t = 1.0;
    }
  }
  if (!(gap <= gap_tol(best_value))) {
    polish_on_face(prob, best_x, best_value);
    gap = fw_gap(prob, best_x, 2.0 * (prob.Q * best_x));
  }
  return {best_value, best_x, std::max(gap, 0.0)};
}

PatternProblem build_pattern(const Eigen::MatrixXd& base,
                             const std::vector<int>& sign, Eigen::Index s,
                             Eigen::Index c, double L, double lipschitz) {
  PatternProblem prob;
  prob.s = s;
  prob.c = c;
  prob.L = L;
  prob.lipschitz = lipschitz;
  prob.Q = base;
  for (Eigen::Index i = 0; i < s; ++i) {
    if (sign[static_cast<size_t>(i)] < 0) {
      prob.Q.row(i) *= -1.0;
      prob.Q.col(i) *= -1.0;
    }
  }
  return prob;
}

struct GramOrdering {
  Eigen::MatrixXd base;  // Gram reordered as [S | complement]
  std::vector<Eigen::Index> order;
  Eigen::Index s = 0;
  Eigen::Index c = 0;
  double lambda_max = 0.0;
};

GramOrdering order_gram(const Eigen::MatrixXd& sigma, const IndexSet& S) {
  const Eigen::Index p = sigma.rows();
  if (sigma.cols() != p) throw std::invalid_argument("Gram matrix must be square");
  GramOrdering g;
  g.s = S.size();
  for (Eigen::Index j : S) {
    if (j < 0 || j >= p) throw std::invalid_argument("index set out of range");
    g.order.push_back(j);
  }
  for (Eigen::Index j : S.complement(p)) g.order.push_back(j);
  g.c = p - g.s;
  g.base.resize(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      g.base(a, b) = sigma(g.order[static_cast<size_t>(a)],
                           g.order[static_cast<size_t>(b)]);
    }
  }
  g.base = 0.5 * (g.base + g.base.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.base,
                                                    Eigen::EigenvaluesOnly);
  g.lambda_max = std::max(es.eigenvalues().maxCoeff(), 0.0);
  return g;
}

std::vector<std::vector<int>> enumerate_signs(Eigen::Index s) {
  // first coordinate pinned to +1: beta and -beta have equal objective
  std::vector<std::vector<int>> all;
  const std::uint64_t count = s > 1 ? (1ULL << (s - 1)) : 1;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    std::vector<int> sign(static_cast<size_t>(s), 1);
    for (Eigen::Index i = 1; i < s; ++i) {
      if (mask & (1ULL << (i - 1))) sign[static_cast<size_t>(i)] = -1;
    }
    all.push_back(std::move(sign));
  }
  return all;
}

std::vector<std::vector<int>> sample_signs(Eigen::Index s, int restarts,
                                           std::uint64_t seed) {
  rng::Stream stream(seed, 0);
  std::vector<std::vector<int>> all;
  for (int r = 0; r < restarts; ++r) {
    std::vector<int> sign(static_cast<size_t>(s));
    for (auto& v : sign) v = stream.uniform() < 0.5 ? -1 : 1;
    sign[0] = 1;
    all.push_back(std::move(sign));
  }
  return all;
}

// ---- restricted eigenvalue -------------------------------------------------

// minimize z'Pz / z'Mz with P, M PSD (M possibly singular); directions in the
// null space of M are optimized out through a Schur complement.
bool min_generalized_ratio(const Eigen::MatrixXd& P, const Eigen::MatrixXd& M,
                           double& value, Eigen::VectorXd& z) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(M);
  if (em.info() != Eigen::Success) return false;
  const auto& evs = em.eigenvalues();
  const double emax = evs.maxCoeff();
  if (!(emax > 0.0)) return false;
  std::vector<Eigen::Index> pos, nul;
  for (Eigen::Index i = 0; i < evs.size(); ++i) {
    if (evs[i] > 1e-12 * emax) {
      pos.push_back(i);
    } else {
      nul.push_back(i);
    }
  }
  const Eigen::Index d1 = static_cast<Eigen::Index>(pos.size());
  const Eigen::Index d0 = static_cast<Eigen::Index>(nul.size());
  Eigen::MatrixXd U1(M.rows(), d1), U0(M.rows(), d0);
  Eigen::VectorXd lam(d1);
  for (Eigen::Index i = 0; i < d1; ++i) {
    U1.col(i) = em.eigenvectors().col(pos[static_cast<size_t>(i)]);
    lam[i] = evs[pos[static_cast<size_t>(i)]];
  }
  for (Eigen::Index i = 0; i < d0; ++i) {
    U0.col(i) = em.eigenvectors().col(nul[static_cast<size_t>(i)]);
  }
  const Eigen::VectorXd lam_isqrt = lam.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd P11 = U1.transpose() * P * U1;
  Eigen::MatrixXd reduced;
  Eigen::MatrixXd back;  // null-space correction applied to the eigenvector
  if (d0 > 0) {
    const Eigen::MatrixXd P00 = U0.transpose() * P * U0;
    const Eigen::MatrixXd P01 = U0.transpose() * P * U1;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(P00);
    back = -cod.solve(P01);
    reduced = P11 + P01.transpose() * back;
  } else {
    reduced = P11;
  }
  Eigen::MatrixXd G = lam_isqrt.asDiagonal() * reduced * lam_isqrt.asDiagonal();
  G = 0.5 * (G + G.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(G);
  if (eg.info() != Eigen::Success) return false;
  Eigen::Index which = 0;
  eg.eigenvalues().minCoeff(&which);
  value = eg.eigenvalues()[which];
  const Eigen::VectorXd w = lam_isqrt.asDiagonal() * eg.eigenvectors().col(which);
  z = U1 * w;
  if (d0 > 0) z += U0 * (back * w);
  return true;
}

double rayleigh(const PatternProblem& prob, const Eigen::VectorXd& x) {
  const double den = x.head(prob.s).squaredNorm();
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return quad(prob, x) / den;
}

// feasibility on the cone face for the Rayleigh problem, then renormalize to
// the slice sum(u) = 1
bool repair_re_point(const PatternProblem& prob, Eigen::VectorXd& x) {
  double su = x.head(prob.s).sum();
  if (std::abs(su) < 1e-12) return false;
  if (su < 0.0) x = -x;
  for (Eigen::Index j = 0; j < prob.s; ++j) {
    if (x[j] < -1e-8 * std::abs(su)) return false;
    x[j] = std::max(x[j], 0.0);
  }
  su = x.head(prob.s).sum();
  if (su <= 0.0) return false;
  x /= su;
  const double sv = x.tail(prob.c).lpNorm<1>();
  if (sv > prob.L * (1.0 + 1e-8)) return false;
  if (sv > prob.L) x.tail(prob.c) *= prob.L / sv;
  return true;
}

bool re_polish_on_face(const PatternProblem& prob, Eigen::VectorXd& x,
                       double& value) {
  const double act_tol = 1e-9;
  std::vector<Eigen::Index> free_all;
  Eigen::Index du = 0;
  for (Eigen::Index j = 0; j < prob.s; ++j) {
    if (x[j] > act_tol) {
      free_all.push_back(j);
      ++du;
    }
  }
  std::vector<Eigen::Index> free_v;
  for (Eigen::Index k = prob.s; k < prob.s + prob.c; ++k) {
    if (std::abs(x[k]) > act_tol) free_v.push_back(k);
  }
  free_all.insert(free_all.end(), free_v.begin(), free_v.end());
  const Eigen::Index d = static_cast<Eigen::Index>(free_all.size());
  if (du == 0 || d == 0) return false;

  const double vsum = x.tail(prob.c).lpNorm<1>();
  const double usum = x.head(prob.s).sum();
  const bool tight = !free_v.empty() && vsum >= prob.L * usum * (1.0 - 1e-8);

  Eigen::MatrixXd Qff(d, d), Dff = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      Qff(a, b) = prob.Q(free_all[a], free_all[b]);
    }
    if (a < du) Dff(a, a) = 1.0;
  }

  Eigen::MatrixXd basis;
  if (tight) {
    // homogeneous face constraint: sum_k sgn_k v_k - L sum_j u_j = 0
    Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, d);
    for (Eigen::Index a = 0; a < du; ++a) row(0, a) = -prob.L;
    for (Eigen::Index b = du; b < d; ++b) {
      row(0, b) = x[free_all[b]] >= 0.0 ? 1.0 : -1.0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(row);
    basis = lu.kernel();
    if (basis.cols() == 0) return false;
  } else {
    basis = Eigen::MatrixXd::Identity(d, d);
  }

  const Eigen::MatrixXd P = basis.transpose() * Qff * basis;
  const Eigen::MatrixXd M = basis.transpose() * Dff * basis;
  double cand_value;
  Eigen::VectorXd zc;
  if (!min_generalized_ratio(P, M, cand_value, zc)) return false;
  if (!(cand_value < value - 1e-14 * std::max(1.0, std::abs(value)))) return false;

  Eigen::VectorXd cand = Eigen::VectorXd::Zero(prob.s + prob.c);
  const Eigen::VectorXd xf = basis * zc;
  for (Eigen::Index a = 0; a < d; ++a) cand[free_all[a]] = xf[a];
  if (!repair_re_point(prob, cand)) return false;
  const double exact = rayleigh(prob, cand);
  if (exact < value) {
    value = exact;
    x = cand;
    return true;
  }
  return false;
}

double solve_re_pattern(const PatternProblem& prob, const CompatibilityOptions& opts,
                        const Eigen::VectorXd& warm_start, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> starts;
  if (warm_start.size() == prob.s + prob.c) starts.push_back(warm_start);
  Eigen::VectorXd uniform = Eigen::VectorXd::Zero(prob.s + prob.c);
  uniform.head(prob.s).setConstant(1.0 / static_cast<double>(prob.s));
  starts.push_back(uniform);
  rng::Stream stream(seed, 17);
  for (int r = 0; r < 3; ++r) {
    Eigen::VectorXd x(prob.s + prob.c);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = stream.uniform() - 0.3;
    project_feasible(prob, x);
    if (x.head(prob.s).sum() > 1e-9) starts.push_back(x);
  }

  double best = std::numeric_limits<double>::infinity();
  for (auto& x0 : starts) {
    Eigen::VectorXd x = x0;
    double value = rayleigh(prob, x);
    double eta = prob.lipschitz > 0.0 ? 1.0 / prob.lipschitz : 1.0;
    const int iters = std::min(opts.max_iterations, 2000);
    for (int it = 0; it < iters; ++it) {
      const double den = x.head(prob.s).squaredNorm();
      Eigen::VectorXd grad = 2.0 * (prob.Q * x);
      grad.head(prob.s) -= 2.0 * value * x.head(prob.s);
      grad /= den;
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Eigen::VectorXd xn = x - eta * grad;
        project_feasible(prob, xn);
        if (xn.head(prob.s).sum() < 1e-12) break;
        const double vn = rayleigh(prob, xn);
        if (vn < value - 1e-14) {
          x = xn;
          value = vn;
          eta *= 1.6;
          moved = true;
          break;
        }
        eta *= 0.5;
      }
      if (!moved) break;
    }
    re_polish_on_face(prob, x, value);
    best = std::min(best, value);
  }
  return best;
}

CompatibilityResult compat_impl(const GramOrdering& g, double L,
                                const CompatibilityOptions& opts,
                                std::vector<Eigen::VectorXd>* pattern_minimizers,
                                std::vector<std::vector<int>>* pattern_signs) {
  const Eigen::Index s = g.s;
  const double sd = static_cast<double>(s);
  const bool exact = s <= opts.s_max;
  const auto signs = exact ? enumerate_signs(s) : sample_signs(s, opts.restarts, opts.seed);

  CompatibilityResult result;
  result.method = exact ? CompatibilityMethod::exact_qp_enumeration
                        : CompatibilityMethod::projected_search;
  double best_q = std::numeric_limits<double>::infinity();
  double worst_gap = 0.0;
  Eigen::VectorXd best_x;
  std::vector<int> best_sign;

  for (const auto& sign : signs) {
    PatternProblem prob =
        build_pattern(g.base, sign, s, g.c, L, 2.0 * g.lambda_max);
    PatternSolution sol = solve_pattern(prob, opts, sd);
    if (pattern_minimizers) pattern_minimizers->push_back(sol.x);
    if (pattern_signs) pattern_signs->push_back(sign);
    worst_gap = std::max(worst_gap, sol.gap);
    if (sol.value < best_q) {
      best_q = sol.value;
      best_x = sol.x;
      best_sign = sign;
    }
  }

  result.phi_sq = std::max(sd * best_q, 0.0);
  result.certificate_gap = sd * worst_gap;
  result.minimizer = Eigen::VectorXd::Zero(g.base.rows());
  for (Eigen::Index i = 0; i < s; ++i) {
    result.minimizer[g.order[static_cast<size_t>(i)]] =
        best_sign[static_cast<size_t>(i)] * best_x[i];
  }
  for (Eigen::Index k = 0; k < g.c; ++k) {
    result.minimizer[g.order[static_cast<size_t>(s + k)]] = best_x[s + k];
  }
  return result;
}

void validate_set(const IndexSet& S, Eigen::Index p) {
  if (S.empty()) throw std::invalid_argument("index set must be nonempty");
  for (Eigen::Index j : S) {
    if (j < 0 || j >= p) throw std::invalid_argument("index set out of range");
  }
}

}  // namespace

DesignMatrix DesignMatrix::from_matrix(Eigen::MatrixXd X) {
  if (X.rows() < 1) throw std::invalid_argument("design needs at least one row");
  if (X.cols() < 2) throw std::invalid_argument("design needs at least two columns");
  if (!X.allFinite()) throw std::invalid_argument("design entries must be finite");
  DesignMatrix d;
  d.K_X = X.cwiseAbs().maxCoeff();
  d.column_norms =
      (X.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt();
  d.X = std::move(X);
  return d;
}

IndexSet IndexSet::from_zero_based(std::vector<Eigen::Index> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (!indices.empty() && indices.front() < 0) {
    throw std::invalid_argument("negative column index");
  }
  IndexSet s;
  s.indices_ = std::move(indices);
  return s;
}

IndexSet IndexSet::from_one_based(const std::vector<Eigen::Index>& indices) {
  std::vector<Eigen::Index> shifted;
  shifted.reserve(indices.size());
  for (Eigen::Index j : indices) {
    if (j < 1) throw std::invalid_argument("one-based index must be >= 1");
    shifted.push_back(j - 1);
  }
  return from_zero_based(std::move(shifted));
}

bool IndexSet::contains(Eigen::Index j) const {
  return std::binary_search(indices_.begin(), indices_.end(), j);
}

std::vector<Eigen::Index> IndexSet::one_based() const {
  std::vector<Eigen::Index> out;
  out.reserve(indices_.size());
  for (Eigen::Index j : indices_) out.push_back(j + 1);
  return out;
}

std::vector<Eigen::Index> IndexSet::complement(Eigen::Index p) const {
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<size_t>(p) - indices_.size());
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!contains(j)) out.push_back(j);
  }
  return out;
}

Eigen::MatrixXd gram(const DesignMatrix& design) {
  return design.X.transpose() * design.X / static_cast<double>(design.n());
}

Eigen::MatrixXd gram_from_rows(const Eigen::MatrixXd& rows,
                               const Eigen::VectorXd& multiplicities) {
  if (rows.rows() != multiplicities.size()) {
    throw std::invalid_argument("row/multiplicity size mismatch");
  }
  const double total = multiplicities.sum();
  if (!(total > 0.0)) throw std::invalid_argument("multiplicities must sum > 0");
  return rows.transpose() * (multiplicities / total).asDiagonal() * rows;
}

CompatibilityResult compatibility_from_gram(const Eigen::MatrixXd& sigma,
                                            const IndexSet& S, double L,
                                            const CompatibilityOptions& opts) {
  validate_set(S, sigma.rows());
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  GramOrdering g = order_gram(sigma, S);
  return compat_impl(g, L, opts, nullptr, nullptr);
}

CompatibilityResult compatibility_constant(const DesignMatrix& design,
                                           const IndexSet& S, double L,
                                           const CompatibilityOptions& opts) {
  return compatibility_from_gram(gram(design), S, L, opts);
}

double restricted_eigenvalue_from_gram(const Eigen::MatrixXd& sigma,
                                       const IndexSet& S, double L,
                                       const CompatibilityOptions& opts) {
  validate_set(S, sigma.rows());
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  GramOrdering g = order_gram(sigma, S);
  std::vector<Eigen::VectorXd> minimizers;
  std::vector<std::vector<int>> signs;
  compat_impl(g, L, opts, &minimizers, &signs);

  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < signs.size(); ++i) {
    PatternProblem prob =
        build_pattern(g.base, signs[i], g.s, g.c, L, 2.0 * g.lambda_max);
    best = std::min(best, solve_re_pattern(prob, opts, minimizers[i],
                                           opts.seed + 1 + i));
  }
  return std::max(best, 0.0);
}

double restricted_eigenvalue(const DesignMatrix& design, const IndexSet& S,
                             double L, const CompatibilityOptions& opts) {
  return restricted_eigenvalue_from_gram(gram(design), S, L, opts);
}

double effective_sparsity_from_gram(const Eigen::MatrixXd& sigma, const IndexSet& S,
                                    const CompatibilityOptions& opts) {
  const CompatibilityResult r = compatibility_from_gram(sigma, S, 3.0, opts);
  // zero test relative to the Gram scale so rescaled designs keep working
  const double scale = std::max(sigma.diagonal().maxCoeff(), 0.0);
  if (!(r.phi_sq > 1e-12 * std::max(scale, 1e-290))) {
    throw condition_failure("compatibility fails: phi^2(3, S) = 0");
  }
  return static_cast<double>(S.size()) / r.phi_sq;
}

double effective_sparsity(const DesignMatrix& design, const IndexSet& S,
                          const CompatibilityOptions& opts) {
  return effective_sparsity_from_gram(gram(design), S, opts);
}

WeightedGram weighted_gram_from_rows(const Eigen::MatrixXd& rows,
                                     const Eigen::VectorXd& multiplicities,
                                     const Eigen::VectorXd& beta0,
                                     const Family& family) {
  if (!family.quasi) {
    throw std::invalid_argument("weighted Gram requires a quasi-likelihood family");
  }
  if (rows.cols() != beta0.size()) {
    throw std::invalid_argument("beta0 has wrong dimension");
  }
  const QuasiFamily& q = *family.quasi;
  const Eigen::VectorXd f = rows * beta0;
  Eigen::VectorXd w2(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double hz = q.h(f[i]);
    const double vg = q.variance(q.inverse_link(f[i]));
    w2[i] = hz * hz * vg;
  }
  const double total = multiplicities.sum();
  WeightedGram out;
  out.weights_sq = w2;
  out.Sigma = rows.transpose() *
              (w2.cwiseProduct(multiplicities) / total).asDiagonal() * rows;
  return out;
}

WeightedGram weighted_gram(const DesignMatrix& design, const Eigen::VectorXd& beta0,
                           const Family& family) {
  return weighted_gram_from_rows(design.X,
                                 Eigen::VectorXd::Ones(design.n()), beta0, family);
}

double irrepresentable_theta(const Eigen::MatrixXd& sigma, const IndexSet& S,
                             double* rcond_out) {
  validate_set(S, sigma.rows());
  const Eigen::Index p = sigma.rows();
  const Eigen::Index s = S.size();
  const auto comp = S.complement(p);
  if (comp.empty()) {
    if (rcond_out) *rcond_out = 1.0;
    return 0.0;  // empty complement
  }
  Eigen::MatrixXd s11(s, s);
  Eigen::MatrixXd s21(static_cast<Eigen::Index>(comp.size()), s);
  const auto& idx = S.indices();
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) {
      s11(a, b) = sigma(idx[static_cast<size_t>(a)], idx[static_cast<size_t>(b)]);
    }
    for (size_t r = 0; r < comp.size(); ++r) {
      s21(static_cast<Eigen::Index>(r), a) =
          sigma(comp[r], idx[static_cast<size_t>(a)]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s11);
  const double emin = es.eigenvalues().minCoeff();
  const double emax = es.eigenvalues().maxCoeff();
  const double rcond = emax > 0.0 ? emin / emax : 0.0;
  if (rcond_out) *rcond_out = rcond;
  if (!(emin > 0.0) || rcond < 1e-12) {
    throw std::runtime_error(
        "Sigma_{1,1} is numerically singular (smallest eigenvalue " +
        std::to_string(emin) + ")");
  }
  const Eigen::MatrixXd A = s11.ldlt().solve(s21.transpose()).transpose();
  return A.cwiseAbs().rowwise().sum().maxCoeff();
}

double gram_sup_distance(const Eigen::MatrixXd& sigma_hat,
                         const Eigen::MatrixXd& sigma) {
  if (sigma_hat.rows() != sigma.rows() || sigma_hat.cols() != sigma.cols()) {
    throw std::invalid_argument("gram_sup_distance: shape mismatch");
  }
  return (sigma_hat - sigma).cwiseAbs().maxCoeff();
}

}  // namespace qlasso

#pragma once

// Hierarchical sparse prompt coding.
//
// Each query row e_q is coded against a fixed prompt dictionary E_l (K x d)
// by minimizing
//
//   F(P) = 1/2 ||E_q - P E_l||_F^2 + lambda ||P||_1
//
// with iterative soft thresholding: a gradient step of size mu/L on the
// smooth part, L = largest eigenvalue of E_l E_l^T, followed by shrinkage
// with threshold lambda * mu / L. Stages chain by feeding each stage's
// reconstruction P* E_l to the next stage as its query.

#include "adkit/embedding.hpp"
#include "adkit/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace adkit {

using Matrix = Eigen::MatrixXd;

inline double soft_threshold(double x, double tau)
{
  const double m = std::abs(x) - tau;
  if (m <= 0.0)
    return 0.0;
  return x > 0.0 ? m : -m;
}

inline Matrix soft_threshold(const Matrix& x, double tau)
{
  return x.unaryExpr([tau](double v) { return soft_threshold(v, tau); });
}

// Largest eigenvalue of E_l E_l^T by power iteration on the smaller Gram
// matrix. Stops when the eigen-residual or the change in the Rayleigh
// quotient drops below rel_tol * estimate.
inline double spectral_norm(const Matrix& dictionary,
                            double rel_tol = 1e-8,
                            std::size_t max_iter = 10000)
{
  if (dictionary.size() == 0)
    throw DimensionError("dictionary is empty");
  const Matrix gram = dictionary.rows() <= dictionary.cols()
                        ? Matrix(dictionary * dictionary.transpose())
                        : Matrix(dictionary.transpose() * dictionary);
  const auto n = gram.rows();
  if (gram.cwiseAbs().maxCoeff() == 0.0)
    return 0.0;

  // Deterministic start with unequal entries, so it is not orthogonal to
  // the top eigenvector of any diagonal or permutation-structured Gram.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = 1.0 + double(i + 1) / double(n + 1);
  v.normalize();

  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = gram * v;
    const double previous = estimate;
    estimate = v.dot(w);
    const double residual = (w - estimate * v).norm();
    if (residual <= rel_tol * std::abs(estimate) ||
        (it > 0 && std::abs(estimate - previous) <= rel_tol * std::abs(estimate)))
      return estimate;
    const double wn = w.norm();
    if (wn == 0.0)
      return 0.0;
    v = w / wn;
  }
  throw ConvergenceError("power iteration did not converge in " +
                         std::to_string(max_iter) + " iterations");
}

inline Matrix residual(const Matrix& queries,
                       const Matrix& codes,
                       const Matrix& dictionary)
{
  if (codes.rows() != queries.rows() || codes.cols() != dictionary.rows() ||
      dictionary.cols() != queries.cols())
    throw DimensionError("residual: shapes not conformable (E_q " +
                         std::to_string(queries.rows()) + "x" +
                         std::to_string(queries.cols()) + ", P " +
                         std::to_string(codes.rows()) + "x" +
                         std::to_string(codes.cols()) + ", E_l " +
                         std::to_string(dictionary.rows()) + "x" +
                         std::to_string(dictionary.cols()) + ")");
  return queries - codes * dictionary;
}

inline double lasso_objective(const Matrix& queries,
                              const Matrix& codes,
                              const Matrix& dictionary,
                              double lambda)
{
  return 0.5 * residual(queries, codes, dictionary).squaredNorm() +
         lambda * codes.cwiseAbs().sum();
}

struct SparseCodeProblem
{
  Matrix queries;    // B x d
  Matrix dictionary; // K x d
  double lambda = 0.1;
  double step = 1.0; // multiplier on 1/L, in (0, 1]
  std::size_t max_iter = 200;
  double tol = 1e-8;

  void validate() const
  {
    if (queries.cols() != dictionary.cols())
      throw DimensionError("query dim " + std::to_string(queries.cols()) +
                           " != dictionary dim " +
                           std::to_string(dictionary.cols()));
    if (dictionary.rows() == 0 || queries.cols() == 0)
      throw DimensionError("empty dictionary");
    if (!std::isfinite(lambda) || lambda < 0.0)
      throw ArgumentError("lambda must be finite and >= 0");
    if (!std::isfinite(step) || step <= 0.0 || step > 1.0)
      throw ArgumentError("step multiplier must lie in (0, 1]");
    if (max_iter == 0)
      throw ArgumentError("max_iter must be >= 1");
    if (!std::isfinite(tol) || tol <= 0.0)
      throw ArgumentError("tol must be finite and > 0");
    if (!queries.allFinite() || !dictionary.allFinite())
      throw DataError("non-finite value in sparse coding inputs");
  }
};

inline constexpr double zero_code_threshold = 1e-12;

inline double sparsity(const Matrix& codes)
{
  if (codes.size() == 0)
    return 0.0;
  const auto zeros = (codes.array().abs() < zero_code_threshold).count();
  return double(zeros) / double(codes.size());
}

struct SparseCodeState
{
  Matrix codes;    // P, B x K
  Matrix residual; // E_q - P E_l
  std::vector<double> objective_trace; // F(P_0 = 0), F(P_1), ...
  double lipschitz = 0.0;             // largest eigenvalue of E_l E_l^T
  std::size_t iterations = 0;
  bool converged = false;
  double fixed_point_residual = 0.0; // max |P - prox step(P)|

  double objective() const { return objective_trace.back(); }
  double sparsity() const { return adkit::sparsity(codes); }
};

// One proximal-gradient step from `codes`.
inline Matrix ista_step(const Matrix& codes,
                        const Matrix& queries,
                        const Matrix& dictionary,
                        double lambda,
                        double step_size)
{
  const Matrix grad = -(queries - codes * dictionary) * dictionary.transpose();
  return soft_threshold(codes - step_size * grad, lambda * step_size);
}

inline SparseCodeState ista_solve(const SparseCodeProblem& problem)
{
  problem.validate();
  const auto& eq = problem.queries;
  const auto& el = problem.dictionary;

  SparseCodeState st;
  st.codes = Matrix::Zero(eq.rows(), el.rows());
  st.lipschitz = spectral_norm(el);
  st.objective_trace.push_back(lasso_objective(eq, st.codes, el, problem.lambda));

  if (st.lipschitz == 0.0) {
    // Zero dictionary: the smooth part is constant and P = 0 is optimal.
    st.residual = eq;
    st.converged = true;
    return st;
  }

  const double step_size = problem.step / st.lipschitz;
  for (std::size_t it = 0; it < problem.max_iter; ++it) {
    Matrix next = ista_step(st.codes, eq, el, problem.lambda, step_size);
    const double obj = lasso_objective(eq, next, el, problem.lambda);
    const double change = st.objective_trace.back() - obj;
    st.codes = std::move(next);
    st.objective_trace.push_back(obj);
    st.iterations = it + 1;
    if (std::abs(change) < problem.tol) {
      st.converged = true;
      break;
    }
  }
  st.residual = residual(eq, st.codes, el);
  st.fixed_point_residual =
    (st.codes - ista_step(st.codes, eq, el, problem.lambda, step_size))
      .cwiseAbs()
      .maxCoeff();
  return st;
}

// ---------------------------------------------------------------------------
// Staged application

struct SparseStage
{
  Matrix dictionary;
  double lambda = 0.1;
};

struct SolverSettings
{
  double step = 1.0;
  std::size_t max_iter = 200;
  double tol = 1e-8;
};

struct StageDiagnostics
{
  double lambda = 0.0;
  double sparsity = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

struct HierarchicalResult
{
  Matrix embeddings; // final reconstruction, B x d
  std::vector<StageDiagnostics> stages;
};

inline HierarchicalResult hierarchical_apply(const std::vector<SparseStage>& stages,
                                             const Matrix& queries,
                                             const SolverSettings& settings = {})
{
  if (stages.empty())
    throw ArgumentError("hierarchical_apply needs at least one stage");
  HierarchicalResult out;
  Matrix current = queries;
  for (const auto& s : stages) {
    SparseCodeProblem p{ current,     s.dictionary,       s.lambda,
                         settings.step, settings.max_iter, settings.tol };
    const auto st = ista_solve(p);
    current = st.codes * s.dictionary;
    out.stages.push_back(
      { s.lambda, st.sparsity(), st.iterations, st.converged, st.objective_trace });
  }
  out.embeddings = std::move(current);
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary refinement (alternating minimization)

// Gradient of the smooth term with respect to the dictionary:
// d/dE_l 1/2 ||E_q - P E_l||^2 = -P^T (E_q - P E_l).
inline Matrix dictionary_gradient(const Matrix& queries,
                                  const Matrix& codes,
                                  const Matrix& dictionary)
{
  return -codes.transpose() * residual(queries, codes, dictionary);
}

struct DictionaryLearningResult
{
  Matrix dictionary;
  Matrix codes;
  std::vector<double> objective_trace; // after each code solve
};

// Alternates a full code solve with one gradient step on the dictionary,
// step 1 / largest eigenvalue of P^T P.
inline DictionaryLearningResult refine_dictionary(const Matrix& queries,
                                                  Matrix dictionary,
                                                  double lambda,
                                                  std::size_t outer_iters,
                                                  const SolverSettings& settings = {})
{
  DictionaryLearningResult out;
  for (std::size_t it = 0; it < outer_iters; ++it) {
    SparseCodeProblem p{ queries,       dictionary,        lambda,
                         settings.step, settings.max_iter, settings.tol };
    auto st = ista_solve(p);
    out.objective_trace.push_back(st.objective());
    out.codes = st.codes;
    const double l = spectral_norm(st.codes.transpose());
    if (l == 0.0)
      break;
    dictionary -= dictionary_gradient(queries, st.codes, dictionary) / l;
  }
  out.dictionary = std::move(dictionary);
  return out;
}

// ---------------------------------------------------------------------------
// Conversions

inline Matrix to_matrix(const EmbeddingMatrix& m)
{
  Matrix out(m.count(), m.dim());
  for (std::size_t r = 0; r < m.count(); ++r)
    for (std::size_t c = 0; c < m.dim(); ++c)
      out(r, c) = m.row(r)[c];
  return out;
}

inline EmbeddingMatrix to_embeddings(const Matrix& m)
{
  std::vector<float> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data.push_back(static_cast<float>(m(r, c)));
  return { static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.rows()), std::move(data) };
}

} // namespace adkit

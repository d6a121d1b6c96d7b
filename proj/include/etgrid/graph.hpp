#pragma once

// Directed communication topology between generators, its Laplacian/pinning
// algebra, and the spectral ratio that bounds the admissible event-checking
// period and trigger threshold (h/2 + sigma < 1/lambda).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace etgrid {

struct NotStronglyConnected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weighted digraph over the generators. adjacency(i, j) > 0 means DG j sends
// its broadcasts to DG i (j is an in-neighbour of i). pinning(i) > 0 means
// DG i hears the reference directly.
struct CommGraph {
  Eigen::MatrixXd adjacency;
  Eigen::VectorXd pinning;

  int size() const { return static_cast<int>(pinning.size()); }

  void validate() const {
    const auto n = pinning.size();
    if (n < 1) throw std::invalid_argument("graph: need at least one agent");
    if (adjacency.rows() != n || adjacency.cols() != n)
      throw std::invalid_argument("graph: adjacency must be n x n with n = pinning size");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adjacency(i, i) != 0.0)
        throw std::invalid_argument("graph: adjacency diagonal must be zero");
      for (Eigen::Index j = 0; j < n; ++j)
        if (!(adjacency(i, j) >= 0.0))
          throw std::invalid_argument("graph: adjacency entries must be >= 0");
      if (!(pinning(i) >= 0.0))
        throw std::invalid_argument("graph: pinning entries must be >= 0");
    }
    if (pinning.maxCoeff() <= 0.0)
      throw std::invalid_argument("graph: at least one pinning gain must be > 0");
  }
};

// L with l_ii = sum_{j != i} a_ij and l_ij = -a_ij; row sums are zero.
inline Eigen::MatrixXd laplacian(const CommGraph& graph) {
  const auto n = graph.adjacency.rows();
  Eigen::MatrixXd lap = -graph.adjacency;
  for (Eigen::Index i = 0; i < n; ++i) {
    lap(i, i) = 0.0;
    lap(i, i) = graph.adjacency.row(i).sum();
  }
  return lap;
}

// Every node reaches every other node along directed edges
// (edge j -> i exists iff a_ij > 0).
inline bool is_strongly_connected(const CommGraph& graph) {
  const int n = graph.size();
  auto reaches_all = [&](bool forward) {
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        // forward: successors of u are nodes u sends to, i.e. a_vu > 0
        const double a = forward ? graph.adjacency(v, u) : graph.adjacency(u, v);
        if (a > 0.0 && !seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reaches_all(true) && reaches_all(false);
}

// Positive left null vector of the Laplacian (w L = 0), normalised so that
// sum w_i = n. Exists and is unique (up to scale) for strongly connected
// digraphs.
inline Eigen::VectorXd left_perron_vector(const Eigen::MatrixXd& lap) {
  const auto n = lap.rows();
  if (n < 1 || lap.cols() != n)
    throw DimensionMismatch("left_perron_vector: laplacian must be square");
  if (n == 1) return Eigen::VectorXd::Ones(1);

  const double scale = std::max(1.0, lap.cwiseAbs().maxCoeff());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lap.transpose() / scale);
  lu.setThreshold(1e-10);
  if (lu.dimensionOfKernel() != 1)
    throw NotStronglyConnected("left_perron_vector: null space of L^T is not one-dimensional");

  Eigen::VectorXd w = lu.kernel().col(0);
  if (w.sum() < 0.0) w = -w;
  if ((w.array() <= 0.0).any())
    throw NotStronglyConnected("left_perron_vector: null vector is not strictly positive");
  w *= static_cast<double>(n) / w.sum();

  if ((w.transpose() * lap).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw NotStronglyConnected("left_perron_vector: residual of w L exceeds tolerance");
  return w;
}

// True iff W L + L^T W is positive semidefinite (eigenvalues >= -1e-9).
inline bool lemma1_check(const Eigen::MatrixXd& lap, const Eigen::VectorXd& w) {
  const auto n = lap.rows();
  if (lap.cols() != n || w.size() != n)
    throw DimensionMismatch("lemma1_check: dimensions of L and w disagree");
  const Eigen::MatrixXd bigW = w.asDiagonal();
  const Eigen::MatrixXd h = bigW * lap + lap.transpose() * bigW;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-9;
}

// Largest generalized eigenvalue of (A^T W A, sym(W A)), i.e. the maximum of
// the Rayleigh ratio  x' A'WA x / x' WA x  over unit vectors. A shared null
// space of the two forms (the consensus direction when A is an unpinned
// Laplacian) is deflated; a denominator that is indefinite, or null where the
// numerator is not, raises NotPositiveDefinite.
inline double compute_lambda(const Eigen::MatrixXd& a, const Eigen::MatrixXd& bigW) {
  const auto n = a.rows();
  if (a.cols() != n || bigW.rows() != n || bigW.cols() != n)
    throw DimensionMismatch("compute_lambda: A and W must be square of equal size");

  const Eigen::MatrixXd s = a.transpose() * bigW * a;
  const Eigen::MatrixXd b = 0.5 * (bigW * a + a.transpose() * bigW);

  const double s_tol = 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff());
  const double b_tol = 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_b(b);
  if (es_b.eigenvalues().minCoeff() < -b_tol)
    throw NotPositiveDefinite("compute_lambda: denominator form W A + A^T W is indefinite");

  // split eigenvectors of B into null directions and the positive subspace
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (es_b.eigenvalues()(k) > b_tol) {
      keep.push_back(k);
    } else {
      const Eigen::VectorXd v = es_b.eigenvectors().col(k);
      if (v.dot(s * v) > s_tol)
        throw NotPositiveDefinite(
            "compute_lambda: numerator does not vanish on the denominator's null space");
    }
  }
  if (keep.empty())
    throw NotPositiveDefinite("compute_lambda: denominator form is identically zero");

  Eigen::MatrixXd q(n, static_cast<Eigen::Index>(keep.size()));
  for (size_t c = 0; c < keep.size(); ++c) q.col(static_cast<Eigen::Index>(c)) = es_b.eigenvectors().col(keep[c]);

  const Eigen::MatrixXd s_r = q.transpose() * s * q;
  const Eigen::MatrixXd b_r = q.transpose() * b * q;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(s_r, Eigen::EigenvaluesOnly);
  if (es_s.eigenvalues().minCoeff() < s_tol)
    throw NotPositiveDefinite("compute_lambda: A^T W A is not positive definite");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(s_r, b_r, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  return ges.eigenvalues().maxCoeff();
}

// Strict admissibility test for the event-checking period and threshold.
inline bool check_theorem1_condition(double h, double sigma, double lambda) {
  if (!(h > 0.0)) throw std::invalid_argument("check_theorem1_condition: h must be > 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("check_theorem1_condition: sigma must be >= 0");
  if (!(lambda > 0.0)) throw std::invalid_argument("check_theorem1_condition: lambda must be > 0");
  return h / 2.0 + sigma < 1.0 / lambda;
}

// Spectral quantities derived from one topology and one controller gain.
// lambda is computed on the gain-folded Laplacian c*L (deflated on the
// consensus direction); laplacian stores the folded pinned matrix c*(L + G)
// that drives the closed loop.
struct SpectralData {
  Eigen::MatrixXd laplacian;  // c * (L + G)
  Eigen::VectorXd w;          // left Perron vector of L, sum w_i = n
  Eigen::MatrixXd bigW;       // diag(w)
  double lambda{};
};

inline SpectralData analyze_graph(const CommGraph& graph, double c_omega) {
  graph.validate();
  if (!(c_omega > 0.0)) throw std::invalid_argument("analyze_graph: c_omega must be > 0");
  SpectralData out;
  const Eigen::MatrixXd lap = laplacian(graph);
  out.w = left_perron_vector(lap);
  out.bigW = out.w.asDiagonal();
  out.laplacian = c_omega * (lap + Eigen::MatrixXd(graph.pinning.asDiagonal()));
  out.lambda = compute_lambda(c_omega * lap, out.bigW);
  return out;
}

}  // namespace etgrid

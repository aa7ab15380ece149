#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsanov/extreal.hpp"

namespace qsanov {

using Cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

// Tolerances. All absolute unless noted.
inline constexpr double kHermitianTol = 1e-10;      // per-entry conjugate symmetry (construction)
inline constexpr double kHermitianRejectTol = 1e-8; // eig rejects above this residual
inline constexpr double kTraceOneTol = 1e-10;
inline constexpr double kEigClampTol = 1e-10;       // eigenvalues in [-tol, 0) read as 0; below: hard error
inline constexpr double kIdempotentTol = 1e-9;
inline constexpr double kRankTraceTol = 1e-6;
inline constexpr double kGroupingTolDefault = 1e-9; // relative to max(1, |lambda_max|)
inline constexpr double kSupportTolDefault = 1e-9;
inline constexpr int kDimGuardDefault = 4096;

struct DimGuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_dim_guard(long long dim, int guard, const char* what);

class HermitianOperator {
public:
    explicit HermitianOperator(Mat m);
    int dim() const { return static_cast<int>(m_.rows()); }
    const Mat& matrix() const { return m_; }
    double trace_real() const { return m_.trace().real(); }

private:
    Mat m_;
};

class DensityOperator {
public:
    // Full validation: hermitian, PSD up to the clamp tolerance, trace one.
    static DensityOperator from_matrix(Mat m);
    // For operators PSD by construction (tensor products, pinchings, convex
    // combinations of valid states); checks hermiticity and trace only.
    static DensityOperator trusted(Mat m);

    int dim() const { return op_.dim(); }
    const Mat& matrix() const { return op_.matrix(); }
    const HermitianOperator& op() const { return op_; }

private:
    explicit DensityOperator(HermitianOperator h) : op_(std::move(h)) {}
    HermitianOperator op_;
};

class Projector {
public:
    // Validates idempotency (1e-9/entry) and integral rank (trace within 1e-6).
    static Projector from_matrix(Mat m);
    // P = V V^dagger for V with orthonormal columns; idempotent by construction.
    static Projector from_orthonormal_columns(const Mat& v);
    static Projector zero(int dim);
    static Projector identity(int dim);

    int dim() const { return op_.dim(); }
    int rank() const { return rank_; }
    const Mat& matrix() const { return op_.matrix(); }
    const HermitianOperator& op() const { return op_; }
    Projector complement() const;

private:
    Projector(HermitianOperator h, int rank) : op_(std::move(h)), rank_(rank) {}
    HermitianOperator op_;
    int rank_;
};

// Eigendecomposition with near-degenerate eigenvalues merged into groups,
// ordered by descending eigenvalue. Columns of basis() are orthonormal
// eigenvectors in group order; group g occupies columns [begin, begin+mult).
class SpectralDecomposition {
public:
    SpectralDecomposition(std::vector<double> values, std::vector<int> begins,
                          std::vector<int> mults, Mat basis, double grouping_tol);

    int dim() const { return static_cast<int>(basis_.rows()); }
    int group_count() const { return static_cast<int>(values_.size()); }
    double value(int g) const { return values_[g]; }
    int multiplicity(int g) const { return mults_[g]; }
    int begin(int g) const { return begins_[g]; }
    const std::vector<double>& values() const { return values_; }
    const Mat& basis() const { return basis_; }
    double grouping_tol() const { return grouping_tol_; }

    Projector projector(int g) const;
    // Columns of the eigenbasis for group g.
    Mat group_columns(int g) const { return basis_.middleCols(begins_[g], mults_[g]); }
    Mat reconstruct() const;

private:
    std::vector<double> values_;  // descending, distinct after grouping
    std::vector<int> begins_;
    std::vector<int> mults_;
    Mat basis_;
    double grouping_tol_;
};

SpectralDecomposition hermitian_eig(const HermitianOperator& h,
                                    double grouping_tol = kGroupingTolDefault);

// Raw eigensolve (ascending values, orthonormal columns); the grouped view
// above is built on top of this.
void dense_hermitian_eig(const Mat& m, RVec& evals, Mat& evecs);

HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b,
                                 int guard = kDimGuardDefault);
DensityOperator tensor_product(const DensityOperator& a, const DensityOperator& b,
                               int guard = kDimGuardDefault);
DensityOperator tensor_power(const DensityOperator& rho, int n, int guard = kDimGuardDefault);

// Partial traces for a bipartite split dim = d_head * d_tail.
DensityOperator partial_trace_head(const DensityOperator& rho, int d_head, int d_tail);
DensityOperator partial_trace_tail(const DensityOperator& rho, int d_head, int d_tail);

Projector support_projector(const HermitianOperator& h, double tol = kSupportTolDefault);
Projector join_projectors(const std::vector<Projector>& ps);

double expectation(const DensityOperator& rho, const HermitianOperator& x);
// Projector expectations are probabilities; clamped to [0,1] (tolerance 1e-9).
double expectation(const DensityOperator& rho, const Projector& p);

struct MainestCheck {
    double lhs1 = 0, rhs1 = 0;  // tau(qpqu) >= tau(p) - 2*sqrt(tau(1-q)) - tau(1-u)
    double lhs2 = 0, rhs2 = 0;  // Tr(pq)   >= rhs1 / c
    bool commutes = false;      // [D_tau, u] = 0 within 1e-8
    bool dominated = false;     // D_tau * u <= c*u within 1e-8 (false when c not supplied)
    bool has_c = false;
};

MainestCheck lemma_mainest_check(const DensityOperator& tau, const Projector& p,
                                 const Projector& q, const Projector& u,
                                 std::optional<double> c = std::nullopt);

}  // namespace qsanov

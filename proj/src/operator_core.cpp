#include "qsanov/operator_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace qsanov {

void check_dim_guard(long long dim, int guard, const char* what) {
    if (dim > guard)
        throw DimGuardError(std::string(what) + ": dimension " + std::to_string(dim) +
                            " exceeds guard " + std::to_string(guard));
}

static double hermiticity_residual(const Mat& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

HermitianOperator::HermitianOperator(Mat m) {
    if (m.rows() < 1 || m.rows() != m.cols())
        throw std::invalid_argument("HermitianOperator: matrix must be square, dim >= 1");
    double res = hermiticity_residual(m);
    if (res > kHermitianTol)
        throw std::invalid_argument("HermitianOperator: symmetry residual " + std::to_string(res) +
                                    " exceeds 1e-10");
    // Symmetrize so downstream eigensolves see an exactly Hermitian matrix.
    m_ = 0.5 * (m + m.adjoint());
}

void dense_hermitian_eig(const Mat& m, RVec& evals, Mat& evecs) {
    const int n = static_cast<int>(m.rows());
    evecs = m;
    evals.resize(n);
    int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                              reinterpret_cast<lapack_complex_double*>(evecs.data()), n,
                              evals.data());
    if (info != 0)
        throw std::runtime_error("eigendecomposition failed (zheevd info=" + std::to_string(info) +
                                 ")");
}

SpectralDecomposition::SpectralDecomposition(std::vector<double> values, std::vector<int> begins,
                                             std::vector<int> mults, Mat basis,
                                             double grouping_tol)
    : values_(std::move(values)),
      begins_(std::move(begins)),
      mults_(std::move(mults)),
      basis_(std::move(basis)),
      grouping_tol_(grouping_tol) {}

Projector SpectralDecomposition::projector(int g) const {
    return Projector::from_orthonormal_columns(group_columns(g));
}

Mat SpectralDecomposition::reconstruct() const {
    Mat out = Mat::Zero(dim(), dim());
    for (int g = 0; g < group_count(); ++g) {
        Mat v = group_columns(g);
        out += values_[g] * (v * v.adjoint());
    }
    return out;
}

SpectralDecomposition hermitian_eig(const HermitianOperator& h, double grouping_tol) {
    if (grouping_tol <= 0) throw std::invalid_argument("hermitian_eig: grouping_tol must be > 0");
    if (hermiticity_residual(h.matrix()) > kHermitianRejectTol)
        throw std::invalid_argument("hermitian_eig: input not Hermitian");
    RVec w;
    Mat v;
    dense_hermitian_eig(h.matrix(), w, v);
    const int n = h.dim();

    // Reorder descending, then chain-merge eigenvalues closer than the scaled tolerance.
    Mat basis(n, n);
    std::vector<double> sorted(n);
    for (int i = 0; i < n; ++i) {
        sorted[i] = w[n - 1 - i];
        basis.col(i) = v.col(n - 1 - i);
    }
    double scale = std::max(1.0, std::abs(sorted.empty() ? 0.0 : std::max(std::abs(sorted.front()),
                                                                          std::abs(sorted.back()))));
    double merge = grouping_tol * scale;

    std::vector<double> values;
    std::vector<int> begins, mults;
    int i = 0;
    while (i < n) {
        int j = i + 1;
        while (j < n && sorted[j - 1] - sorted[j] <= merge) ++j;
        double mean = std::accumulate(sorted.begin() + i, sorted.begin() + j, 0.0) / (j - i);
        values.push_back(mean);
        begins.push_back(i);
        mults.push_back(j - i);
        i = j;
    }
    return SpectralDecomposition(std::move(values), std::move(begins), std::move(mults),
                                 std::move(basis), grouping_tol);
}

DensityOperator DensityOperator::from_matrix(Mat m) {
    HermitianOperator h(std::move(m));
    double tr = h.trace_real();
    if (std::abs(tr - 1.0) > kTraceOneTol)
        throw std::invalid_argument("DensityOperator: trace " + std::to_string(tr) +
                                    " not within 1e-10 of 1");
    RVec w;
    Mat v;
    dense_hermitian_eig(h.matrix(), w, v);
    if (w.minCoeff() < -kEigClampTol)
        throw std::invalid_argument("DensityOperator: eigenvalue " + std::to_string(w.minCoeff()) +
                                    " below -1e-10; not PSD");
    return DensityOperator(std::move(h));
}

DensityOperator DensityOperator::trusted(Mat m) {
    HermitianOperator h(std::move(m));
    double tr = h.trace_real();
    if (std::abs(tr - 1.0) > 1e-8)
        throw std::invalid_argument("DensityOperator(trusted): trace drifted to " +
                                    std::to_string(tr));
    return DensityOperator(std::move(h));
}

Projector Projector::from_matrix(Mat m) {
    HermitianOperator h(std::move(m));
    const Mat& p = h.matrix();
    double idem = (p * p - p).cwiseAbs().maxCoeff();
    if (idem > kIdempotentTol)
        throw std::invalid_argument("Projector: idempotency residual " + std::to_string(idem) +
                                    " exceeds 1e-9");
    double tr = h.trace_real();
    double r = std::round(tr);
    if (std::abs(tr - r) > kRankTraceTol || r < 0)
        throw std::invalid_argument("Projector: trace " + std::to_string(tr) +
                                    " not within 1e-6 of a nonnegative integer");
    return Projector(std::move(h), static_cast<int>(r));
}

Projector Projector::from_orthonormal_columns(const Mat& v) {
    int rank = static_cast<int>(v.cols());
    if (rank == 0) return zero(static_cast<int>(v.rows()));
    Mat p = v * v.adjoint();
    return Projector(HermitianOperator(std::move(p)), rank);
}

Projector Projector::zero(int dim) {
    return Projector(HermitianOperator(Mat::Zero(dim, dim)), 0);
}

Projector Projector::identity(int dim) {
    return Projector(HermitianOperator(Mat::Identity(dim, dim)), dim);
}

Projector Projector::complement() const {
    Mat c = Mat::Identity(dim(), dim()) - matrix();
    return Projector(HermitianOperator(std::move(c)), dim() - rank_);
}

static Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

HermitianOperator tensor_product(const HermitianOperator& a, const HermitianOperator& b,
                                 int guard) {
    check_dim_guard(static_cast<long long>(a.dim()) * b.dim(), guard, "tensor_product");
    return HermitianOperator(kron(a.matrix(), b.matrix()));
}

DensityOperator tensor_product(const DensityOperator& a, const DensityOperator& b, int guard) {
    check_dim_guard(static_cast<long long>(a.dim()) * b.dim(), guard, "tensor_product");
    return DensityOperator::trusted(kron(a.matrix(), b.matrix()));
}

DensityOperator tensor_power(const DensityOperator& rho, int n, int guard) {
    if (n < 0) throw std::invalid_argument("tensor_power: n must be >= 0");
    long long dim = 1;
    for (int i = 0; i < n; ++i) {
        dim *= rho.dim();
        check_dim_guard(dim, guard, "tensor_power");
    }
    Mat acc = Mat::Identity(1, 1);
    for (int i = 0; i < n; ++i) acc = kron(acc, rho.matrix());
    return DensityOperator::trusted(std::move(acc));
}

DensityOperator partial_trace_head(const DensityOperator& rho, int d_head, int d_tail) {
    if (static_cast<long long>(d_head) * d_tail != rho.dim())
        throw std::invalid_argument("partial_trace_head: split does not match dimension");
    const Mat& m = rho.matrix();
    Mat out = Mat::Zero(d_tail, d_tail);
    for (int i = 0; i < d_head; ++i)
        out += m.block(i * d_tail, i * d_tail, d_tail, d_tail);
    return DensityOperator::trusted(std::move(out));
}

DensityOperator partial_trace_tail(const DensityOperator& rho, int d_head, int d_tail) {
    if (static_cast<long long>(d_head) * d_tail != rho.dim())
        throw std::invalid_argument("partial_trace_tail: split does not match dimension");
    const Mat& m = rho.matrix();
    Mat out = Mat::Zero(d_head, d_head);
    for (int i = 0; i < d_head; ++i)
        for (int j = 0; j < d_head; ++j) {
            Cplx s = 0;
            for (int k = 0; k < d_tail; ++k) s += m(i * d_tail + k, j * d_tail + k);
            out(i, j) = s;
        }
    return DensityOperator::trusted(std::move(out));
}

Projector support_projector(const HermitianOperator& h, double tol) {
    SpectralDecomposition sd = hermitian_eig(h);
    double min_ev = sd.values().empty() ? 0.0 : sd.values().back();
    if (min_ev < -tol)
        throw std::invalid_argument("support_projector: eigenvalue " + std::to_string(min_ev) +
                                    " below -tol; input not PSD");
    std::vector<int> keep;
    int rank = 0;
    for (int g = 0; g < sd.group_count(); ++g)
        if (sd.value(g) > tol) {
            keep.push_back(g);
            rank += sd.multiplicity(g);
        }
    if (rank == 0) return Projector::zero(h.dim());
    Mat cols(h.dim(), rank);
    int at = 0;
    for (int g : keep) {
        cols.middleCols(at, sd.multiplicity(g)) = sd.group_columns(g);
        at += sd.multiplicity(g);
    }
    return Projector::from_orthonormal_columns(cols);
}

Projector join_projectors(const std::vector<Projector>& ps) {
    if (ps.empty()) throw std::invalid_argument("join_projectors: empty list");
    int d = ps[0].dim();
    Mat sum = Mat::Zero(d, d);
    for (const auto& p : ps) {
        if (p.dim() != d) throw std::invalid_argument("join_projectors: dimension mismatch");
        sum += p.matrix();
    }
    // Support of the sum = span of the union of ranges; eigenvalues of the sum
    // lie in [0, #ps], so a fixed small cut is safe.
    return support_projector(HermitianOperator(std::move(sum)), 1e-9);
}

double expectation(const DensityOperator& rho, const HermitianOperator& x) {
    if (rho.dim() != x.dim()) throw std::invalid_argument("expectation: dimension mismatch");
    return (rho.matrix() * x.matrix()).trace().real();
}

double expectation(const DensityOperator& rho, const Projector& p) {
    double v = expectation(rho, p.op());
    if (v < -1e-9 || v > 1 + 1e-9)
        throw std::runtime_error("expectation: projector mass " + std::to_string(v) +
                                 " outside [0,1] tolerance");
    return std::clamp(v, 0.0, 1.0);
}

MainestCheck lemma_mainest_check(const DensityOperator& tau, const Projector& p,
                                 const Projector& q, const Projector& u,
                                 std::optional<double> c) {
    const int d = tau.dim();
    if (p.dim() != d || q.dim() != d || u.dim() != d)
        throw std::invalid_argument("lemma_mainest_check: dimension mismatch");
    const Mat& dt = tau.matrix();
    const Mat& pm = p.matrix();
    const Mat& qm = q.matrix();
    const Mat& um = u.matrix();

    MainestCheck out;
    out.commutes = (dt * um - um * dt).cwiseAbs().maxCoeff() <= 1e-8;

    double tau_p = (dt * pm).trace().real();
    double tau_not_q = std::clamp((dt * (Mat::Identity(d, d) - qm)).trace().real(), 0.0, 1.0);
    double tau_not_u = (dt * (Mat::Identity(d, d) - um)).trace().real();
    out.lhs1 = (dt * qm * pm * qm * um).trace().real();
    out.rhs1 = tau_p - 2.0 * std::sqrt(tau_not_q) - tau_not_u;
    out.lhs2 = (pm * qm).trace().real();
    if (c) {
        out.has_c = true;
        // D_tau u <= c u  <=>  u D_tau u <= c u and D_tau u supported inside u.
        Mat udu = um * dt * um;
        RVec w;
        Mat v;
        dense_hermitian_eig(udu, w, v);
        double leak = ((Mat::Identity(d, d) - um) * dt * um).cwiseAbs().maxCoeff();
        out.dominated = out.commutes && leak <= 1e-8 && w.maxCoeff() <= *c + 1e-8;
        out.rhs2 = *c > 0 ? out.rhs1 / *c : 0.0;
    }
    return out;
}

}  // namespace qsanov

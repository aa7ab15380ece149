#pragma once

#include <string>

#include "qsanov/extreal.hpp"
#include "qsanov/operator_core.hpp"
#include "qsanov/source_models.hpp"

namespace qsanov {

// Asymptotic rate (nats per site) plus how it was obtained.
struct RateResult {
    ExtReal value = 0.0;
    std::string method;    // closed_form_iid | closed_form_markov | finite_n_slope
    int n_used = 0;        // 0 for closed forms
    double residual = 0.0; // slope-fit RMS residual; > 1e-3 flags non-convergence
};

// Eigenvalues of the reference below this are treated as its kernel.
inline constexpr double kPhiKernelTol = 1e-14;

double von_neumann_entropy(const DensityOperator& rho);

ExtReal relative_entropy(const DensityOperator& psi, const DensityOperator& phi);
// -Tr D_psi ln D_phi on supp(phi); +inf on support violation.
ExtReal cross_term(const DensityOperator& psi, const DensityOperator& phi);
// Pinch psi by the spectral projections of phi, then take relative entropy:
// a computable lower bound on every measured relative entropy of the pair.
ExtReal measured_relative_entropy_lb(const DensityOperator& psi, const DensityOperator& phi);

// force_slope bypasses the closed forms (used to validate the slope estimator
// against pairs whose rate is known).
RateResult relative_entropy_rate(const SourceModel& p, const SourceModel& q, int n_max,
                                 bool force_slope = false);

// Extremal rates over the ergodic decomposition (per original site).
ExtReal underline_s(const SourceModel& p, const SourceModel& q, int block_len, int n_max);
ExtReal overline_s(const SourceModel& p, int block_len);

// Classical probability-vector forms.
double shannon_entropy(const RVec& p);
ExtReal kl_divergence(const RVec& p, const RVec& q);

}  // namespace qsanov

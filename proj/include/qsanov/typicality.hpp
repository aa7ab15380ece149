#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "qsanov/classical.hpp"
#include "qsanov/divergence.hpp"
#include "qsanov/operator_core.hpp"
#include "qsanov/source_models.hpp"

namespace qsanov {

// Selects eigenvalues lambda of an n-site density by their exponent
// -(1/n) ln lambda. Finite center: open interval (center-hw, center+hw).
// center = +inf: the kernel (lambda = 0) together with exponents > 1/hw.
struct SpectralWindow {
    ExtReal center = 0.0;
    double half_width = 0.0;
    int n = 1;
    bool contains_rate(ExtReal rate_per_site) const;
    bool contains_eigenvalue(double lambda) const;
};

// A typical set, held either as a dense projector on the materialized n-site
// space or as a group selection in a shared classical type table. The table
// form is what makes n = 512 classical experiments exact.
struct TypicalHandle {
    int n = 0;
    std::optional<Projector> dense;
    std::shared_ptr<const TypeTable> table;
    std::vector<uint8_t> selection;
    bool is_dense() const { return dense.has_value(); }
    double log_rank() const;  // ln rank; -inf when empty
};

Projector spectral_typical_projector(const DensityOperator& phi_n, const SpectralWindow& window);

struct EntropyTypicalResult {
    TypicalHandle set;
    double mass = 0.0;      // under the model's own n-site marginal
    double log_rank = 0.0;  // ln rank
};
EntropyTypicalResult entropy_typical_projector(const SourceModel& m, int n, double delta);

struct RelativeAepResult {
    double mass = 0.0;
    ExtReal center = 0.0;  // entropy rate + relative rate, +inf allowed
};
RelativeAepResult relative_aep_mass(const SourceModel& p, const SourceModel& q, int n, double eps);

struct SeparatingResult {
    TypicalHandle set;  // supp(u p u)
    double p_mass = 0.0;
    ExtReal q_log_mass = ExtReal::neg_inf();  // (1/n) ln of reference mass
};
SeparatingResult maximally_separating_projector(const SourceModel& p, const SourceModel& q, int n,
                                                double eps, double delta);

struct UniversalTypicalResult {
    TypicalHandle set;
    std::vector<double> member_masses;  // ordered as the input family
    double log_rank = 0.0;              // ln rank; per the join bound,
                                        // <= n*(level+delta) + ln(#members)
};
UniversalTypicalResult universal_typical_projector(const std::vector<SourceModel>& omega, int n,
                                                   double level, double delta);

// Slice grid: main values s_1..s_m spaced eta apart plus the overflow value
// s_{m+1} = s_m + eta. Interval i is (s_i + s_ref - eta/2, s_i + s_ref + eta/2],
// the overflow interval is right-unbounded and swallows the reference kernel.
// In the infinite-reference branch the grid is empty and one unbounded
// interval (1/eta, +inf) stands in for the whole construction.
struct SliceSpec {
    std::vector<double> s_values;
    double eta = 0.0;
    ExtReal s_ref = 0.0;
    std::vector<std::pair<double, double>> intervals;  // (lo, hi]; hi may be +inf
};

struct SliceEntry {
    double lo = 0.0, hi = 0.0;  // exponent interval (lo, hi]
    bool unbounded = false;
    std::optional<Projector> dense;   // dense path
    std::vector<uint8_t> selection;   // table path
    double log_rank = 0.0;            // ln rank of this slice's projector
};

struct SeparatingProjection {
    TypicalHandle set;  // the assembled projection, sum of the slices
    SliceSpec spec;
    std::vector<SliceEntry> per_slice;
    std::vector<double> member_masses;
    ExtReal ref_log_mass = ExtReal::neg_inf();  // (1/n) ln of reference mass
};

SeparatingProjection slice_sanov_projector(const std::vector<SourceModel>& omega,
                                           const SourceModel& q, int n, int m_slices,
                                           std::optional<double> eta_override = std::nullopt);

}  // namespace qsanov

#pragma once

#include <string>
#include <vector>

#include "qsanov/classical.hpp"
#include "qsanov/extreal.hpp"
#include "qsanov/operator_core.hpp"
#include "qsanov/source_models.hpp"

namespace qsanov {

enum class TestKind { relaxed, projection, subset };
const char* to_string(TestKind k);

// One hypothesis test together with its error profile. `value` is ln of the
// reference-state mass of the test (-inf only when that mass is exactly zero);
// `type1_error` is 1 minus the null-state mass. For threshold tests,
// `threshold_t` is the pencil parameter t of {D_psi - t D_phi > 0} and
// `randomization_gamma` the weight placed on its zero eigenspace.
struct TestOutcome {
    ExtReal value = 0.0;
    double type1_error = 0.0;
    double threshold_t = 0.0;
    double randomization_gamma = 0.0;
    TestKind kind = TestKind::relaxed;
};

struct ProjectionTest {
    TestOutcome outcome;
    Projector q;
};

// Exact type-aggregated optima for a classical pair at block length n.
struct TypeBetaPair {
    TestOutcome relaxed;        // randomized threshold optimum
    TestOutcome deterministic;  // best whole-types-plus-integer-count subset
};

struct HpProbeReport {
    std::vector<int> n_values;
    std::vector<ExtReal> beta_over_n;
    ExtReal target = 0.0;    // -s(P,Q)
    double final_gap = 0.0;  // |beta/n - target| at the largest n
    std::string verdict;     // consistent | inconclusive | violated
};

// Optimal randomized test: minimizes the reference mass Tr(D_phi T) over
// operator tests 0 <= T <= 1 with null mass Tr(D_psi T) >= 1 - eps. Solved by
// threshold tests T_t = {D_psi - t D_phi > 0} plus randomization on the zero
// eigenspace; the achieved type-I error equals eps within 1e-9 unless the
// kernel of phi already carries psi-mass >= 1 - eps (then value = -inf).
TestOutcome np_relaxed_beta(const DensityOperator& psi, const DensityOperator& phi, double eps);

// Deterministic rounding of the relaxed solution: the strictly positive part
// of the pencil at the optimal threshold, then boundary eigenvectors in
// ascending phi-weight (ties by index) until the psi-mass reaches 1 - eps.
ProjectionTest np_projection_beta(const DensityOperator& psi, const DensityOperator& phi,
                                  double eps);

// Exact deterministic optimum over all 2^k subsets (k <= 20). Oracle for the
// operations above on diagonal inputs.
TestOutcome classical_beta_bruteforce(const RVec& p, const RVec& q, double eps);

// Randomized and deterministic optima over length-n strings, aggregated by
// table group; exact despite exponentially large outcome spaces. ip/iq index
// the null and reference models inside the table.
TypeBetaPair classical_beta_from_table(const TypeTable& t, int ip, int iq, double eps);

// Type-class specialization for a pair of classical iid models.
TypeBetaPair classical_beta_iid_types(const SourceModel& p, const SourceModel& q, long long n,
                                      double eps);

// Data-processing converse: every test with type-I error <= eps has
// ln reference-mass >= -(S(psi,phi) + ln 2)/(1 - eps); -inf when S = inf.
ExtReal converse_bound(const DensityOperator& psi, const DensityOperator& phi, double eps);

// Relaxed beta/n across n_values against the target -s(P,Q). Classical pairs
// run on type tables (exact at large n); otherwise materialized marginals feed
// the pencil solver. `tolerance` is the final-gap budget for "consistent".
HpProbeReport hp_probe(const SourceModel& p, const SourceModel& q, double eps,
                       std::vector<int> n_values, double tolerance = 0.05);

}  // namespace qsanov

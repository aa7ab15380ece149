#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsanov/operator_core.hpp"

namespace qsanov {

struct SiteAlgebra {
    int dim = 0;
    bool abelian = false;
};

// Stationary process models. Immutable after construction; marginals are
// materialized on demand.
class SourceModel {
public:
    enum class Kind { ClassicalIID, ClassicalMarkov, QuantumIID, QuantumBlockIID, FiniteMixture };

    static SourceModel classical_iid(RVec p);
    // pi solved from T when omitted; pi*T = pi enforced within 1e-9 either way.
    static SourceModel classical_markov(Eigen::MatrixXd t);
    static SourceModel classical_markov(RVec pi, Eigen::MatrixXd t);
    static SourceModel quantum_iid(DensityOperator rho);
    static SourceModel quantum_block_iid(DensityOperator rho_block, int block_len);
    static SourceModel finite_mixture(RVec weights, std::vector<SourceModel> components);
    // Test fixture: skips the stationarity check (deliberately broken chains).
    static SourceModel classical_markov_unchecked(RVec pi, Eigen::MatrixXd t);

    Kind kind() const { return kind_; }
    const SiteAlgebra& site() const { return site_; }
    bool classical() const;
    bool is_mixture() const { return kind_ == Kind::FiniteMixture; }

    const RVec& iid_p() const;
    const RVec& markov_pi() const;
    const Eigen::MatrixXd& markov_t() const;
    const DensityOperator& rho() const;           // QuantumIID / QuantumBlockIID
    int block_len() const;                        // QuantumBlockIID
    const RVec& weights() const;                  // FiniteMixture
    const std::vector<SourceModel>& components() const;

    std::string describe() const;

    // Model definition files: JSON with {variant, p | pi,T | rho_csv_path | components+weights}.
    static SourceModel from_json(const nlohmann::json& j, const std::string& base_dir);
    nlohmann::json to_json() const;  // rho inlined as CSV text for round-trips

private:
    SourceModel() = default;
    Kind kind_ = Kind::ClassicalIID;
    SiteAlgebra site_;
    RVec p_;
    RVec pi_;
    Eigen::MatrixXd t_;
    std::shared_ptr<const DensityOperator> rho_;
    int block_len_ = 1;
    RVec weights_;
    std::shared_ptr<const std::vector<SourceModel>> components_;
};

struct ErgodicComponentList {
    RVec weights;
    std::vector<SourceModel> components;
    int block_len = 1;  // shift power under which the components are ergodic
};

struct MixingReport {
    std::vector<int> l_values;
    std::vector<double> alpha;
    std::string certified_class;
    bool star_mixing = true;  // false iff some alpha == 0
};

inline constexpr long long kClassicalPathGuard = 1 << 24;

DensityOperator marginal_density(const SourceModel& m, int n, int guard = kDimGuardDefault);
// Classical fast path: probability vector over site.dim^n outcomes (index =
// base-dim digits, first site most significant).
RVec marginal_distribution(const SourceModel& m, int n);

ExtReal entropy_rate(const SourceModel& m);

ErgodicComponentList ergodic_components(const SourceModel& m, int block_len = 1);

SourceModel block_transform(const SourceModel& m, int l, int guard = kDimGuardDefault);
SourceModel restrict_tail(const SourceModel& m, int l, int mm);

double mixing_coefficient(const SourceModel& m, int l, int k = 1);
MixingReport mixing_report(const SourceModel& m, const std::vector<int>& l_values, int k = 1);

bool stationarity_check(const SourceModel& m, int n, int guard = kDimGuardDefault);

// Markov chain structure helpers (irreducibility, period, cyclic classes).
struct ChainStructure {
    bool irreducible = false;
    int period = 0;
    std::vector<int> cyclic_class;  // class index per state (valid when irreducible)
};
ChainStructure markov_structure(const Eigen::MatrixXd& t);

RVec stationary_distribution(const Eigen::MatrixXd& t);

}  // namespace qsanov

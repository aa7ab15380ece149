#include "qsanov/source_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "qsanov/csv_io.hpp"

namespace qsanov {

using nlohmann::json;

static void validate_prob_vector(RVec& p, const char* what) {
    if (p.size() < 1) throw std::invalid_argument(std::string(what) + ": empty vector");
    for (int i = 0; i < p.size(); ++i) {
        if (p[i] < -1e-12)
            throw std::invalid_argument(std::string(what) + ": negative entry " +
                                        std::to_string(p[i]));
        if (p[i] < 0) p[i] = 0;
    }
    double s = p.sum();
    if (std::abs(s - 1.0) > 1e-10)
        throw std::invalid_argument(std::string(what) + ": entries sum to " + std::to_string(s) +
                                    ", not 1");
}

RVec stationary_distribution(const Eigen::MatrixXd& t) {
    const int d = static_cast<int>(t.rows());
    // Solve pi (T - I) = 0 with sum(pi) = 1 as an overdetermined least-squares system.
    Eigen::MatrixXd a(d + 1, d);
    a.topRows(d) = t.transpose() - Eigen::MatrixXd::Identity(d, d);
    a.bottomRows(1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
    b[d] = 1.0;
    RVec pi = a.colPivHouseholderQr().solve(b);
    double resid = ((pi.transpose() * t).transpose() - pi).cwiseAbs().maxCoeff();
    if (resid > 1e-9 || pi.minCoeff() < -1e-9)
        throw std::invalid_argument("stationary_distribution: no valid stationary vector (residual " +
                                    std::to_string(resid) + ")");
    for (int i = 0; i < d; ++i) pi[i] = std::max(pi[i], 0.0);
    pi /= pi.sum();
    return pi;
}

static void validate_stochastic(const Eigen::MatrixXd& t) {
    if (t.rows() < 1 || t.rows() != t.cols())
        throw std::invalid_argument("ClassicalMarkov: T must be square");
    for (int i = 0; i < t.rows(); ++i) {
        if (t.row(i).minCoeff() < -1e-12)
            throw std::invalid_argument("ClassicalMarkov: negative transition probability");
        if (std::abs(t.row(i).sum() - 1.0) > 1e-10)
            throw std::invalid_argument("ClassicalMarkov: row " + std::to_string(i) +
                                        " sums to " + std::to_string(t.row(i).sum()));
    }
}

SourceModel SourceModel::classical_iid(RVec p) {
    validate_prob_vector(p, "ClassicalIID.p");
    SourceModel m;
    m.kind_ = Kind::ClassicalIID;
    m.site_ = {static_cast<int>(p.size()), true};
    m.p_ = std::move(p);
    return m;
}

SourceModel SourceModel::classical_markov(Eigen::MatrixXd t) {
    validate_stochastic(t);
    RVec pi = stationary_distribution(t);
    return classical_markov(std::move(pi), std::move(t));
}

SourceModel SourceModel::classical_markov(RVec pi, Eigen::MatrixXd t) {
    validate_stochastic(t);
    validate_prob_vector(pi, "ClassicalMarkov.pi");
    if (pi.size() != t.rows())
        throw std::invalid_argument("ClassicalMarkov: pi/T size mismatch");
    double resid = ((pi.transpose() * t).transpose() - pi).cwiseAbs().maxCoeff();
    if (resid > 1e-9)
        throw std::invalid_argument("ClassicalMarkov: pi*T != pi (residual " +
                                    std::to_string(resid) + ")");
    return classical_markov_unchecked(std::move(pi), std::move(t));
}

SourceModel SourceModel::classical_markov_unchecked(RVec pi, Eigen::MatrixXd t) {
    SourceModel m;
    m.kind_ = Kind::ClassicalMarkov;
    m.site_ = {static_cast<int>(t.rows()), true};
    m.pi_ = std::move(pi);
    m.t_ = std::move(t);
    return m;
}

static bool is_diagonal(const Mat& m) {
    Mat off = m;
    off.diagonal().setZero();
    return off.cwiseAbs().maxCoeff() <= 1e-12;
}

SourceModel SourceModel::quantum_iid(DensityOperator rho) {
    SourceModel m;
    m.kind_ = Kind::QuantumIID;
    m.site_ = {rho.dim(), is_diagonal(rho.matrix())};
    m.rho_ = std::make_shared<DensityOperator>(std::move(rho));
    return m;
}

SourceModel SourceModel::quantum_block_iid(DensityOperator rho_block, int block_len) {
    if (block_len < 1) throw std::invalid_argument("QuantumBlockIID: block_len must be >= 1");
    int d = 1;
    if (block_len == 1) {
        d = rho_block.dim();
    } else {
        d = static_cast<int>(std::llround(std::pow(double(rho_block.dim()), 1.0 / block_len)));
        long long check = 1;
        for (int i = 0; i < block_len; ++i) check *= d;
        if (check != rho_block.dim())
            throw std::invalid_argument("QuantumBlockIID: dim(rho_block) is not a perfect " +
                                        std::to_string(block_len) + "-th power");
    }
    SourceModel m;
    m.kind_ = Kind::QuantumBlockIID;
    m.site_ = {d, is_diagonal(rho_block.matrix())};
    m.rho_ = std::make_shared<DensityOperator>(std::move(rho_block));
    m.block_len_ = block_len;
    return m;
}

SourceModel SourceModel::finite_mixture(RVec weights, std::vector<SourceModel> components) {
    validate_prob_vector(weights, "FiniteMixture.weights");
    if (components.empty() || static_cast<int>(components.size()) != weights.size())
        throw std::invalid_argument("FiniteMixture: weights/components size mismatch");
    bool abelian = true;
    for (const auto& c : components) {
        if (c.is_mixture())
            throw std::invalid_argument("FiniteMixture: nesting restricted to depth 1");
        if (c.site().dim != components[0].site().dim)
            throw std::invalid_argument("FiniteMixture: components must share one site algebra");
        abelian = abelian && c.site().abelian;
    }
    SourceModel m;
    m.kind_ = Kind::FiniteMixture;
    m.site_ = {components[0].site().dim, abelian};
    m.weights_ = std::move(weights);
    m.components_ = std::make_shared<std::vector<SourceModel>>(std::move(components));
    return m;
}

bool SourceModel::classical() const {
    switch (kind_) {
        case Kind::ClassicalIID:
        case Kind::ClassicalMarkov:
            return true;
        case Kind::FiniteMixture: {
            for (const auto& c : *components_)
                if (!c.classical()) return false;
            return true;
        }
        default:
            return false;
    }
}

#define QSANOV_REQUIRE_KIND(k)                                                        \
    if (kind_ != Kind::k) throw std::logic_error("SourceModel: not a " #k " variant")

const RVec& SourceModel::iid_p() const {
    QSANOV_REQUIRE_KIND(ClassicalIID);
    return p_;
}
const RVec& SourceModel::markov_pi() const {
    QSANOV_REQUIRE_KIND(ClassicalMarkov);
    return pi_;
}
const Eigen::MatrixXd& SourceModel::markov_t() const {
    QSANOV_REQUIRE_KIND(ClassicalMarkov);
    return t_;
}
const DensityOperator& SourceModel::rho() const {
    if (kind_ != Kind::QuantumIID && kind_ != Kind::QuantumBlockIID)
        throw std::logic_error("SourceModel: no density operator in this variant");
    return *rho_;
}
int SourceModel::block_len() const {
    QSANOV_REQUIRE_KIND(QuantumBlockIID);
    return block_len_;
}
const RVec& SourceModel::weights() const {
    QSANOV_REQUIRE_KIND(FiniteMixture);
    return weights_;
}
const std::vector<SourceModel>& SourceModel::components() const {
    QSANOV_REQUIRE_KIND(FiniteMixture);
    return *components_;
}

std::string SourceModel::describe() const {
    switch (kind_) {
        case Kind::ClassicalIID:
            return "ClassicalIID(d=" + std::to_string(site_.dim) + ")";
        case Kind::ClassicalMarkov:
            return "ClassicalMarkov(d=" + std::to_string(site_.dim) + ")";
        case Kind::QuantumIID:
            return "QuantumIID(d=" + std::to_string(site_.dim) + ")";
        case Kind::QuantumBlockIID:
            return "QuantumBlockIID(d=" + std::to_string(site_.dim) +
                   ",L=" + std::to_string(block_len_) + ")";
        case Kind::FiniteMixture:
            return "FiniteMixture(" + std::to_string(components_->size()) + ")";
    }
    return "?";
}

static long long ipow_guarded(int base, int n, long long guard, const char* what) {
    long long v = 1;
    for (int i = 0; i < n; ++i) {
        v *= base;
        if (v > guard)
            throw DimGuardError(std::string(what) + ": dimension " + std::to_string(v) +
                                " exceeds guard " + std::to_string(guard));
    }
    return v;
}

RVec marginal_distribution(const SourceModel& m, int n) {
    if (!m.classical())
        throw std::invalid_argument("marginal_distribution: model is not classical");
    if (n < 1) throw std::invalid_argument("marginal_distribution: n must be >= 1");
    const int d = m.site().dim;
    long long total = ipow_guarded(d, n, kClassicalPathGuard, "marginal_distribution");

    switch (m.kind()) {
        case SourceModel::Kind::ClassicalIID: {
            const RVec& p = m.iid_p();
            RVec v = p;
            for (int step = 1; step < n; ++step) {
                RVec next(v.size() * d);
                for (long long i = 0; i < v.size(); ++i)
                    for (int y = 0; y < d; ++y) next[i * d + y] = v[i] * p[y];
                v = std::move(next);
            }
            return v;
        }
        case SourceModel::Kind::ClassicalMarkov: {
            const RVec& pi = m.markov_pi();
            const Eigen::MatrixXd& t = m.markov_t();
            RVec v = pi;
            for (int step = 1; step < n; ++step) {
                RVec next(v.size() * d);
                for (long long i = 0; i < v.size(); ++i) {
                    int last = static_cast<int>(i % d);
                    for (int y = 0; y < d; ++y) next[i * d + y] = v[i] * t(last, y);
                }
                v = std::move(next);
            }
            return v;
        }
        case SourceModel::Kind::FiniteMixture: {
            RVec v = RVec::Zero(total);
            const RVec& w = m.weights();
            for (int c = 0; c < w.size(); ++c) {
                if (w[c] == 0) continue;
                v += w[c] * marginal_distribution(m.components()[c], n);
            }
            return v;
        }
        default:
            throw std::logic_error("marginal_distribution: unreachable");
    }
}

DensityOperator marginal_density(const SourceModel& m, int n, int guard) {
    if (n < 1) throw std::invalid_argument("marginal_density: n must be >= 1");
    const int d = m.site().dim;
    switch (m.kind()) {
        case SourceModel::Kind::ClassicalIID:
        case SourceModel::Kind::ClassicalMarkov: {
            ipow_guarded(d, n, guard, "marginal_density");
            RVec v = marginal_distribution(m, n);
            Mat diag = Mat::Zero(v.size(), v.size());
            for (long long i = 0; i < v.size(); ++i) diag(i, i) = v[i];
            return DensityOperator::trusted(std::move(diag));
        }
        case SourceModel::Kind::QuantumIID:
            return tensor_power(m.rho(), n, guard);
        case SourceModel::Kind::QuantumBlockIID: {
            ipow_guarded(d, n, guard, "marginal_density");
            const int L = m.block_len();
            int full = n / L, rem = n % L;
            DensityOperator acc = tensor_power(m.rho(), full, guard);
            if (rem > 0) {
                int dh = static_cast<int>(ipow_guarded(d, rem, guard, "marginal_density"));
                int dt = m.rho().dim() / dh;
                DensityOperator part = partial_trace_tail(m.rho(), dh, dt);
                acc = tensor_product(acc, part, guard);
            }
            return acc;
        }
        case SourceModel::Kind::FiniteMixture: {
            long long dim = ipow_guarded(d, n, guard, "marginal_density");
            Mat sum = Mat::Zero(dim, dim);
            const RVec& w = m.weights();
            for (int c = 0; c < w.size(); ++c) {
                if (w[c] == 0) continue;
                sum += w[c] * marginal_density(m.components()[c], n, guard).matrix();
            }
            return DensityOperator::trusted(std::move(sum));
        }
    }
    throw std::logic_error("marginal_density: unreachable");
}

static double shannon_entropy(const RVec& p) {
    double h = 0;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0) h -= p[i] * std::log(p[i]);
    return std::max(h, 0.0);
}

static double spectrum_entropy(const DensityOperator& rho) {
    RVec w;
    Mat v;
    dense_hermitian_eig(rho.matrix(), w, v);
    double h = 0;
    for (int i = 0; i < w.size(); ++i)
        if (w[i] > 0) h -= w[i] * std::log(w[i]);
    return std::max(h, 0.0);
}

ExtReal entropy_rate(const SourceModel& m) {
    switch (m.kind()) {
        case SourceModel::Kind::ClassicalIID:
            return shannon_entropy(m.iid_p());
        case SourceModel::Kind::ClassicalMarkov: {
            const RVec& pi = m.markov_pi();
            const Eigen::MatrixXd& t = m.markov_t();
            double h = 0;
            for (int i = 0; i < pi.size(); ++i) {
                if (pi[i] == 0) continue;
                h += pi[i] * shannon_entropy(t.row(i).transpose());
            }
            return h;
        }
        case SourceModel::Kind::QuantumIID:
            return spectrum_entropy(m.rho());
        case SourceModel::Kind::QuantumBlockIID:
            return spectrum_entropy(m.rho()) / m.block_len();
        case SourceModel::Kind::FiniteMixture:
            throw std::invalid_argument(
                "entropy_rate: mixtures have no single rate; evaluate per ergodic component "
                "(overline_s)");
    }
    throw std::logic_error("entropy_rate: unreachable");
}

ChainStructure markov_structure(const Eigen::MatrixXd& t) {
    const int d = static_cast<int>(t.rows());
    auto edge = [&](int i, int j) { return t(i, j) > 1e-15; };

    std::vector<int> level(d, -1);
    std::queue<int> bfs;
    bfs.push(0);
    level[0] = 0;
    while (!bfs.empty()) {
        int u = bfs.front();
        bfs.pop();
        for (int v = 0; v < d; ++v)
            if (edge(u, v) && level[v] < 0) {
                level[v] = level[u] + 1;
                bfs.push(v);
            }
    }
    std::vector<char> back(d, 0);
    bfs.push(0);
    back[0] = 1;
    while (!bfs.empty()) {
        int u = bfs.front();
        bfs.pop();
        for (int v = 0; v < d; ++v)
            if (edge(v, u) && !back[v]) {
                back[v] = 1;
                bfs.push(v);
            }
    }
    ChainStructure cs;
    cs.irreducible = true;
    for (int v = 0; v < d; ++v)
        if (level[v] < 0 || !back[v]) cs.irreducible = false;
    if (!cs.irreducible) return cs;

    long long g = 0;
    for (int u = 0; u < d; ++u)
        for (int v = 0; v < d; ++v)
            if (edge(u, v)) g = std::gcd(g, static_cast<long long>(level[u]) + 1 - level[v]);
    cs.period = static_cast<int>(g == 0 ? 1 : g);
    cs.cyclic_class.resize(d);
    for (int v = 0; v < d; ++v)
        cs.cyclic_class[v] = static_cast<int>(((level[v] % cs.period) + cs.period) % cs.period);
    return cs;
}

SourceModel block_transform(const SourceModel& m, int l, int guard) {
    if (l < 1) throw std::invalid_argument("block_transform: L must be >= 1");
    if (l == 1) return m;
    const int d = m.site().dim;
    switch (m.kind()) {
        case SourceModel::Kind::ClassicalIID: {
            long long dim = ipow_guarded(d, l, kClassicalPathGuard, "block_transform");
            RVec p = marginal_distribution(m, l);
            (void)dim;
            return SourceModel::classical_iid(std::move(p));
        }
        case SourceModel::Kind::ClassicalMarkov: {
            long long dim = ipow_guarded(d, l, guard, "block_transform");
            const int bd = static_cast<int>(dim);
            const RVec& pi = m.markov_pi();
            const Eigen::MatrixXd& t = m.markov_t();
            auto digits = [&](int code, int* out) {
                for (int i = l - 1; i >= 0; --i) {
                    out[i] = code % d;
                    code /= d;
                }
            };
            std::vector<int> x(l), y(l);
            RVec bpi(bd);
            for (int c = 0; c < bd; ++c) {
                digits(c, x.data());
                double pr = pi[x[0]];
                for (int i = 0; i + 1 < l; ++i) pr *= t(x[i], x[i + 1]);
                bpi[c] = pr;
            }
            Eigen::MatrixXd bt(bd, bd);
            for (int c = 0; c < bd; ++c) {
                digits(c, x.data());
                for (int c2 = 0; c2 < bd; ++c2) {
                    digits(c2, y.data());
                    double pr = t(x[l - 1], y[0]);
                    for (int i = 0; i + 1 < l; ++i) pr *= t(y[i], y[i + 1]);
                    bt(c, c2) = pr;
                }
            }
            return SourceModel::classical_markov(std::move(bpi), std::move(bt));
        }
        case SourceModel::Kind::QuantumIID:
            return SourceModel::quantum_iid(tensor_power(m.rho(), l, guard));
        case SourceModel::Kind::QuantumBlockIID: {
            if (l % m.block_len() != 0)
                throw std::invalid_argument(
                    "block_transform: L must be a multiple of the existing block length");
            return SourceModel::quantum_iid(tensor_power(m.rho(), l / m.block_len(), guard));
        }
        case SourceModel::Kind::FiniteMixture: {
            std::vector<SourceModel> comps;
            comps.reserve(m.components().size());
            for (const auto& c : m.components()) comps.push_back(block_transform(c, l, guard));
            return SourceModel::finite_mixture(m.weights(), std::move(comps));
        }
    }
    throw std::logic_error("block_transform: unreachable");
}

ErgodicComponentList ergodic_components(const SourceModel& m, int block_len) {
    if (block_len < 1) throw std::invalid_argument("ergodic_components: block_len must be >= 1");
    ErgodicComponentList out;
    if (m.kind() == SourceModel::Kind::FiniteMixture) {
        if (block_len != 1)
            throw std::invalid_argument("ergodic_components: mixtures decompose at block_len 1");
        out.weights = m.weights();
        out.components = m.components();
        out.block_len = 1;
        return out;
    }
    if (m.kind() == SourceModel::Kind::ClassicalMarkov) {
        ChainStructure cs = markov_structure(m.markov_t());
        if (!cs.irreducible)
            throw std::invalid_argument(
                "ergodic_components: reducible chain (closed-class decomposition unsupported)");
        if (cs.period > 1) {
            if (block_len % cs.period != 0)
                throw std::invalid_argument("ergodic_components: chain period " +
                                            std::to_string(cs.period) +
                                            " does not divide block_len " +
                                            std::to_string(block_len));
            // Phase decomposition on the block alphabet: all components share the
            // block transition matrix and differ by the conditioned start class.
            SourceModel blocked = block_transform(m, block_len);
            const int p = cs.period;
            const int d = m.site().dim;
            const RVec& bpi = blocked.markov_pi();
            const int bd = static_cast<int>(bpi.size());
            long long dpow = 1;
            for (int i = 1; i < block_len; ++i) dpow *= d;
            out.weights = RVec::Constant(p, 1.0 / p);
            for (int r = 0; r < p; ++r) {
                RVec cond = RVec::Zero(bd);
                for (int c = 0; c < bd; ++c) {
                    int first = static_cast<int>(c / dpow);
                    if (cs.cyclic_class[first] == r) cond[c] = bpi[c] * p;
                }
                double s = cond.sum();
                if (std::abs(s - 1.0) > 1e-9)
                    throw std::runtime_error("ergodic_components: phase weights are off (" +
                                             std::to_string(s) + ")");
                cond /= s;
                out.components.push_back(
                    SourceModel::classical_markov(std::move(cond), blocked.markov_t()));
            }
            out.block_len = block_len;
            return out;
        }
    }
    out.weights = RVec::Ones(1);
    out.components = {m};
    out.block_len = 1;
    return out;
}

SourceModel restrict_tail(const SourceModel& m, int l, int mm) {
    if (l < 0 || mm < 1) throw std::invalid_argument("restrict_tail: need l >= 0, mm >= 1");
    if (l == 0) {
        if (m.kind() == SourceModel::Kind::QuantumBlockIID && m.block_len() == mm) return m;
        if (m.kind() == SourceModel::Kind::QuantumIID && mm == 1) return m;
        throw std::invalid_argument("restrict_tail: model block length does not equal mm");
    }
    if (m.kind() != SourceModel::Kind::QuantumBlockIID || m.block_len() != l + mm)
        throw std::invalid_argument(
            "restrict_tail: model must be QuantumBlockIID with block_len = l + mm");
    const int d = m.site().dim;
    long long dh = 1;
    for (int i = 0; i < l; ++i) dh *= d;
    long long dt = m.rho().dim() / dh;
    DensityOperator tail = partial_trace_head(m.rho(), static_cast<int>(dh), static_cast<int>(dt));
    if (mm == 1) return SourceModel::quantum_iid(std::move(tail));
    return SourceModel::quantum_block_iid(std::move(tail), mm);
}

double mixing_coefficient(const SourceModel& m, int l, int k) {
    (void)k;
    if (l < 1) throw std::invalid_argument("mixing_coefficient: l must be >= 1");
    if (m.kind() == SourceModel::Kind::ClassicalIID) return 1.0;
    if (m.kind() != SourceModel::Kind::ClassicalMarkov)
        throw std::invalid_argument("mixing_coefficient: model must be ClassicalIID or ClassicalMarkov");
    const RVec& pi = m.markov_pi();
    Eigen::MatrixXd a = m.markov_t();
    for (int i = 1; i < l; ++i) a = a * m.markov_t();
    double alpha = 1.0;
    for (int i = 0; i < pi.size(); ++i) {
        if (pi[i] <= 0) continue;
        for (int j = 0; j < pi.size(); ++j) {
            if (pi[j] <= 0) continue;
            double r = a(i, j) / pi[j];
            double v = r == 0 ? 0.0 : std::min(r, 1.0 / r);
            alpha = std::min(alpha, v);
        }
    }
    return std::clamp(alpha, 0.0, 1.0);
}

MixingReport mixing_report(const SourceModel& m, const std::vector<int>& l_values, int k) {
    MixingReport rep;
    rep.l_values = l_values;
    rep.certified_class =
        "stationary Markov cylinder pairs (exact (T^l)_ij/pi_j collapse), max cylinder length k=" +
        std::to_string(k);
    for (int l : l_values) {
        double a = mixing_coefficient(m, l, k);
        rep.alpha.push_back(a);
        if (a == 0.0) rep.star_mixing = false;
    }
    return rep;
}

bool stationarity_check(const SourceModel& m, int n, int guard) {
    if (n < 1) throw std::invalid_argument("stationarity_check: n must be >= 1");
    const int d = m.site().dim;
    if (m.classical()) {
        RVec big = marginal_distribution(m, n + 1);
        RVec small = marginal_distribution(m, n);
        long long sz = small.size();
        RVec drop_last = RVec::Zero(sz), drop_first = RVec::Zero(sz);
        for (long long i = 0; i < big.size(); ++i) {
            drop_last[i / d] += big[i];
            drop_first[i % sz] += big[i];
        }
        return (drop_last - small).cwiseAbs().maxCoeff() <= 1e-8 &&
               (drop_first - small).cwiseAbs().maxCoeff() <= 1e-8;
    }
    DensityOperator big = marginal_density(m, n + 1, guard);
    DensityOperator small = marginal_density(m, n, guard);
    long long dn = small.dim();
    DensityOperator drop_last = partial_trace_tail(big, static_cast<int>(dn), d);
    DensityOperator drop_first = partial_trace_head(big, d, static_cast<int>(dn));
    return (drop_last.matrix() - small.matrix()).cwiseAbs().maxCoeff() <= 1e-8 &&
           (drop_first.matrix() - small.matrix()).cwiseAbs().maxCoeff() <= 1e-8;
}

// ---- model definition files ----

static RVec json_to_vec(const json& j) {
    RVec v(j.size());
    int i = 0;
    for (const auto& x : j) v[i++] = x.get<double>();
    return v;
}

static Eigen::MatrixXd json_to_mat(const json& j) {
    if (j.empty()) throw std::invalid_argument("model json: empty matrix");
    Eigen::MatrixXd m(j.size(), j[0].size());
    int i = 0;
    for (const auto& row : j) {
        if (row.size() != static_cast<size_t>(m.cols()))
            throw std::invalid_argument("model json: ragged matrix");
        int c = 0;
        for (const auto& x : row) m(i, c++) = x.get<double>();
        ++i;
    }
    return m;
}

static DensityOperator density_from_json(const json& j, const std::string& base_dir) {
    Mat m;
    if (j.contains("rho_csv")) {
        m = parse_matrix_csv(j.at("rho_csv").get<std::string>(), "rho_csv");
    } else {
        std::string path = j.at("rho_csv_path").get<std::string>();
        if (!path.empty() && path[0] != '/' && !base_dir.empty()) path = base_dir + "/" + path;
        m = read_matrix_csv(path);
    }
    return DensityOperator::from_matrix(std::move(m));
}

SourceModel SourceModel::from_json(const json& j, const std::string& base_dir) {
    std::string variant = j.at("variant").get<std::string>();
    if (variant == "ClassicalIID") return classical_iid(json_to_vec(j.at("p")));
    if (variant == "ClassicalMarkov") {
        Eigen::MatrixXd t = json_to_mat(j.at("T"));
        if (j.contains("pi")) return classical_markov(json_to_vec(j.at("pi")), std::move(t));
        return classical_markov(std::move(t));
    }
    if (variant == "QuantumIID") return quantum_iid(density_from_json(j, base_dir));
    if (variant == "QuantumBlockIID")
        return quantum_block_iid(density_from_json(j, base_dir), j.at("block_len").get<int>());
    if (variant == "FiniteMixture") {
        std::vector<SourceModel> comps;
        for (const auto& c : j.at("components")) comps.push_back(from_json(c, base_dir));
        return finite_mixture(json_to_vec(j.at("weights")), std::move(comps));
    }
    throw std::invalid_argument("model json: unknown variant '" + variant + "'");
}

json SourceModel::to_json() const {
    json j;
    switch (kind_) {
        case Kind::ClassicalIID: {
            j["variant"] = "ClassicalIID";
            j["p"] = std::vector<double>(p_.data(), p_.data() + p_.size());
            break;
        }
        case Kind::ClassicalMarkov: {
            j["variant"] = "ClassicalMarkov";
            j["pi"] = std::vector<double>(pi_.data(), pi_.data() + pi_.size());
            std::vector<std::vector<double>> rows;
            for (int i = 0; i < t_.rows(); ++i)
                rows.emplace_back(t_.row(i).begin(), t_.row(i).end());
            j["T"] = rows;
            break;
        }
        case Kind::QuantumIID:
            j["variant"] = "QuantumIID";
            j["rho_csv"] = format_matrix_csv(rho_->matrix());
            break;
        case Kind::QuantumBlockIID:
            j["variant"] = "QuantumBlockIID";
            j["rho_csv"] = format_matrix_csv(rho_->matrix());
            j["block_len"] = block_len_;
            break;
        case Kind::FiniteMixture: {
            j["variant"] = "FiniteMixture";
            j["weights"] = std::vector<double>(weights_.data(), weights_.data() + weights_.size());
            json comps = json::array();
            for (const auto& c : *components_) comps.push_back(c.to_json());
            j["components"] = comps;
            break;
        }
    }
    return j;
}

}  // namespace qsanov

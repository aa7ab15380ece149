#include "qsanov/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qsanov {

namespace {

void check_same_dim(const DensityOperator& a, const DensityOperator& b, const char* op) {
    if (a.dim() != b.dim())
        throw std::invalid_argument(std::string(op) + ": dimension mismatch " +
                                    std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
}

// Weight of psi on each eigenvector of phi, plus the kernel leak.
struct PhiWeights {
    RVec evals;
    RVec weights;
    double kernel_leak = 0.0;
};

PhiWeights phi_weights(const DensityOperator& psi, const DensityOperator& phi) {
    PhiWeights w;
    Mat vecs;
    dense_hermitian_eig(phi.matrix(), w.evals, vecs);
    const int d = phi.dim();
    w.weights.resize(d);
    for (int k = 0; k < d; ++k) {
        Cplx v = (vecs.col(k).adjoint() * psi.matrix() * vecs.col(k))(0, 0);
        w.weights[k] = std::max(0.0, std::real(v));
        if (w.evals[k] <= kPhiKernelTol) w.kernel_leak += w.weights[k];
    }
    return w;
}

ExtReal clamp_rate(ExtReal v) {
    if (v.finite() && v.raw() < 0.0) return ExtReal(0.0);
    return v;
}

bool iid_family(SourceModel::Kind k) {
    return k == SourceModel::Kind::ClassicalIID || k == SourceModel::Kind::QuantumIID ||
           k == SourceModel::Kind::QuantumBlockIID;
}

int model_block_len(const SourceModel& m) {
    return m.kind() == SourceModel::Kind::QuantumBlockIID ? m.block_len() : 1;
}

// Markov view of an iid/markov classical model: stationary start + row matrix.
struct MarkovView {
    RVec pi;
    Eigen::MatrixXd t;
};

MarkovView markov_view(const SourceModel& m) {
    MarkovView v;
    if (m.kind() == SourceModel::Kind::ClassicalMarkov) {
        v.pi = m.markov_pi();
        v.t = m.markov_t();
    } else {
        const RVec& p = m.iid_p();
        v.pi = p;
        v.t.resize(p.size(), p.size());
        for (int i = 0; i < p.size(); ++i) v.t.row(i) = p.transpose();
    }
    return v;
}

// Divergence of one materialized classical level; +inf on support violation.
ExtReal classical_level_divergence(const RVec& p, const RVec& q) {
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) return ExtReal::pos_inf();
        acc += p[i] * std::log(p[i] / q[i]);
    }
    return ExtReal(acc);
}

}  // namespace

double von_neumann_entropy(const DensityOperator& rho) {
    RVec evals;
    Mat vecs;
    dense_hermitian_eig(rho.matrix(), evals, vecs);
    double s = 0.0;
    for (int k = 0; k < evals.size(); ++k) {
        double l = evals[k];
        if (l > 0.0) s -= l * std::log(l);
    }
    return std::max(0.0, s);
}

ExtReal relative_entropy(const DensityOperator& psi, const DensityOperator& phi) {
    check_same_dim(psi, phi, "relative_entropy");
    PhiWeights w = phi_weights(psi, phi);
    if (w.kernel_leak > kSupportTolDefault) return ExtReal::pos_inf();
    double cross = 0.0;
    for (int k = 0; k < w.evals.size(); ++k)
        if (w.evals[k] > kPhiKernelTol && w.weights[k] > 0.0) cross -= w.weights[k] * std::log(w.evals[k]);
    double v = cross - von_neumann_entropy(psi);
    if (v < 0.0 && v > -1e-9) v = 0.0;
    return ExtReal(v);
}

ExtReal cross_term(const DensityOperator& psi, const DensityOperator& phi) {
    check_same_dim(psi, phi, "cross_term");
    PhiWeights w = phi_weights(psi, phi);
    if (w.kernel_leak > kSupportTolDefault) return ExtReal::pos_inf();
    double cross = 0.0;
    for (int k = 0; k < w.evals.size(); ++k)
        if (w.evals[k] > kPhiKernelTol && w.weights[k] > 0.0) cross -= w.weights[k] * std::log(w.evals[k]);
    return ExtReal(cross);
}

ExtReal measured_relative_entropy_lb(const DensityOperator& psi, const DensityOperator& phi) {
    check_same_dim(psi, phi, "measured_relative_entropy_lb");
    SpectralDecomposition sd = hermitian_eig(HermitianOperator(phi.matrix()));
    Mat pinched = Mat::Zero(phi.dim(), phi.dim());
    for (int g = 0; g < sd.group_count(); ++g) {
        Mat pg = sd.projector(g).matrix();
        pinched += pg * psi.matrix() * pg;
    }
    return relative_entropy(DensityOperator::trusted(pinched), phi);
}

RateResult relative_entropy_rate(const SourceModel& p, const SourceModel& q, int n_max,
                                 bool force_slope) {
    if (p.is_mixture())
        throw std::invalid_argument(
            "relative_entropy_rate: mixture has no single rate; use underline_s");

    if (!force_slope && iid_family(p.kind()) && iid_family(q.kind())) {
        int level = std::lcm(model_block_len(p), model_block_len(q));
        ExtReal v = relative_entropy(marginal_density(p, level), marginal_density(q, level));
        return {clamp_rate((1.0 / level) * v), "closed_form_iid", 0, 0.0};
    }

    bool both_chainlike = !q.is_mixture() && p.classical() && q.classical() &&
                          p.site().dim == q.site().dim;
    if (!force_slope && both_chainlike) {
        MarkovView vp = markov_view(p), vq = markov_view(q);
        double acc = 0.0;
        bool infinite = false;
        for (int i = 0; i < vp.pi.size() && !infinite; ++i) {
            if (vp.pi[i] <= 0.0) continue;
            if (vq.pi[i] <= 0.0) {
                infinite = true;
                break;
            }
            for (int j = 0; j < vp.pi.size(); ++j) {
                if (vp.t(i, j) <= 0.0) continue;
                if (vq.t(i, j) <= 0.0) {
                    infinite = true;
                    break;
                }
                acc += vp.pi[i] * vp.t(i, j) * std::log(vp.t(i, j) / vq.t(i, j));
            }
        }
        ExtReal v = infinite ? ExtReal::pos_inf() : ExtReal(acc);
        return {clamp_rate(v), "closed_form_markov", 0, 0.0};
    }

    if (n_max < 4)
        throw std::invalid_argument("relative_entropy_rate: slope method needs n_max >= 4");
    const int n_lo = n_max / 2;
    const bool classical_pair = p.classical() && q.classical() && p.site().dim == q.site().dim;
    std::vector<double> xs, ys;
    for (int n = n_lo; n <= n_max; ++n) {
        ExtReal s = classical_pair
                        ? classical_level_divergence(marginal_distribution(p, n),
                                                     marginal_distribution(q, n))
                        : relative_entropy(marginal_density(p, n), marginal_density(q, n));
        if (s.is_pos_inf()) return {ExtReal::pos_inf(), "finite_n_slope", n_max, 0.0};
        xs.push_back(n);
        ys.push_back(s.finite_value());
    }
    const int m = static_cast<int>(xs.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < m; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < m; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    double slope = sxy / sxx;
    double intercept = my - slope * mx;
    double rss = 0.0;
    for (int i = 0; i < m; ++i) {
        double e = ys[i] - (intercept + slope * xs[i]);
        rss += e * e;
    }
    return {clamp_rate(ExtReal(slope)), "finite_n_slope", n_max, std::sqrt(rss / m)};
}

ExtReal underline_s(const SourceModel& p, const SourceModel& q, int block_len, int n_max) {
    ErgodicComponentList dec = ergodic_components(p, block_len);
    SourceModel qb = block_transform(q, dec.block_len);
    ExtReal best = ExtReal::pos_inf();
    for (int i = 0; i < static_cast<int>(dec.components.size()); ++i) {
        if (dec.weights[i] <= 0.0) continue;
        RateResult r = relative_entropy_rate(dec.components[i], qb, n_max);
        ExtReal v = (1.0 / dec.block_len) * r.value;
        if (v < best) best = v;
    }
    return best;
}

ExtReal overline_s(const SourceModel& p, int block_len) {
    ErgodicComponentList dec = ergodic_components(p, block_len);
    ExtReal best = ExtReal::neg_inf();
    for (int i = 0; i < static_cast<int>(dec.components.size()); ++i) {
        if (dec.weights[i] <= 0.0) continue;
        ExtReal v = (1.0 / dec.block_len) * entropy_rate(dec.components[i]);
        if (v > best) best = v;
    }
    return best;
}

double shannon_entropy(const RVec& p) {
    double s = 0.0;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) s -= p[i] * std::log(p[i]);
    return std::max(0.0, s);
}

ExtReal kl_divergence(const RVec& p, const RVec& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("kl_divergence: length mismatch");
    return classical_level_divergence(p, q);
}

}  // namespace qsanov

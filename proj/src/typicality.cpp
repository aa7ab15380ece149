#include "qsanov/typicality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qsanov {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kRateNmax = 8;               // n_max handed to rate computations
constexpr double kDenseMassFloor = 1e-15;  // per unit of dimension

// ---------- classical (type-table) machinery ----------

struct TableCtx {
    std::shared_ptr<const TypeTable> table;
    std::vector<std::vector<double>> rates;  // [model][group], +inf on zero prob
    int n = 0;
};

bool table_applicable(const std::vector<const SourceModel*>& models, int n) {
    for (const SourceModel* m : models)
        if (!m->classical()) return false;
    return select_table_kind(models, n) != TableKind::none;
}

TableCtx make_table_ctx(const std::vector<const SourceModel*>& models, int n) {
    TableCtx c;
    c.n = n;
    c.table = std::make_shared<const TypeTable>(build_type_table(models, n));
    c.rates.resize(models.size());
    for (size_t im = 0; im < models.size(); ++im) {
        auto& r = c.rates[im];
        r.resize(c.table->group_count());
        for (int g = 0; g < c.table->group_count(); ++g) {
            double lp = c.table->log_prob[im][g];
            r[g] = std::isinf(lp) ? kInf : -lp / n;
        }
    }
    return c;
}

std::vector<uint8_t> window_select(const std::vector<double>& rates, const SpectralWindow& w) {
    std::vector<uint8_t> sel(rates.size(), 0);
    for (size_t g = 0; g < rates.size(); ++g)
        if (w.contains_rate(ExtReal(rates[g]))) sel[g] = 1;
    return sel;
}

double group_mass(const TypeTable& t, int im, int g) {
    double lin = t.prob[im][g];
    bool lin_ok = !std::isnan(t.mult[g]) && !(lin == 0.0 && std::isfinite(t.log_prob[im][g]));
    if (lin_ok) return t.mult[g] * lin;
    double lv = t.log_mult[g] + t.log_prob[im][g];
    return std::isinf(lv) ? 0.0 : std::exp(lv);
}

// Smallest symmetric own-exponent window around s_center reaching target mass:
// groups join in order of distance (ties by index), deterministically.
std::vector<uint8_t> adaptive_select_table(const TableCtx& c, int im, double s_center,
                                           double target) {
    struct Cand {
        double dist;
        int g;
    };
    std::vector<Cand> order;
    for (int g = 0; g < c.table->group_count(); ++g)
        if (std::isfinite(c.rates[im][g])) order.push_back({std::abs(c.rates[im][g] - s_center), g});
    std::sort(order.begin(), order.end(), [](const Cand& a, const Cand& b) {
        return a.dist != b.dist ? a.dist < b.dist : a.g < b.g;
    });
    std::vector<uint8_t> sel(c.table->group_count(), 0);
    double acc = 0.0;
    for (const Cand& cand : order) {
        sel[cand.g] = 1;
        acc += group_mass(*c.table, im, cand.g);
        if (acc >= target - 1e-12) break;
    }
    return sel;
}

std::vector<uint8_t> sel_and(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    std::vector<uint8_t> r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
    return r;
}

void sel_or_inplace(std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    for (size_t i = 0; i < a.size(); ++i) a[i] = a[i] || b[i];
}

TypicalHandle table_handle(const TableCtx& c, std::vector<uint8_t> sel) {
    TypicalHandle h;
    h.n = c.n;
    h.table = c.table;
    h.selection = std::move(sel);
    return h;
}

// ---------- dense machinery ----------

Projector proj_from_groups(const SpectralDecomposition& sd, const std::vector<uint8_t>& gs) {
    int cols = 0;
    for (int g = 0; g < sd.group_count(); ++g)
        if (gs[g]) cols += sd.multiplicity(g);
    if (cols == 0) return Projector::zero(sd.dim());
    Mat basis(sd.dim(), cols);
    int at = 0;
    for (int g = 0; g < sd.group_count(); ++g) {
        if (!gs[g]) continue;
        basis.middleCols(at, sd.multiplicity(g)) = sd.group_columns(g);
        at += sd.multiplicity(g);
    }
    return Projector::from_orthonormal_columns(basis);
}

double eig_rate(double lambda, int n) {
    return lambda <= kPhiKernelTol ? kInf : -std::log(lambda) / n;
}

// Dense twin of adaptive_select_table, over the eigen-groups of the member's
// own marginal (weight of a group = eigenvalue * multiplicity).
Projector adaptive_select_dense(const SpectralDecomposition& sd, int n, double s_center,
                                double target) {
    struct Cand {
        double dist;
        int g;
    };
    std::vector<Cand> order;
    for (int g = 0; g < sd.group_count(); ++g) {
        double r = eig_rate(sd.value(g), n);
        if (std::isfinite(r)) order.push_back({std::abs(r - s_center), g});
    }
    std::sort(order.begin(), order.end(), [](const Cand& a, const Cand& b) {
        return a.dist != b.dist ? a.dist < b.dist : a.g < b.g;
    });
    std::vector<uint8_t> gs(sd.group_count(), 0);
    double acc = 0.0;
    for (const Cand& cand : order) {
        gs[cand.g] = 1;
        acc += sd.value(cand.g) * sd.multiplicity(cand.g);
        if (acc >= target - 1e-12) break;
    }
    return proj_from_groups(sd, gs);
}

TypicalHandle dense_handle(int n, Projector p) {
    TypicalHandle h;
    h.n = n;
    h.dense = std::move(p);
    return h;
}

ExtReal dense_log_mass_per_site(const DensityOperator& rho, const Projector& p, int n) {
    double mass = expectation(rho, p);
    if (mass <= kDenseMassFloor * rho.dim()) return ExtReal::neg_inf();
    return ExtReal(std::log(mass) / n);
}

// ---------- shared bits ----------

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be > 0");
}

ExtReal rate_center(const SourceModel& p, const SourceModel& q) {
    return entropy_rate(p) + relative_entropy_rate(p, q, kRateNmax).value;
}

}  // namespace

bool SpectralWindow::contains_rate(ExtReal rate_per_site) const {
    if (center.is_pos_inf()) {
        if (rate_per_site.is_pos_inf()) return true;
        return rate_per_site.finite() && rate_per_site.raw() > 1.0 / half_width;
    }
    if (!rate_per_site.finite()) return false;
    double c = center.finite_value();
    double r = rate_per_site.raw();
    return r > c - half_width && r < c + half_width;
}

bool SpectralWindow::contains_eigenvalue(double lambda) const {
    if (lambda <= kPhiKernelTol) return center.is_pos_inf();
    return contains_rate(ExtReal(-std::log(lambda) / n));
}

double TypicalHandle::log_rank() const {
    if (is_dense())
        return dense->rank() == 0 ? -kInf : std::log(static_cast<double>(dense->rank()));
    return table_log_rank(*table, selection);
}

Projector spectral_typical_projector(const DensityOperator& phi_n, const SpectralWindow& window) {
    require_positive(window.half_width, "spectral window half_width");
    SpectralDecomposition sd = hermitian_eig(HermitianOperator(phi_n.matrix()));
    std::vector<uint8_t> gs(sd.group_count(), 0);
    for (int g = 0; g < sd.group_count(); ++g)
        gs[g] = window.contains_eigenvalue(sd.value(g)) ? 1 : 0;
    return proj_from_groups(sd, gs);
}

EntropyTypicalResult entropy_typical_projector(const SourceModel& m, int n, double delta) {
    require_positive(delta, "delta");
    if (m.is_mixture())
        throw std::invalid_argument("entropy_typical_projector: mixture is not ergodic");
    double s = entropy_rate(m).finite_value();
    SpectralWindow w{ExtReal(s), delta, n};
    EntropyTypicalResult out;
    if (table_applicable({&m}, n)) {
        TableCtx c = make_table_ctx({&m}, n);
        auto sel = window_select(c.rates[0], w);
        out.mass = table_mass(*c.table, 0, sel);
        out.set = table_handle(c, std::move(sel));
    } else {
        DensityOperator rho = marginal_density(m, n);
        Projector p = spectral_typical_projector(rho, w);
        out.mass = expectation(rho, p);
        out.set = dense_handle(n, std::move(p));
    }
    out.log_rank = out.set.log_rank();
    return out;
}

RelativeAepResult relative_aep_mass(const SourceModel& p, const SourceModel& q, int n, double eps) {
    require_positive(eps, "eps");
    RelativeAepResult out;
    out.center = rate_center(p, q);
    SpectralWindow w{out.center, eps, n};
    if (table_applicable({&p, &q}, n)) {
        TableCtx c = make_table_ctx({&p, &q}, n);
        out.mass = table_mass(*c.table, 0, window_select(c.rates[1], w));
    } else {
        Projector u = spectral_typical_projector(marginal_density(q, n), w);
        out.mass = expectation(marginal_density(p, n), u);
    }
    return out;
}

SeparatingResult maximally_separating_projector(const SourceModel& p, const SourceModel& q, int n,
                                                double eps, double delta) {
    require_positive(eps, "eps");
    require_positive(delta, "delta");
    if (p.is_mixture())
        throw std::invalid_argument("maximally_separating_projector: mixture is not ergodic");
    double sp = entropy_rate(p).finite_value();
    SpectralWindow own{ExtReal(sp), delta, n};
    SpectralWindow ref{rate_center(p, q), eps, n};
    SeparatingResult out;
    if (table_applicable({&p, &q}, n)) {
        TableCtx c = make_table_ctx({&p, &q}, n);
        auto sel = sel_and(window_select(c.rates[0], own), window_select(c.rates[1], ref));
        out.p_mass = table_mass(*c.table, 0, sel);
        out.q_log_mass = ExtReal(table_log_mass(*c.table, 1, sel) / n);
        out.set = table_handle(c, std::move(sel));
    } else {
        DensityOperator rho_p = marginal_density(p, n);
        DensityOperator rho_q = marginal_density(q, n);
        Projector pn = spectral_typical_projector(rho_p, own);
        Projector u = spectral_typical_projector(rho_q, ref);
        Mat upu = u.matrix() * pn.matrix() * u.matrix();
        Projector r = support_projector(HermitianOperator(upu));
        out.p_mass = expectation(rho_p, r);
        out.q_log_mass = dense_log_mass_per_site(rho_q, r, n);
        out.set = dense_handle(n, std::move(r));
    }
    return out;
}

UniversalTypicalResult universal_typical_projector(const std::vector<SourceModel>& omega, int n,
                                                   double level, double delta) {
    if (omega.empty()) throw std::invalid_argument("universal_typical_projector: empty family");
    require_positive(delta, "delta");
    std::vector<double> s(omega.size());
    for (size_t j = 0; j < omega.size(); ++j) {
        s[j] = entropy_rate(omega[j]).finite_value();
        if (!(s[j] < level))
            throw std::invalid_argument("universal_typical_projector: member entropy rate " +
                                        std::to_string(s[j]) + " is not strictly below level " +
                                        std::to_string(level));
    }
    std::vector<const SourceModel*> ptrs;
    for (const auto& m : omega) ptrs.push_back(&m);

    UniversalTypicalResult out;
    if (table_applicable(ptrs, n)) {
        TableCtx c = make_table_ctx(ptrs, n);
        std::vector<uint8_t> join(c.table->group_count(), 0);
        for (size_t j = 0; j < omega.size(); ++j)
            sel_or_inplace(join, window_select(c.rates[j], SpectralWindow{ExtReal(s[j]), delta, n}));
        for (size_t j = 0; j < omega.size(); ++j)
            out.member_masses.push_back(table_mass(*c.table, static_cast<int>(j), join));
        out.set = table_handle(c, std::move(join));
    } else {
        std::vector<Projector> parts;
        std::vector<DensityOperator> margs;
        for (size_t j = 0; j < omega.size(); ++j) {
            margs.push_back(marginal_density(omega[j], n));
            parts.push_back(
                spectral_typical_projector(margs.back(), SpectralWindow{ExtReal(s[j]), delta, n}));
        }
        Projector join = join_projectors(parts);
        for (size_t j = 0; j < omega.size(); ++j)
            out.member_masses.push_back(expectation(margs[j], join));
        out.set = dense_handle(n, std::move(join));
    }
    out.log_rank = out.set.log_rank();
    return out;
}

SeparatingProjection slice_sanov_projector(const std::vector<SourceModel>& omega,
                                           const SourceModel& q, int n, int m_slices,
                                           std::optional<double> eta_override) {
    if (omega.empty()) throw std::invalid_argument("slice_sanov_projector: empty family");
    if (m_slices < 1) throw std::invalid_argument("slice_sanov_projector: m_slices must be >= 1");

    const size_t nm = omega.size();
    std::vector<double> s(nm);
    ExtReal s_ref = ExtReal::pos_inf();
    for (size_t j = 0; j < nm; ++j) {
        s[j] = entropy_rate(omega[j]).finite_value();
        ExtReal r = relative_entropy_rate(omega[j], q, kRateNmax).value;
        if (r < s_ref) s_ref = r;
    }
    double s_min = *std::min_element(s.begin(), s.end());
    double s_max = *std::max_element(s.begin(), s.end());
    double eta = (s_max - s_min > 1e-12) ? (s_max - s_min) / m_slices : eta_override.value_or(0.05);

    std::vector<const SourceModel*> ptrs;
    for (const auto& m : omega) ptrs.push_back(&m);
    ptrs.push_back(&q);
    const int qi = static_cast<int>(nm);
    const bool tabled = table_applicable(ptrs, n);

    SeparatingProjection out;
    out.spec.eta = eta;
    out.spec.s_ref = s_ref;

    if (s_ref.is_pos_inf()) {
        // reference is exponentially blind to the whole family: one unbounded window
        SpectralWindow w{ExtReal::pos_inf(), eta, n};
        SliceEntry entry;
        entry.lo = 1.0 / eta;
        entry.hi = kInf;
        entry.unbounded = true;
        out.spec.intervals.emplace_back(entry.lo, kInf);
        if (tabled) {
            TableCtx c = make_table_ctx(ptrs, n);
            auto sel = window_select(c.rates[qi], w);
            for (size_t j = 0; j < nm; ++j)
                out.member_masses.push_back(table_mass(*c.table, static_cast<int>(j), sel));
            out.ref_log_mass = ExtReal(table_log_mass(*c.table, qi, sel) / n);
            entry.selection = sel;
            out.set = table_handle(c, std::move(sel));
        } else {
            DensityOperator rho_q = marginal_density(q, n);
            Projector pn = spectral_typical_projector(rho_q, w);
            for (size_t j = 0; j < nm; ++j)
                out.member_masses.push_back(expectation(marginal_density(omega[j], n), pn));
            out.ref_log_mass = dense_log_mass_per_site(rho_q, pn, n);
            entry.dense = pn;
            out.set = dense_handle(n, std::move(pn));
        }
        entry.log_rank = out.set.log_rank();
        out.per_slice.push_back(std::move(entry));
        return out;
    }

    // finite branch: slice grid over the family's entropy range
    const double sr = s_ref.finite_value();
    std::vector<double>& grid = out.spec.s_values;
    if (s_max - s_min > 1e-12) {
        for (int k = 0; k <= m_slices; ++k) grid.push_back(s_min + k * eta);
    } else {
        grid.push_back(s_min);
    }
    grid.push_back(grid.back() + eta);  // overflow level
    const int total_slices = static_cast<int>(grid.size());
    for (int i = 0; i < total_slices; ++i) {
        double lo = grid[i] + sr - eta / 2.0;
        double hi = (i + 1 == total_slices) ? kInf : grid[i] + sr + eta / 2.0;
        out.spec.intervals.emplace_back(lo, hi);
    }

    auto in_interval = [](double rate, double lo, double hi) {
        return std::isinf(hi) ? rate > lo : (rate > lo && rate <= hi);
    };

    if (tabled) {
        TableCtx c = make_table_ctx(ptrs, n);
        std::vector<std::vector<uint8_t>> member_sel(nm);
        for (size_t j = 0; j < nm; ++j)
            member_sel[j] = adaptive_select_table(c, static_cast<int>(j), s[j], 1.0 - eta);
        std::vector<uint8_t> assembled(c.table->group_count(), 0);
        for (int i = 0; i < total_slices; ++i) {
            auto [lo, hi] = out.spec.intervals[i];
            std::vector<uint8_t> u(c.table->group_count(), 0);
            for (int g = 0; g < c.table->group_count(); ++g)
                if (in_interval(c.rates[qi][g], lo, hi)) u[g] = 1;
            std::vector<uint8_t> p(c.table->group_count(), 0);
            double level = grid[i] + eta;
            for (size_t j = 0; j < nm; ++j)
                if (s[j] < level) sel_or_inplace(p, member_sel[j]);
            SliceEntry entry;
            entry.lo = lo;
            entry.hi = hi;
            entry.unbounded = std::isinf(hi);
            entry.selection = sel_and(u, p);
            entry.log_rank = table_log_rank(*c.table, entry.selection);
            sel_or_inplace(assembled, entry.selection);
            out.per_slice.push_back(std::move(entry));
        }
        for (size_t j = 0; j < nm; ++j)
            out.member_masses.push_back(table_mass(*c.table, static_cast<int>(j), assembled));
        out.ref_log_mass = ExtReal(table_log_mass(*c.table, qi, assembled) / n);
        out.set = table_handle(c, std::move(assembled));
    } else {
        DensityOperator rho_q = marginal_density(q, n);
        SpectralDecomposition sd_q = hermitian_eig(HermitianOperator(rho_q.matrix()));
        std::vector<Projector> member_proj;
        std::vector<DensityOperator> margs;
        for (size_t j = 0; j < nm; ++j) {
            margs.push_back(marginal_density(omega[j], n));
            SpectralDecomposition sd_j = hermitian_eig(HermitianOperator(margs.back().matrix()));
            member_proj.push_back(adaptive_select_dense(sd_j, n, s[j], 1.0 - eta));
        }
        Mat sum = Mat::Zero(rho_q.dim(), rho_q.dim());
        for (int i = 0; i < total_slices; ++i) {
            auto [lo, hi] = out.spec.intervals[i];
            std::vector<uint8_t> gs(sd_q.group_count(), 0);
            for (int g = 0; g < sd_q.group_count(); ++g)
                if (in_interval(eig_rate(sd_q.value(g), n), lo, hi)) gs[g] = 1;
            Projector u = proj_from_groups(sd_q, gs);
            double level = grid[i] + eta;
            std::vector<Projector> parts;
            for (size_t j = 0; j < nm; ++j)
                if (s[j] < level) parts.push_back(member_proj[j]);
            Projector p = parts.empty() ? Projector::zero(rho_q.dim()) : join_projectors(parts);
            Mat upu = u.matrix() * p.matrix() * u.matrix();
            Projector r = support_projector(HermitianOperator(upu));
            SliceEntry entry;
            entry.lo = lo;
            entry.hi = hi;
            entry.unbounded = std::isinf(hi);
            entry.log_rank = r.rank() == 0 ? -kInf : std::log(static_cast<double>(r.rank()));
            sum += r.matrix();
            entry.dense = std::move(r);
            out.per_slice.push_back(std::move(entry));
        }
        Projector pn = Projector::from_matrix(sum);
        for (size_t j = 0; j < nm; ++j) out.member_masses.push_back(expectation(margs[j], pn));
        out.ref_log_mass = dense_log_mass_per_site(rho_q, pn, n);
        out.set = dense_handle(n, std::move(pn));
    }
    return out;
}

}  // namespace qsanov

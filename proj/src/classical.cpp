#include "qsanov/classical.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace qsanov {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMultCap = 9007199254740992.0;  // 2^53

// c * ln(p) with the 0*ln(0) = 0 convention.
double xlogy(long long c, double p) {
    if (c == 0) return 0.0;
    if (p <= 0.0) return kNegInf;
    return static_cast<double>(c) * std::log(p);
}

double pw(double p, long long c) { return c == 0 ? 1.0 : std::pow(p, static_cast<double>(c)); }

double log_binom(long long n, long long k) {
    if (k < 0 || k > n) return kNegInf;
    return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
           std::lgamma(static_cast<double>(n - k + 1));
}

// Exact C(n, k) while it fits in a double; NaN past 2^53. The running product
// equals C(n-k+i, i) after step i, so it stays integral and the division is exact.
double exact_binom(long long n, long long k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    unsigned __int128 r = 1;
    for (long long i = 1; i <= k; ++i) {
        r *= static_cast<unsigned __int128>(n - k + i);
        r /= static_cast<unsigned __int128>(i);
        if (r > static_cast<unsigned __int128>(kMultCap))
            return std::numeric_limits<double>::quiet_NaN();
    }
    return static_cast<double>(static_cast<uint64_t>(r));
}

double exact_multinomial(long long n, const std::vector<long long>& c) {
    double r = 1.0;
    long long rem = n;
    for (long long ci : c) {
        double b = exact_binom(rem, ci);
        if (std::isnan(b)) return b;
        r *= b;
        if (r > kMultCap) return std::numeric_limits<double>::quiet_NaN();
        rem -= ci;
    }
    return r;
}

struct Leaf {
    bool markov = false;
    const RVec* p = nullptr;   // iid
    const RVec* pi = nullptr;  // markov
    const Eigen::MatrixXd* t = nullptr;
    double weight = 1.0;  // mixture weight of this leaf inside its model
};

bool leaf_of(const SourceModel& m, double w, std::vector<Leaf>& out) {
    Leaf l;
    l.weight = w;
    if (m.kind() == SourceModel::Kind::ClassicalIID) {
        l.p = &m.iid_p();
    } else if (m.kind() == SourceModel::Kind::ClassicalMarkov) {
        l.markov = true;
        l.pi = &m.markov_pi();
        l.t = &m.markov_t();
    } else {
        return false;
    }
    out.push_back(l);
    return true;
}

// One model = weighted classical leaves (mixtures are one level deep by
// construction). ok=false when a non-classical piece shows up.
bool flatten_model(const SourceModel& m, std::vector<Leaf>& out) {
    if (!m.is_mixture()) return leaf_of(m, 1.0, out);
    const RVec& w = m.weights();
    const auto& comps = m.components();
    for (int j = 0; j < static_cast<int>(comps.size()); ++j) {
        if (w[j] == 0.0) continue;
        if (!leaf_of(comps[j], w[j], out)) return false;
    }
    return true;
}

struct FlatModels {
    int alphabet = 0;
    bool ok = false;       // every model classical, shared alphabet
    bool all_iid = false;  // no markov leaf anywhere
    std::vector<std::vector<Leaf>> leaves;  // per model
};

FlatModels flatten_all(const std::vector<const SourceModel*>& models) {
    FlatModels f;
    if (models.empty()) return f;
    f.ok = true;
    f.all_iid = true;
    for (const SourceModel* m : models) {
        if (m == nullptr) throw std::invalid_argument("type table: null model pointer");
        if (f.alphabet == 0) f.alphabet = m->site().dim;
        if (m->site().dim != f.alphabet) {
            f.ok = false;
            return f;
        }
        std::vector<Leaf> ls;
        if (!flatten_model(*m, ls)) {
            f.ok = false;
            return f;
        }
        for (const Leaf& l : ls)
            if (l.markov) f.all_iid = false;
        f.leaves.push_back(std::move(ls));
    }
    return f;
}

double iid_group_count(int n, int a) { return std::exp(log_binom(n + a - 1, a - 1)); }

// Mix weighted leaf values (log + linear) into one model value.
void mix_into(const std::vector<Leaf>& leaves, const std::vector<double>& leaf_log,
              const std::vector<double>& leaf_lin, double& out_log, double& out_lin) {
    if (leaves.size() == 1) {
        out_log = leaf_log[0];
        out_lin = leaf_lin[0];
        return;
    }
    std::vector<double> terms;
    terms.reserve(leaves.size());
    double lin = 0.0;
    for (size_t j = 0; j < leaves.size(); ++j) {
        terms.push_back(std::log(leaves[j].weight) + leaf_log[j]);
        lin += leaves[j].weight * leaf_lin[j];
    }
    out_log = logsumexp(terms);
    out_lin = lin;
}

struct GroupScratch {
    std::vector<std::vector<double>> leaf_log, leaf_lin;
    explicit GroupScratch(const FlatModels& f)
        : leaf_log(f.leaves.size()), leaf_lin(f.leaves.size()) {}
    void reset(const FlatModels& f) {
        for (size_t im = 0; im < f.leaves.size(); ++im) {
            leaf_log[im].assign(f.leaves[im].size(), 0.0);
            leaf_lin[im].assign(f.leaves[im].size(), 1.0);
        }
    }
};

void append_group(TypeTable& t, const FlatModels& f, double lmult, double mult,
                  const GroupScratch& s) {
    t.log_mult.push_back(lmult);
    t.mult.push_back(mult);
    for (size_t im = 0; im < f.leaves.size(); ++im) {
        double lg, ln;
        mix_into(f.leaves[im], s.leaf_log[im], s.leaf_lin[im], lg, ln);
        t.log_prob[im].push_back(lg);
        t.prob[im].push_back(ln);
    }
}

TypeTable table_shell(const FlatModels& f, int n, size_t reserve) {
    TypeTable t;
    t.n = n;
    t.alphabet = f.alphabet;
    t.log_prob.resize(f.leaves.size());
    t.prob.resize(f.leaves.size());
    t.log_mult.reserve(reserve);
    t.mult.reserve(reserve);
    for (auto& row : t.log_prob) row.reserve(reserve);
    for (auto& row : t.prob) row.reserve(reserve);
    return t;
}

TypeTable build_iid_table(const FlatModels& f, int n) {
    const int a = f.alphabet;
    const size_t reserve = static_cast<size_t>(std::min(iid_group_count(n, a) + 2, 1e7));
    TypeTable t = table_shell(f, n, reserve);
    GroupScratch s(f);

    std::vector<long long> c(a, 0);
    std::function<void(int, long long)> walk = [&](int i, long long rem) {
        if (i == a - 1) {
            c[i] = rem;
            double lmult = std::lgamma(n + 1.0);
            for (int k = 0; k < a; ++k) lmult -= std::lgamma(c[k] + 1.0);
            s.reset(f);
            for (size_t im = 0; im < f.leaves.size(); ++im) {
                for (size_t j = 0; j < f.leaves[im].size(); ++j) {
                    const RVec& p = *f.leaves[im][j].p;
                    double lg = 0.0, lin = 1.0;
                    for (int k = 0; k < a; ++k) {
                        lg += xlogy(c[k], p[k]);
                        lin *= pw(p[k], c[k]);
                    }
                    s.leaf_log[im][j] = lg;
                    s.leaf_lin[im][j] = lin;
                }
            }
            append_group(t, f, lmult, exact_multinomial(n, c), s);
            return;
        }
        for (long long v = 0; v <= rem; ++v) {
            c[i] = v;
            walk(i + 1, rem - v);
        }
    };
    walk(0, n);
    return t;
}

// Binary run-structure classes: a group is (first symbol, #zeros, #0-runs,
// #1-runs), which pins every pair count n_ab and hence every markov/iid
// probability. Count of strings = C(z-1, r-1) * C(o-1, s-1) (run lengths are
// positive compositions).
TypeTable build_markov_binary_table(const FlatModels& f, int n) {
    const size_t reserve = static_cast<size_t>(3.0 * n * n / 4.0 + 8);
    TypeTable t = table_shell(f, n, reserve);
    GroupScratch s(f);

    auto emit = [&](int a, long long z, long long o, long long n00, long long n01, long long n10,
                    long long n11, double lmult, double mult) {
        s.reset(f);
        for (size_t im = 0; im < f.leaves.size(); ++im) {
            for (size_t j = 0; j < f.leaves[im].size(); ++j) {
                const Leaf& l = f.leaves[im][j];
                double lg, lin;
                if (!l.markov) {
                    const RVec& p = *l.p;
                    lg = xlogy(z, p[0]) + xlogy(o, p[1]);
                    lin = pw(p[0], z) * pw(p[1], o);
                } else {
                    const RVec& pi = *l.pi;
                    const Eigen::MatrixXd& tr = *l.t;
                    lg = xlogy(1, pi[a]) + xlogy(n00, tr(0, 0)) + xlogy(n01, tr(0, 1)) +
                         xlogy(n10, tr(1, 0)) + xlogy(n11, tr(1, 1));
                    lin = pi[a] * pw(tr(0, 0), n00) * pw(tr(0, 1), n01) * pw(tr(1, 0), n10) *
                          pw(tr(1, 1), n11);
                }
                s.leaf_log[im][j] = lg;
                s.leaf_lin[im][j] = lin;
            }
        }
        append_group(t, f, lmult, mult, s);
    };

    // single-run strings
    emit(0, n, 0, n - 1, 0, 0, 0, 0.0, 1.0);  // all zeros
    emit(1, 0, n, 0, 0, 0, n - 1, 0.0, 1.0);  // all ones

    for (long long z = 1; z <= n - 1; ++z) {
        const long long o = n - z;
        auto lm = [&](long long r, long long ss) { return log_binom(z - 1, r - 1) + log_binom(o - 1, ss - 1); };
        auto m = [&](long long r, long long ss) {
            double b1 = exact_binom(z - 1, r - 1), b2 = exact_binom(o - 1, ss - 1);
            if (std::isnan(b1) || std::isnan(b2)) return std::numeric_limits<double>::quiet_NaN();
            double v = b1 * b2;
            return v > kMultCap ? std::numeric_limits<double>::quiet_NaN() : v;
        };
        // a=0, b=0: s = r-1; transitions 0->1 and 1->0 both s times
        for (long long r = 2; r <= std::min(z, o + 1); ++r)
            emit(0, z, o, z - r, r - 1, r - 1, o - (r - 1), lm(r, r - 1), m(r, r - 1));
        // a=0, b=1: s = r; last 1-run never exits
        for (long long r = 1; r <= std::min(z, o); ++r)
            emit(0, z, o, z - r, r, r - 1, o - r, lm(r, r), m(r, r));
        // a=1, b=0: s = r; last 0-run never exits
        for (long long r = 1; r <= std::min(z, o); ++r)
            emit(1, z, o, z - r, r - 1, r, o - r, lm(r, r), m(r, r));
        // a=1, b=1: s = r+1; every 0-run both entered and exited
        for (long long r = 1; r <= std::min(z, o - 1); ++r)
            emit(1, z, o, z - r, r, r, o - (r + 1), lm(r, r + 1), m(r, r + 1));
    }
    return t;
}

TypeTable build_paths_table(const FlatModels& f, int n) {
    const int d = f.alphabet;
    long long total = 1;
    for (int i = 0; i < n; ++i) total *= d;
    TypeTable t = table_shell(f, n, static_cast<size_t>(total));
    GroupScratch s(f);

    std::vector<int> x(n, 0);
    for (long long idx = 0;; ++idx) {
        s.reset(f);
        for (size_t im = 0; im < f.leaves.size(); ++im) {
            for (size_t j = 0; j < f.leaves[im].size(); ++j) {
                const Leaf& l = f.leaves[im][j];
                double lg = 0.0, lin = 1.0;
                if (!l.markov) {
                    const RVec& p = *l.p;
                    for (int k = 0; k < n; ++k) {
                        lg += xlogy(1, p[x[k]]);
                        lin *= p[x[k]];
                    }
                } else {
                    const RVec& pi = *l.pi;
                    const Eigen::MatrixXd& tr = *l.t;
                    lg = xlogy(1, pi[x[0]]);
                    lin = pi[x[0]];
                    for (int k = 1; k < n; ++k) {
                        lg += xlogy(1, tr(x[k - 1], x[k]));
                        lin *= tr(x[k - 1], x[k]);
                    }
                }
                s.leaf_log[im][j] = lg;
                s.leaf_lin[im][j] = lin;
            }
        }
        append_group(t, f, 0.0, 1.0, s);
        if (idx + 1 == total) break;
        // advance the string (last site fastest, matching base-d index order)
        for (int k = n - 1; k >= 0; --k) {
            if (++x[k] < d) break;
            x[k] = 0;
        }
    }
    return t;
}

void check_selection(const TypeTable& t, const std::vector<uint8_t>& sel) {
    if (static_cast<int>(sel.size()) != t.group_count())
        throw std::invalid_argument("type table: selection size " + std::to_string(sel.size()) +
                                    " != group count " + std::to_string(t.group_count()));
}

}  // namespace

double logsumexp(const std::vector<double>& xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx == kNegInf ? kNegInf : mx;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

TableKind select_table_kind(const std::vector<const SourceModel*>& models, int n) {
    if (n < 1) throw std::invalid_argument("type table: n must be >= 1");
    FlatModels f = flatten_all(models);
    if (!f.ok) return TableKind::none;
    if (f.all_iid && iid_group_count(n, f.alphabet) <= kTableGroupGuard) return TableKind::iid_types;
    if (f.alphabet == 2 && n <= kTableMarkovGuard) return TableKind::markov_binary;
    double total = std::pow(static_cast<double>(f.alphabet), n);
    if (total <= static_cast<double>(kTablePathGuard)) return TableKind::paths;
    return TableKind::none;
}

TypeTable build_type_table(const std::vector<const SourceModel*>& models, int n, TableKind kind) {
    if (kind == TableKind::none) kind = select_table_kind(models, n);
    if (kind == TableKind::none)
        throw std::invalid_argument("type table: no exact engine covers these models at n = " +
                                    std::to_string(n));
    FlatModels f = flatten_all(models);
    if (!f.ok) throw std::invalid_argument("type table: models must be classical on one alphabet");
    switch (kind) {
        case TableKind::iid_types:
            if (!f.all_iid) throw std::invalid_argument("type table: iid engine needs iid models");
            return build_iid_table(f, n);
        case TableKind::markov_binary:
            if (f.alphabet != 2 || n > kTableMarkovGuard)
                throw std::invalid_argument("type table: run-structure engine needs alphabet 2, n <= " +
                                            std::to_string(kTableMarkovGuard));
            return build_markov_binary_table(f, n);
        case TableKind::paths: {
            double total = std::pow(static_cast<double>(f.alphabet), n);
            if (total > static_cast<double>(kTablePathGuard))
                throw DimGuardError("type table: " + std::to_string(total) +
                                    " strings exceed path guard " + std::to_string(kTablePathGuard));
            return build_paths_table(f, n);
        }
        case TableKind::none:;
    }
    throw std::logic_error("unreachable");
}

double table_log_rank(const TypeTable& t, const std::vector<uint8_t>& sel) {
    check_selection(t, sel);
    std::vector<double> terms;
    for (int g = 0; g < t.group_count(); ++g)
        if (sel[g]) terms.push_back(t.log_mult[g]);
    return logsumexp(terms);
}

double table_log_mass(const TypeTable& t, int im, const std::vector<uint8_t>& sel) {
    check_selection(t, sel);
    if (im < 0 || im >= static_cast<int>(t.log_prob.size()))
        throw std::invalid_argument("type table: model index out of range");
    std::vector<double> terms;
    for (int g = 0; g < t.group_count(); ++g) {
        if (!sel[g]) continue;
        double v = t.log_mult[g] + t.log_prob[im][g];
        if (v != kNegInf) terms.push_back(v);
    }
    return logsumexp(terms);
}

double table_mass(const TypeTable& t, int im, const std::vector<uint8_t>& sel) {
    check_selection(t, sel);
    if (im < 0 || im >= static_cast<int>(t.prob.size()))
        throw std::invalid_argument("type table: model index out of range");
    // Neumaier-compensated sum; exact linear terms preferred when available.
    double sum = 0.0, comp = 0.0;
    for (int g = 0; g < t.group_count(); ++g) {
        if (!sel[g]) continue;
        double term;
        double lin = t.prob[im][g];
        bool lin_ok = !std::isnan(t.mult[g]) && !(lin == 0.0 && t.log_prob[im][g] != kNegInf);
        if (lin_ok) {
            term = t.mult[g] * lin;
        } else {
            double lv = t.log_mult[g] + t.log_prob[im][g];
            term = lv == kNegInf ? 0.0 : std::exp(lv);
        }
        double s = sum + term;
        if (std::abs(sum) >= std::abs(term))
            comp += (sum - s) + term;
        else
            comp += (term - s) + sum;
        sum = s;
    }
    double v = sum + comp;
    if (v < 0.0) v = 0.0;
    if (v > 1.0 && v < 1.0 + 1e-9) v = 1.0;
    return v;
}

}  // namespace qsanov

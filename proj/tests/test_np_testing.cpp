#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "qsanov/divergence.hpp"
#include "qsanov/np_testing.hpp"

using namespace qsanov;

namespace {

const double kInf = std::numeric_limits<double>::infinity();
const double kLn2 = std::log(2.0);

DensityOperator diag_density(const RVec& p) {
    Mat m = Mat::Zero(p.size(), p.size());
    for (int i = 0; i < p.size(); ++i) m(i, i) = p[i];
    return DensityOperator::from_matrix(m);
}

DensityOperator diag2(double a, double b) {
    RVec v(2);
    v << a, b;
    return diag_density(v);
}

DensityOperator random_density(std::mt19937& rng, int d) {
    std::normal_distribution<double> g;
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = Cplx(g(rng), g(rng));
    Mat m = a * a.adjoint();
    m /= m.trace().real();
    return DensityOperator::from_matrix(m);
}

// density with a guaranteed kernel direction
DensityOperator rank_deficient(std::mt19937& rng, int d) {
    DensityOperator rho = random_density(rng, d);
    DensityOperator dir = random_density(rng, d);
    RVec ev;
    Mat vv;
    dense_hermitian_eig(dir.matrix(), ev, vv);
    Mat p = Mat::Identity(d, d) - vv.col(d - 1) * vv.col(d - 1).adjoint();
    Mat m = p * rho.matrix() * p;
    m = 0.5 * (m + m.adjoint());
    m /= m.trace().real();
    return DensityOperator::from_matrix(m);
}

RVec dirichlet(std::mt19937& rng, int d) {
    std::exponential_distribution<double> e;
    RVec v(d);
    for (int i = 0; i < d; ++i) v[i] = e(rng);
    return v / v.sum();
}

// direct enumeration of randomized threshold tests on a finite alphabet
ExtReal ref_relaxed_value(const RVec& p, const RVec& q, double eps) {
    struct Atom {
        double p, q, r;
    };
    std::vector<Atom> xs;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0) xs.push_back({p[i], q[i], q[i] > 0 ? p[i] / q[i] : kInf});
    std::sort(xs.begin(), xs.end(), [](const Atom& a, const Atom& b) {
        if (a.r != b.r) return a.r > b.r;
        return a.q < b.q;
    });
    double target = 1.0 - eps, cp = 0.0, cq = 0.0;
    for (const Atom& a : xs) {
        if (cp + a.p >= target) {
            double mass = cq + ((target - cp) / a.p) * a.q;
            return mass > 0 ? ExtReal(std::log(mass)) : ExtReal::neg_inf();
        }
        cp += a.p;
        cq += a.q;
    }
    return cq > 0 ? ExtReal(std::log(cq)) : ExtReal::neg_inf();
}

// likelihood-ratio upper set completed by the crossing atom: the rounding
// np_projection_beta is specified to perform, as an independent reference
ExtReal ref_greedy_det_value(const RVec& p, const RVec& q, double eps) {
    struct Atom {
        double p, q, r;
    };
    std::vector<Atom> xs;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0) xs.push_back({p[i], q[i], q[i] > 0 ? p[i] / q[i] : kInf});
    std::sort(xs.begin(), xs.end(), [](const Atom& a, const Atom& b) {
        if (a.r != b.r) return a.r > b.r;
        return a.q < b.q;
    });
    double target = 1.0 - eps, cp = 0.0, cq = 0.0;
    for (const Atom& a : xs) {
        if (cp >= target - 1e-12) break;
        cp += a.p;
        cq += a.q;
    }
    return cq > 0 ? ExtReal(std::log(cq)) : ExtReal::neg_inf();
}

RVec bern(double p0) {
    RVec v(2);
    v << p0, 1.0 - p0;
    return v;
}

SourceModel lazy_chain() {
    Eigen::MatrixXd t(2, 2);
    t << 0.75, 0.25, 0.25, 0.75;
    return SourceModel::classical_markov(t);
}

// |theta> = cos(theta)|0> + sin(theta)|1>
DensityOperator pure_qubit(double theta) {
    Eigen::Vector2cd v;
    v << std::cos(theta), std::sin(theta);
    return DensityOperator::from_matrix(v * v.adjoint());
}

DensityOperator rotated_diag(double a, double b, double theta) {
    Eigen::Matrix2cd r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    Eigen::Matrix2cd d = Eigen::Matrix2cd::Zero();
    d(0, 0) = a;
    d(1, 1) = b;
    return DensityOperator::from_matrix(r * d * r.adjoint());
}

}  // namespace

TEST_CASE("relaxed threshold tests: pinned values") {
    // identical states: the objective equals the constraint functional
    std::mt19937 rng(7);
    DensityOperator rho = random_density(rng, 3);
    TestOutcome same = np_relaxed_beta(rho, rho, 0.4);
    CHECK(same.value.finite_value() == doctest::Approx(std::log(0.6)).epsilon(1e-10));
    CHECK(std::abs(same.type1_error - 0.4) <= 1e-9);

    TestOutcome two = np_relaxed_beta(diag2(0.5, 0.5), diag2(0.25, 0.75), 0.4);
    CHECK(two.value.finite_value() == doctest::Approx(std::log(0.4)).epsilon(1e-12));
    CHECK(std::abs(two.type1_error - 0.4) <= 1e-9);
    CHECK(two.randomization_gamma == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(two.threshold_t == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
    CHECK(two.kind == TestKind::relaxed);

    TestOutcome orth = np_relaxed_beta(diag2(1.0, 0.0), diag2(0.0, 1.0), 0.1);
    CHECK(orth.value.is_neg_inf());
    CHECK(orth.type1_error == 0.0);
    CHECK(std::isinf(orth.threshold_t));

    CHECK_THROWS_AS(np_relaxed_beta(rho, rho, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(np_relaxed_beta(rho, rho, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(np_relaxed_beta(rho, diag2(0.5, 0.5), 0.3), std::invalid_argument);
}

TEST_CASE("projection rounding: pinned values") {
    ProjectionTest pt = np_projection_beta(diag2(0.5, 0.5), diag2(0.25, 0.75), 0.4);
    CHECK(pt.q.rank() == 2);  // no proper subset reaches null mass 0.6
    CHECK(pt.outcome.value.finite_value() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(pt.outcome.kind == TestKind::projection);

    ProjectionTest flat = np_projection_beta(diag2(0.5, 0.5), diag2(0.5, 0.5), 0.4);
    CHECK(flat.q.rank() == 2);
    CHECK(flat.outcome.value.finite_value() == doctest::Approx(0.0).epsilon(1e-12));

    ProjectionTest orth = np_projection_beta(diag2(1.0, 0.0), diag2(0.0, 1.0), 0.1);
    CHECK(orth.q.rank() == 1);
    CHECK(std::abs(orth.q.matrix()(0, 0).real() - 1.0) <= 1e-12);  // supp(psi)
    CHECK(orth.outcome.value.is_neg_inf());
}

TEST_CASE("relaxation soundness, converse, and reported masses (fuzz)") {
    std::mt19937 rng(20260815);
    std::uniform_int_distribution<int> dim_pick(2, 8);
    const double eps_grid[] = {0.1, 0.3, 0.5, 0.75};
    for (int seed = 0; seed < 120; ++seed) {
        int d = dim_pick(rng);
        DensityOperator psi = random_density(rng, d);
        DensityOperator phi = seed % 3 == 2 ? rank_deficient(rng, d) : random_density(rng, d);
        double eps = eps_grid[seed % 4];
        CAPTURE(seed);
        CAPTURE(d);
        CAPTURE(eps);

        TestOutcome rel = np_relaxed_beta(psi, phi, eps);
        ProjectionTest prj = np_projection_beta(psi, phi, eps);

        CHECK(rel.type1_error <= eps + 1e-9);
        CHECK(prj.outcome.type1_error <= eps + 1e-9);
        CHECK(prj.outcome.value >= rel.value - ExtReal(1e-9));
        if (!std::isinf(rel.threshold_t)) CHECK(std::abs(rel.type1_error - eps) <= 1e-9);

        // reported masses must match the actual projector (linear scale: below
        // ~1e-14 both numbers are rounding noise of the kernel split)
        CHECK(std::abs(expectation(psi, prj.q) - (1.0 - prj.outcome.type1_error)) <= 1e-9);
        double phi_mass = expectation(phi, prj.q);
        double reported = prj.outcome.value.is_neg_inf() ? 0.0 : std::exp(prj.outcome.value.raw());
        CHECK(std::abs(phi_mass - reported) <= 1e-9);

        // data-processing converse at the achieved type-I error
        CHECK(rel.value >= converse_bound(psi, phi, rel.type1_error) - ExtReal(1e-9));
        CHECK(prj.outcome.value >=
              converse_bound(psi, phi, prj.outcome.type1_error) - ExtReal(1e-9));
    }
}

TEST_CASE("oracle agreement on diagonal inputs") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> dim_pick(2, 8);
    std::uniform_real_distribution<double> eps_pick(0.05, 0.6);
    for (int seed = 0; seed < 60; ++seed) {
        int d = dim_pick(rng);
        RVec p = dirichlet(rng, d);
        RVec q = dirichlet(rng, d);
        if (seed % 5 == 4) {  // reference with a dead outcome
            q[0] = 0.0;
            q /= q.sum();
        }
        double eps = eps_pick(rng);
        CAPTURE(seed);
        CAPTURE(d);
        CAPTURE(eps);

        TestOutcome rel = np_relaxed_beta(diag_density(p), diag_density(q), eps);
        ExtReal ref = ref_relaxed_value(p, q, eps);
        if (ref.is_neg_inf())
            CHECK(rel.value.is_neg_inf());
        else
            CHECK(rel.value.finite_value() == doctest::Approx(ref.raw()).epsilon(1e-9));

        // the projection rounding must match the greedy reference exactly and
        // can never beat the exhaustive subset optimum
        TestOutcome bf = classical_beta_bruteforce(p, q, eps);
        ProjectionTest prj = np_projection_beta(diag_density(p), diag_density(q), eps);
        CHECK(prj.outcome.value >= bf.value - ExtReal(1e-12));
        ExtReal greedy = ref_greedy_det_value(p, q, eps);
        if (greedy.is_neg_inf())
            CHECK(prj.outcome.value.is_neg_inf());
        else
            CHECK(prj.outcome.value.finite_value() == doctest::Approx(greedy.raw()).epsilon(1e-9));
    }
}

TEST_CASE("projection rounding is not the subset optimum in general") {
    // the likelihood-ratio upper set plus its boundary atom can lose to a
    // knapsack swap when the feasibility window is wide enough
    RVec p(3), q(3);
    p << 0.47, 0.28, 0.25;
    q << 0.12, 0.45, 0.43;
    ProjectionTest prj = np_projection_beta(diag_density(p), diag_density(q), 0.3);
    TestOutcome bf = classical_beta_bruteforce(p, q, 0.3);
    CHECK(prj.outcome.value.finite_value() == doctest::Approx(std::log(0.57)).epsilon(1e-12));
    CHECK(bf.value.finite_value() == doctest::Approx(std::log(0.55)).epsilon(1e-12));
    CHECK(bf.type1_error == doctest::Approx(1.0 - 0.72).epsilon(1e-12));
}

TEST_CASE("bruteforce subset oracle: pinned values") {
    TestOutcome flat = classical_beta_bruteforce(bern(0.5), bern(0.25), 0.4);
    CHECK(flat.value.finite_value() == 0.0);  // only the full set reaches mass 0.6
    CHECK(flat.type1_error == 0.0);
    CHECK(flat.kind == TestKind::subset);

    RVec one(1);
    one << 1.0;
    CHECK(classical_beta_bruteforce(one, one, 0.3).value.finite_value() == 0.0);

    std::mt19937 rng(5);
    RVec p = dirichlet(rng, 6), q = dirichlet(rng, 6);
    TestOutcome same = classical_beta_bruteforce(p, p, 0.35);
    CHECK(same.value.finite_value() >= std::log(0.65) - 1e-12);

    RVec big = RVec::Constant(21, 1.0 / 21);
    CHECK_THROWS_AS(classical_beta_bruteforce(big, big, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(classical_beta_bruteforce(p, q, 1.2), std::invalid_argument);
}

TEST_CASE("type-class beta pair: oracle cross-check and large n") {
    SourceModel p = SourceModel::classical_iid(bern(0.5));
    SourceModel q = SourceModel::classical_iid(bern(0.25));

    // n = 4: exact agreement with the 16-outcome subset bruteforce
    TypeBetaPair four = classical_beta_iid_types(p, q, 4, 0.3);
    RVec p16(16), q16(16);
    for (int s = 0; s < 16; ++s) {
        double pp = 1.0, qq = 1.0;
        for (int b = 0; b < 4; ++b) {
            bool one = (s >> b) & 1;
            pp *= 0.5;
            qq *= one ? 0.75 : 0.25;
        }
        p16[s] = pp;
        q16[s] = qq;
    }
    TestOutcome bf = classical_beta_bruteforce(p16, q16, 0.3);
    CHECK(four.deterministic.value == bf.value);
    CHECK(four.deterministic.type1_error == doctest::Approx(bf.type1_error).epsilon(1e-12));
    CHECK(four.relaxed.value <= four.deterministic.value);
    CHECK(std::abs(four.relaxed.type1_error - 0.3) <= 1e-12);
    // cross-engine: the quantum solver on the same diagonal pair
    TestOutcome pencil = np_relaxed_beta(diag_density(p16), diag_density(q16), 0.3);
    CHECK(pencil.value.finite_value() == doctest::Approx(four.relaxed.value.raw()).epsilon(1e-9));

    // uniform vs itself: value pinned by the constraint
    SourceModel u = SourceModel::classical_iid(bern(0.5));
    TypeBetaPair ten = classical_beta_iid_types(u, u, 10, 0.4);
    CHECK(ten.relaxed.value.finite_value() == doctest::Approx(std::log(0.6)).epsilon(1e-12));

    // n = 4096: relaxed rate within 0.02 nats of the closed form
    TypeBetaPair big = classical_beta_iid_types(p, q, 4096, 0.1);
    double h = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(std::abs(big.relaxed.value.raw() / 4096.0 + h) <= 0.02);
    CHECK(big.deterministic.value >= big.relaxed.value);
    CHECK(std::abs(big.deterministic.value.raw() / 4096.0 + h) <= 0.02);
    CHECK(big.relaxed.type1_error <= 0.1 + 1e-9);

    CHECK_THROWS_AS(classical_beta_iid_types(lazy_chain(), q, 8, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(classical_beta_iid_types(p, q, 32768, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(classical_beta_iid_types(p, q, 8, 0.0), std::invalid_argument);
}

TEST_CASE("converse bound: values and vacuous branches") {
    std::mt19937 rng(12);
    DensityOperator rho = random_density(rng, 4);
    ExtReal cb = converse_bound(rho, rho, 0.4);
    CHECK(cb.finite_value() == doctest::Approx(-kLn2 / 0.6).epsilon(1e-12));
    CHECK(np_relaxed_beta(rho, rho, 0.4).value >= cb);

    CHECK(converse_bound(diag2(0.5, 0.5), diag2(1.0, 0.0), 0.3).is_neg_inf());

    // Bernoulli pair at n = 4: bound approx -(4h + ln 2)/0.9, respected by the oracle
    RVec p16(16), q16(16);
    for (int s = 0; s < 16; ++s) {
        double pp = 1.0, qq = 1.0;
        for (int b = 0; b < 4; ++b) {
            bool one = (s >> b) & 1;
            pp *= 0.5;
            qq *= one ? 0.75 : 0.25;
        }
        p16[s] = pp;
        q16[s] = qq;
    }
    double h = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    ExtReal bound = converse_bound(diag_density(p16), diag_density(q16), 0.1);
    CHECK(bound.finite_value() == doctest::Approx(-(4 * h + kLn2) / 0.9).epsilon(1e-9));
    CHECK(classical_beta_bruteforce(p16, q16, 0.1).value >= bound);
}

TEST_CASE("epsilon monotonicity of the relaxed value") {
    std::mt19937 rng(31);
    DensityOperator psi = random_density(rng, 4);
    DensityOperator phi = random_density(rng, 4);
    ExtReal prev = ExtReal::pos_inf();
    for (double eps : {0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 0.9}) {
        ExtReal v = np_relaxed_beta(psi, phi, eps).value;
        CHECK(v <= prev + ExtReal(1e-12));
        prev = v;
    }
    SourceModel p = SourceModel::classical_iid(bern(0.5));
    SourceModel q = SourceModel::classical_iid(bern(0.25));
    prev = ExtReal::pos_inf();
    for (double eps : {0.05, 0.1, 0.2, 0.4, 0.6, 0.8}) {
        ExtReal v = classical_beta_iid_types(p, q, 64, eps).relaxed.value;
        CHECK(v <= prev + ExtReal(1e-12));
        prev = v;
    }
}

TEST_CASE("hp probe: classical pairs") {
    SourceModel u = SourceModel::classical_iid(bern(0.5));
    HpProbeReport same = hp_probe(u, u, 0.1, {2, 8, 32});
    CHECK(same.target == ExtReal(0.0));
    CHECK(same.verdict == "consistent");
    for (size_t i = 0; i < same.n_values.size(); ++i) {
        CHECK(same.beta_over_n[i] <= ExtReal(1e-12));
        CHECK(same.beta_over_n[i].raw() >= std::log(0.9) / same.n_values[i] - 1e-9);
    }

    SourceModel q = SourceModel::classical_iid(bern(0.25));
    HpProbeReport stein = hp_probe(u, q, 0.1, {1024, 4096});
    CHECK(stein.verdict == "consistent");
    CHECK(stein.final_gap <= 0.02);
    double h = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(stein.target.finite_value() == doctest::Approx(-h).epsilon(1e-9));

    // markov reference runs on the run-structure table
    HpProbeReport markov = hp_probe(u, lazy_chain(), 0.1, {16, 64}, 0.1);
    CHECK(markov.verdict == "consistent");
    for (const ExtReal& b : markov.beta_over_n) CHECK(b >= markov.target - ExtReal(1e-6));

    SourceModel mix = SourceModel::finite_mixture(
        bern(0.5), {SourceModel::classical_iid(bern(0.1)), SourceModel::classical_iid(bern(0.9))});
    CHECK_THROWS(hp_probe(mix, u, 0.1, {4}));
    CHECK_THROWS_AS(hp_probe(u, q, 0.1, {}), std::invalid_argument);
    CHECK_THROWS_AS(hp_probe(u, q, 0.1, {0, 4}), std::invalid_argument);
}

TEST_CASE("hp probe: noncommuting qubit pair") {
    SourceModel psi = SourceModel::quantum_iid(pure_qubit(0.0));
    SourceModel phi = SourceModel::quantum_iid(rotated_diag(0.75, 0.25, M_PI / 8));
    HpProbeReport rep = hp_probe(psi, phi, 0.1, {2, 4, 6, 8, 10});
    CHECK(rep.target.finite());
    // never below the per-n data-processing converse level
    for (size_t i = 0; i < rep.beta_over_n.size(); ++i) {
        double level = (rep.target.raw() - kLn2 / rep.n_values[i]) / 0.9;
        CHECK(rep.beta_over_n[i].raw() >= level - 1e-9);
    }
    double gap_first = std::abs(rep.beta_over_n.front().raw() - rep.target.raw());
    double gap_last = std::abs(rep.beta_over_n.back().raw() - rep.target.raw());
    CHECK(gap_last < gap_first);
    CHECK(rep.verdict == "consistent");
}

TEST_CASE("test kind names") {
    CHECK(std::string(to_string(TestKind::relaxed)) == "relaxed");
    CHECK(std::string(to_string(TestKind::projection)) == "projection");
    CHECK(std::string(to_string(TestKind::subset)) == "subset");
}

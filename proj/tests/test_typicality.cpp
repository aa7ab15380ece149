#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qsanov/typicality.hpp"

using namespace qsanov;

namespace {

const double kLn2 = std::log(2.0);
const double kInfD = std::numeric_limits<double>::infinity();

RVec vec2(double a, double b) {
    RVec v(2);
    v << a, b;
    return v;
}

DensityOperator diag2(double a, double b) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return DensityOperator::from_matrix(m);
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

double commutator_norm(const Projector& p, const DensityOperator& rho) {
    Mat c = p.matrix() * rho.matrix() - rho.matrix() * p.matrix();
    return c.cwiseAbs().maxCoeff();
}

// classical converse floor on ln(reference mass) for a test passing with
// type-1 error eps against an iid null with per-site divergence kl
double converse_floor(int n, double kl, double eps) {
    return -(n * kl + kLn2) / (1.0 - eps);
}

}  // namespace

TEST_CASE("spectral windows on small products") {
    auto flat3 = tensor_power(DensityOperator::from_matrix(Mat::Identity(2, 2) * 0.5), 3);
    Projector all = spectral_typical_projector(flat3, {ExtReal(kLn2), 0.3, 3});
    CHECK(all.rank() == 8);
    Projector none = spectral_typical_projector(flat3, {ExtReal(0.0), 0.3, 3});
    CHECK(none.rank() == 0);
    CHECK_THROWS_AS(spectral_typical_projector(flat3, {ExtReal(0.0), 0.0, 3}),
                    std::invalid_argument);

    auto phi2 = tensor_power(diag2(0.75, 0.25), 2);
    Projector mid = spectral_typical_projector(phi2, {ExtReal(0.84), 0.1, 2});
    CHECK(mid.rank() == 2);  // the two 0.1875 eigenvectors, exponent 0.8370
    CHECK(commutator_norm(mid, phi2) <= 1e-9);

    // kernel window: delta_0 pair has a rank-3 kernel at n = 2
    auto point2 = tensor_power(diag2(1.0, 0.0), 2);
    Projector ker = spectral_typical_projector(point2, {ExtReal::pos_inf(), 0.1, 2});
    CHECK(ker.rank() == 3);
    auto fair2 = tensor_power(diag2(0.5, 0.5), 2);
    CHECK(expectation(fair2, ker) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("disjoint covering windows partition the identity") {
    auto phi = tensor_power(diag2(0.7, 0.3), 2);
    std::vector<SpectralWindow> windows = {
        {ExtReal(0.1), 0.1, 2}, {ExtReal(0.4), 0.2, 2}, {ExtReal(0.8), 0.2, 2},
        {ExtReal(1.2), 0.2, 2}};
    Mat sum = Mat::Zero(4, 4);
    for (const auto& w : windows) {
        Projector p = spectral_typical_projector(phi, w);
        CHECK(commutator_norm(p, phi) <= 1e-9);
        sum += p.matrix();
    }
    CHECK((sum - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("entropy-typical projections") {
    auto flat = SourceModel::quantum_iid(DensityOperator::from_matrix(Mat::Identity(2, 2) * 0.5));
    auto r1 = entropy_typical_projector(flat, 4, 0.3);
    CHECK(r1.set.is_dense());
    CHECK(r1.set.dense->rank() == 16);
    CHECK(r1.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r1.log_rank == doctest::Approx(4 * kLn2).epsilon(1e-12));

    Mat pure = Mat::Zero(2, 2);
    pure(0, 0) = 1.0;
    auto r2 = entropy_typical_projector(
        SourceModel::quantum_iid(DensityOperator::from_matrix(pure)), 3, 0.1);
    CHECK(r2.set.dense->rank() == 1);
    CHECK(r2.mass == doctest::Approx(1.0).epsilon(1e-12));

    // classical fast path at n = 512
    auto skew = SourceModel::classical_iid(vec2(0.75, 0.25));
    auto r3 = entropy_typical_projector(skew, 512, 0.1);
    CHECK_FALSE(r3.set.is_dense());
    CHECK(r3.mass >= 0.95);
    double h = 0.562335;
    CHECK(r3.log_rank / 512.0 >= h - 0.1);
    CHECK(r3.log_rank / 512.0 <= h + 0.1);

    auto fair = SourceModel::classical_iid(vec2(0.5, 0.5));
    auto r4 = entropy_typical_projector(fair, 512, 0.05);
    CHECK(r4.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r4.log_rank == doctest::Approx(512 * kLn2).epsilon(1e-12));

    auto mix = SourceModel::finite_mixture(vec2(0.5, 0.5), {fair, skew});
    CHECK_THROWS_AS(entropy_typical_projector(mix, 8, 0.1), std::invalid_argument);

    // table and dense paths agree on the same model
    auto cl = SourceModel::classical_iid(vec2(0.6, 0.4));
    auto qu = SourceModel::quantum_iid(diag2(0.6, 0.4));
    auto rc = entropy_typical_projector(cl, 6, 0.2);
    auto rq = entropy_typical_projector(qu, 6, 0.2);
    CHECK_FALSE(rc.set.is_dense());
    CHECK(rq.set.is_dense());
    CHECK(rc.mass == doctest::Approx(rq.mass).epsilon(1e-9));
    CHECK(rc.log_rank == doctest::Approx(rq.log_rank).epsilon(1e-9));
}

TEST_CASE("relative AEP masses") {
    auto flat = SourceModel::quantum_iid(DensityOperator::from_matrix(Mat::Identity(2, 2) * 0.5));
    auto a = relative_aep_mass(flat, flat, 5, 0.2);
    CHECK(a.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.center.finite_value() == doctest::Approx(kLn2).epsilon(1e-12));

    auto fair = SourceModel::classical_iid(vec2(0.5, 0.5));
    auto skew = SourceModel::classical_iid(vec2(0.25, 0.75));
    auto b = relative_aep_mass(fair, skew, 512, 0.2);
    CHECK(b.center.finite_value() == doctest::Approx(kLn2 + 0.143841).epsilon(1e-5));
    CHECK(b.mass >= 0.95);

    double prev = 0.0;
    for (int n : {64, 128, 256, 512}) {
        double m = relative_aep_mass(fair, skew, n, 0.2).mass;
        CHECK(m >= prev - 1e-9);
        prev = m;
    }

    auto point = SourceModel::classical_iid(vec2(1.0, 0.0));
    auto c = relative_aep_mass(fair, point, 10, 0.5);
    CHECK(c.center.is_pos_inf());
    CHECK(c.mass == 1.0 - std::pow(0.5, 10));  // exact count of the reference kernel
}

TEST_CASE("maximally separating projection") {
    auto flat = SourceModel::quantum_iid(DensityOperator::from_matrix(Mat::Identity(2, 2) * 0.5));
    auto t = maximally_separating_projector(flat, flat, 4, 0.2, 0.2);
    CHECK(t.set.dense->rank() == 16);
    CHECK(t.p_mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.q_log_mass.finite_value() == doctest::Approx(0.0).epsilon(1e-12));

    auto fair = SourceModel::classical_iid(vec2(0.5, 0.5));
    auto skew = SourceModel::classical_iid(vec2(0.25, 0.75));
    auto u = maximally_separating_projector(fair, skew, 512, 0.1, 0.1);
    CHECK(u.p_mass >= 0.9);
    CHECK(u.q_log_mass.finite_value() >= -0.143841 - 0.12);
    CHECK(u.q_log_mass.finite_value() <= -0.143841 + 0.12);
    // optimality floor: no projector with this type-1 error can be more separating
    double floor512 = converse_floor(512, 0.143841, 1.0 - u.p_mass);
    CHECK(512.0 * u.q_log_mass.finite_value() >= floor512 - 1e-9);

    Mat pure = Mat::Zero(2, 2);
    pure(0, 0) = 1.0;
    auto pure_iid = SourceModel::quantum_iid(DensityOperator::from_matrix(pure));
    auto v = maximally_separating_projector(pure_iid, flat, 8, 0.2, 0.1);
    CHECK(v.p_mass >= 0.99);
    CHECK(v.q_log_mass.finite_value() <= -kLn2 + 0.2);
    CHECK(v.q_log_mass.finite_value() == doctest::Approx(-kLn2).epsilon(1e-9));
}

TEST_CASE("universal typical projector") {
    auto a = SourceModel::classical_iid(vec2(0.3, 0.7));
    auto b = SourceModel::classical_iid(vec2(0.7, 0.3));
    auto single = universal_typical_projector({a}, 512, 0.7, 0.05);
    auto own = entropy_typical_projector(a, 512, 0.05);
    CHECK(single.member_masses[0] == doctest::Approx(own.mass).epsilon(1e-12));
    CHECK(single.log_rank == doctest::Approx(own.log_rank).epsilon(1e-12));

    auto pair = universal_typical_projector({a, b}, 512, 0.7, 0.05);
    CHECK(pair.member_masses[0] >= 0.95);
    CHECK(pair.member_masses[1] >= 0.95);
    CHECK(pair.log_rank / 512.0 <= 0.7);
    CHECK(pair.log_rank / 512.0 <= 0.7 + 0.05 + kLn2 / 512.0);
    CHECK(pair.member_masses[0] >= own.mass - 1e-12);  // join monotonicity

    auto fair = SourceModel::classical_iid(vec2(0.5, 0.5));
    CHECK_THROWS_AS(universal_typical_projector({fair}, 64, kLn2, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(universal_typical_projector({}, 64, 0.5, 0.1), std::invalid_argument);

    // quantum dense join: pure + maximally mixed members
    Mat pure = Mat::Zero(2, 2);
    pure(0, 0) = 1.0;
    auto pure_iid = SourceModel::quantum_iid(DensityOperator::from_matrix(pure));
    auto flat = SourceModel::quantum_iid(DensityOperator::from_matrix(Mat::Identity(2, 2) * 0.5));
    auto qj = universal_typical_projector({pure_iid, flat}, 4, kLn2 + 0.1, 0.1);
    CHECK(qj.set.dense->rank() == 16);
    CHECK(qj.member_masses[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(qj.member_masses[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(qj.log_rank / 4.0 <= kLn2 + 0.1 + 0.1 + kLn2 / 4.0);
}

TEST_CASE("slice construction: classical families") {
    auto fair = SourceModel::classical_iid(vec2(0.5, 0.5));
    auto skew = SourceModel::classical_iid(vec2(0.25, 0.75));

    // singleton family degenerates to (roughly) the separating projection
    auto sp = slice_sanov_projector({fair}, skew, 512, 4);
    auto ms = maximally_separating_projector(fair, skew, 512, 0.05, 0.05);
    CHECK(std::abs(sp.ref_log_mass.finite_value() - ms.q_log_mass.finite_value()) <= 0.05);
    // the reference exponent of null-typical strings has sd ~ 0.024 here, so a
    // width-0.05 slice family captures only the center + upper tail
    CHECK(sp.member_masses[0] >= 0.75);
    CHECK(sp.spec.eta == doctest::Approx(0.05));  // degenerate grid, default width
    CHECK(sp.spec.s_values.size() == 2);
    CHECK(sp.per_slice.size() == 2);
    CHECK(sp.per_slice.back().unbounded);

    // two-member family against the fair reference
    auto a = SourceModel::classical_iid(vec2(0.3, 0.7));
    auto b = SourceModel::classical_iid(vec2(0.7, 0.3));
    auto sj = slice_sanov_projector({a, b}, fair, 512, 4);
    CHECK(sj.member_masses[0] >= 0.95);
    CHECK(sj.member_masses[1] >= 0.95);
    CHECK(sj.ref_log_mass.finite_value() <= -0.0823 + 0.03);
    CHECK(sj.spec.s_ref.finite_value() == doctest::Approx(0.082282).epsilon(1e-4));
    // optimality floor against the best member
    double floor512 = converse_floor(512, 0.082282, 1.0 - sj.member_masses[0]);
    CHECK(512.0 * sj.ref_log_mass.finite_value() >= floor512 - 1e-9);

    // grid invariants
    for (size_t i = 1; i < sj.spec.s_values.size(); ++i)
        CHECK(sj.spec.s_values[i] - sj.spec.s_values[i - 1] ==
              doctest::Approx(sj.spec.eta).epsilon(1e-12));
    for (size_t i = 1; i < sj.spec.intervals.size(); ++i)
        CHECK(sj.spec.intervals[i].first >= sj.spec.intervals[i - 1].second - 1e-12);

    // infinite-reference branch
    auto point = SourceModel::classical_iid(vec2(1.0, 0.0));
    auto si = slice_sanov_projector({fair}, point, 10, 4, 0.1);
    CHECK(si.spec.s_ref.is_pos_inf());
    CHECK(si.member_masses[0] == 1.0 - std::pow(0.5, 10));
    CHECK(si.ref_log_mass.is_neg_inf());
    REQUIRE(si.per_slice.size() == 1);
    CHECK(si.per_slice[0].unbounded);
    CHECK(si.per_slice[0].lo == doctest::Approx(10.0));

    CHECK_THROWS_AS(slice_sanov_projector({}, fair, 8, 4), std::invalid_argument);
    CHECK_THROWS_AS(slice_sanov_projector({fair}, skew, 8, 0), std::invalid_argument);
}

TEST_CASE("slice construction: table and dense paths agree") {
    auto cl = slice_sanov_projector({SourceModel::classical_iid(vec2(0.6, 0.4))},
                                    SourceModel::classical_iid(vec2(0.3, 0.7)), 6, 3);
    auto qu = slice_sanov_projector({SourceModel::quantum_iid(diag2(0.6, 0.4))},
                                    SourceModel::quantum_iid(diag2(0.3, 0.7)), 6, 3);
    CHECK_FALSE(cl.set.is_dense());
    CHECK(qu.set.is_dense());
    CHECK(cl.member_masses[0] == doctest::Approx(qu.member_masses[0]).epsilon(1e-9));
    CHECK(cl.ref_log_mass.finite_value() ==
          doctest::Approx(qu.ref_log_mass.finite_value()).epsilon(1e-9));
    CHECK(cl.set.log_rank() == doctest::Approx(qu.set.log_rank()).epsilon(1e-9));
}

TEST_CASE("slice construction: dense soundness fuzz") {
    std::mt19937 rng(411);
    for (int it = 0; it < 12; ++it) {
        int n = 4 + static_cast<int>(rng() % 3) * 2;  // 4, 6, 8
        auto m1 = SourceModel::quantum_iid(random_density(rng, 2));
        auto m2 = SourceModel::quantum_iid(random_density(rng, 2));
        auto qm = SourceModel::quantum_iid(random_density(rng, 2));
        auto sp = slice_sanov_projector({m1, m2}, qm, n, 3);
        REQUIRE(sp.set.is_dense());
        int dim = sp.set.dense->matrix().rows();
        Mat sum = Mat::Zero(dim, dim);
        for (size_t i = 0; i < sp.per_slice.size(); ++i) {
            const Mat& ri = sp.per_slice[i].dense->matrix();
            sum += ri;
            for (size_t j = i + 1; j < sp.per_slice.size(); ++j) {
                Mat prod = ri * sp.per_slice[j].dense->matrix();
                CHECK(prod.cwiseAbs().maxCoeff() <= 1e-9);  // mutual orthogonality
            }
        }
        CHECK((sum - sp.set.dense->matrix()).cwiseAbs().maxCoeff() <= 1e-8);
        for (double m : sp.member_masses) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0 + 1e-12);
        }
        if (!sp.ref_log_mass.is_neg_inf()) CHECK(sp.ref_log_mass.raw() <= 1e-12);
    }
}

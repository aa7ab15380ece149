#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qsanov/divergence.hpp"
#include "qsanov/experiments.hpp"
#include "qsanov/np_testing.hpp"
#include "qsanov/typicality.hpp"

namespace py = pybind11;
using namespace qsanov;

namespace {

DensityOperator density(const Mat& m) { return DensityOperator::from_matrix(m); }

std::vector<double> raw_all(const std::vector<ExtReal>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (const ExtReal& x : xs) out.push_back(x.raw());
    return out;
}

}  // namespace

PYBIND11_MODULE(_qsanov, m) {
    m.doc() = "finite-blocklength laboratory for quantum Stein/Sanov hypothesis testing";

    py::register_exception<AcceptanceFailure>(m, "AcceptanceFailure");

    py::class_<SourceModel>(m, "SourceModel",
                            "stationary source: classical iid/Markov, quantum (block-)iid, "
                            "or a finite mixture")
        .def_static(
            "classical_iid", [](const RVec& p) { return SourceModel::classical_iid(p); },
            py::arg("p"))
        .def_static(
            "classical_markov",
            [](const Eigen::MatrixXd& t) { return SourceModel::classical_markov(t); },
            py::arg("T"))
        .def_static(
            "quantum_iid", [](const Mat& rho) { return SourceModel::quantum_iid(density(rho)); },
            py::arg("rho"))
        .def_static(
            "finite_mixture",
            [](const RVec& w, std::vector<SourceModel> comps) {
                return SourceModel::finite_mixture(w, std::move(comps));
            },
            py::arg("weights"), py::arg("components"))
        .def_static(
            "from_json",
            [](const std::string& text, const std::string& base_dir) {
                return SourceModel::from_json(nlohmann::json::parse(text), base_dir);
            },
            py::arg("text"), py::arg("base_dir") = "")
        .def("to_json", [](const SourceModel& s) { return s.to_json().dump(); })
        .def("classical", &SourceModel::classical)
        .def("describe", &SourceModel::describe)
        .def("__repr__", &SourceModel::describe);

    py::class_<TestOutcome>(m, "TestOutcome", "hypothesis test with its error profile")
        .def_property_readonly("value",
                               [](const TestOutcome& t) { return t.value.raw(); },
                               "ln of the reference mass (-inf when exactly zero)")
        .def_readonly("type1_error", &TestOutcome::type1_error)
        .def_readonly("threshold_t", &TestOutcome::threshold_t)
        .def_readonly("randomization_gamma", &TestOutcome::randomization_gamma)
        .def_property_readonly(
            "kind", [](const TestOutcome& t) { return std::string(to_string(t.kind)); })
        .def("__repr__", [](const TestOutcome& t) {
            return "TestOutcome(value=" + t.value.str() +
                   ", type1_error=" + std::to_string(t.type1_error) + ")";
        });

    // --- single-system operations on numpy matrices ---
    m.def(
        "von_neumann_entropy", [](const Mat& rho) { return von_neumann_entropy(density(rho)); },
        py::arg("rho"));
    m.def(
        "relative_entropy",
        [](const Mat& a, const Mat& b) { return relative_entropy(density(a), density(b)).raw(); },
        py::arg("psi"), py::arg("phi"), "Umegaki relative entropy; +inf on support violation");
    m.def(
        "measured_relative_entropy_lb",
        [](const Mat& a, const Mat& b) {
            return measured_relative_entropy_lb(density(a), density(b)).raw();
        },
        py::arg("psi"), py::arg("phi"));
    m.def(
        "np_relaxed_beta",
        [](const Mat& a, const Mat& b, double eps) {
            return np_relaxed_beta(density(a), density(b), eps);
        },
        py::arg("psi"), py::arg("phi"), py::arg("eps"),
        "optimal randomized test: min reference mass at type-I error <= eps");
    m.def(
        "np_projection_beta",
        [](const Mat& a, const Mat& b, double eps) {
            ProjectionTest pt = np_projection_beta(density(a), density(b), eps);
            return py::make_tuple(pt.outcome, pt.q.rank());
        },
        py::arg("psi"), py::arg("phi"), py::arg("eps"),
        "projector rounding of the relaxed test; returns (outcome, rank)");
    m.def(
        "converse_bound",
        [](const Mat& a, const Mat& b, double eps) {
            return converse_bound(density(a), density(b), eps).raw();
        },
        py::arg("psi"), py::arg("phi"), py::arg("eps"));
    m.def("classical_beta_bruteforce", &classical_beta_bruteforce, py::arg("p"), py::arg("q"),
          py::arg("eps"));

    // --- source-model operations ---
    m.def(
        "marginal_density",
        [](const SourceModel& s, int n, int max_dim) {
            return marginal_density(s, n, max_dim).matrix();
        },
        py::arg("model"), py::arg("n"), py::arg("max_dim") = kDimGuardDefault);
    m.def("marginal_distribution", &marginal_distribution, py::arg("model"), py::arg("n"));
    m.def(
        "entropy_rate", [](const SourceModel& s) { return entropy_rate(s).raw(); },
        py::arg("model"));
    m.def(
        "relative_entropy_rate",
        [](const SourceModel& p, const SourceModel& q, int n_max) {
            RateResult r = relative_entropy_rate(p, q, n_max);
            return py::make_tuple(r.value.raw(), r.method);
        },
        py::arg("null"), py::arg("reference"), py::arg("n_max") = 8,
        "per-site relative entropy rate; returns (value, method)");
    m.def(
        "underline_s",
        [](const SourceModel& p, const SourceModel& q, int block_len, int n_max) {
            return underline_s(p, q, block_len, n_max).raw();
        },
        py::arg("null"), py::arg("reference"), py::arg("block_len") = 1, py::arg("n_max") = 8);
    m.def(
        "overline_s",
        [](const SourceModel& p, int block_len) { return overline_s(p, block_len).raw(); },
        py::arg("model"), py::arg("block_len") = 1);
    m.def("mixing_coefficient", &mixing_coefficient, py::arg("model"), py::arg("l"),
          py::arg("k") = 1);
    m.def(
        "mixing_report",
        [](const SourceModel& s, const std::vector<int>& ls) {
            MixingReport r = mixing_report(s, ls);
            py::dict d;
            d["l_values"] = r.l_values;
            d["alpha"] = r.alpha;
            d["certified_class"] = r.certified_class;
            d["star_mixing"] = r.star_mixing;
            return d;
        },
        py::arg("model"), py::arg("l_values"));

    // --- typicality ---
    m.def(
        "relative_aep_mass",
        [](const SourceModel& p, const SourceModel& q, int n, double eps) {
            RelativeAepResult r = relative_aep_mass(p, q, n, eps);
            return py::make_tuple(r.mass, r.center.raw());
        },
        py::arg("null"), py::arg("reference"), py::arg("n"), py::arg("eps"),
        "mass of the relative AEP window; returns (mass, window_center)");
    m.def(
        "maximally_separating_projector",
        [](const SourceModel& p, const SourceModel& q, int n, double eps, double delta) {
            SeparatingResult r = maximally_separating_projector(p, q, n, eps, delta);
            return py::make_tuple(r.p_mass, r.q_log_mass.raw());
        },
        py::arg("null"), py::arg("reference"), py::arg("n"), py::arg("eps"), py::arg("delta"),
        "returns (null mass, per-site ln reference mass)");
    m.def(
        "universal_typical_projector",
        [](const std::vector<SourceModel>& omega, int n, double level, double delta) {
            UniversalTypicalResult r = universal_typical_projector(omega, n, level, delta);
            return py::make_tuple(r.member_masses, r.log_rank);
        },
        py::arg("omega"), py::arg("n"), py::arg("level"), py::arg("delta"),
        "returns (member masses, ln rank)");
    m.def(
        "slice_sanov_projector",
        [](const std::vector<SourceModel>& omega, const SourceModel& q, int n, int m_slices,
           std::optional<double> eta) {
            SeparatingProjection r = slice_sanov_projector(omega, q, n, m_slices, eta);
            py::dict d;
            d["member_masses"] = r.member_masses;
            d["ref_log_mass"] = r.ref_log_mass.raw();
            d["log_rank"] = r.set.log_rank();
            d["eta"] = r.spec.eta;
            d["s_ref"] = r.spec.s_ref.raw();
            return d;
        },
        py::arg("omega"), py::arg("reference"), py::arg("n"), py::arg("m_slices") = 4,
        py::arg("eta") = py::none(),
        "one projector sequence separating the whole family from the reference");

    m.def(
        "hp_probe",
        [](const SourceModel& p, const SourceModel& q, double eps, std::vector<int> n_values,
           double tolerance) {
            HpProbeReport r = hp_probe(p, q, eps, std::move(n_values), tolerance);
            py::dict d;
            d["n_values"] = r.n_values;
            d["beta_over_n"] = raw_all(r.beta_over_n);
            d["target"] = r.target.raw();
            d["final_gap"] = r.final_gap;
            d["verdict"] = r.verdict;
            return d;
        },
        py::arg("null"), py::arg("reference"), py::arg("eps"), py::arg("n_values"),
        py::arg("tolerance") = 0.05,
        "beta/n sweep against the rate target; verdict consistent|inconclusive|violated");

    // --- experiment runner ---
    m.def(
        "run_experiment_csv",
        [](const std::string& config_text, const std::string& base_dir) {
            ExperimentConfig cfg = ExperimentConfig::from_json_text(config_text, base_dir);
            return to_csv(run_experiment(cfg));
        },
        py::arg("config_json"), py::arg("base_dir") = "",
        "run a JSON experiment config, return the CSV table");
    m.def(
        "run_experiment_jsonl",
        [](const std::string& config_text, const std::string& base_dir) {
            ExperimentConfig cfg = ExperimentConfig::from_json_text(config_text, base_dir);
            return to_jsonl(run_experiment(cfg));
        },
        py::arg("config_json"), py::arg("base_dir") = "");
}

#include "qsanov/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qsanov/divergence.hpp"

namespace qsanov {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kRateDepth = 8;

[[noreturn]] void cfg_error(const std::string& path, const std::string& msg) {
    throw std::invalid_argument("config." + path + ": " + msg);
}

double get_real(const json& j, const std::string& path) {
    if (!j.is_number()) cfg_error(path, "expected a number");
    return j.get<double>();
}

// -------- per-n beta computation (exact table engine when available) --------

struct BetaPoint {
    ExtReal relaxed = 0.0;
    ExtReal projection = 0.0;
    double type1 = 0.0;
    ExtReal converse_rate = 0.0;  // per site, at the configured eps
};

// total relative entropy of the two table models' n-site distributions
ExtReal table_relative_entropy(const TypeTable& t, int ip, int iq) {
    double acc = 0.0, comp = 0.0;
    for (int g = 0; g < t.group_count(); ++g) {
        double lp = t.log_prob[ip][g];
        if (std::isinf(lp) && lp < 0) continue;  // no null mass here
        double lq = t.log_prob[iq][g];
        if (std::isinf(lq) && lq < 0) return ExtReal::pos_inf();
        double term = std::exp(t.log_mult[g] + lp) * (lp - lq);
        double y = term - comp;
        double s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    return acc;
}

ExtReal converse_from_total_s(const ExtReal& s_total, double eps) {
    if (s_total.is_pos_inf()) return ExtReal::neg_inf();
    return -(s_total.raw() + std::log(2.0)) / (1.0 - eps);
}

void converse_or_die(const char* what, int n, const ExtReal& value, double type1,
                     const ExtReal& s_total) {
    ExtReal bound = converse_from_total_s(s_total, type1);
    if (value < bound - ExtReal(1e-9))
        throw AcceptanceFailure(std::string("converse bound violated by ") + what + " test at n = " +
                                std::to_string(n) + ": " + value.str() + " < " + bound.str());
}

BetaPoint beta_point(const SourceModel& p, const SourceModel& q, int n, double eps, int max_dim) {
    BetaPoint b;
    std::vector<const SourceModel*> ms{&p, &q};
    if (p.classical() && q.classical() && select_table_kind(ms, n) != TableKind::none) {
        TypeTable t = build_type_table(ms, n, TableKind::none);
        TypeBetaPair pair = classical_beta_from_table(t, 0, 1, eps);
        ExtReal s_total = table_relative_entropy(t, 0, 1);
        b.relaxed = pair.relaxed.value;
        b.projection = pair.deterministic.value;
        b.type1 = pair.relaxed.type1_error;
        b.converse_rate = (1.0 / n) * converse_from_total_s(s_total, eps);
        converse_or_die("relaxed", n, pair.relaxed.value, pair.relaxed.type1_error, s_total);
        converse_or_die("deterministic", n, pair.deterministic.value,
                        pair.deterministic.type1_error, s_total);
    } else {
        DensityOperator pn = marginal_density(p, n, max_dim);
        DensityOperator qn = marginal_density(q, n, max_dim);
        TestOutcome rel = np_relaxed_beta(pn, qn, eps);
        ProjectionTest prj = np_projection_beta(pn, qn, eps);
        ExtReal s_total = relative_entropy(pn, qn);
        b.relaxed = rel.value;
        b.projection = prj.outcome.value;
        b.type1 = rel.type1_error;
        b.converse_rate = (1.0 / n) * converse_from_total_s(s_total, eps);
        converse_or_die("relaxed", n, rel.value, rel.type1_error, s_total);
        converse_or_die("projection", n, prj.outcome.value, prj.outcome.type1_error, s_total);
    }
    return b;
}

double gap_between(const ExtReal& v, const ExtReal& target) {
    if (v.finite() && target.finite()) return std::abs(v.raw() - target.raw());
    if (v == target) return 0.0;
    return kInf;
}

double schedule_at(const std::vector<double>& sched, size_t i, double fallback) {
    return sched.empty() ? fallback : sched[i];
}

struct RowTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

RunRecord base_record(const ExperimentConfig& cfg, int n) {
    RunRecord r;
    r.kind = to_string(cfg.kind);
    r.n = n;
    r.seed = cfg.seed;
    r.config_hash = cfg.hash();
    return r;
}

std::string fmt_cell(const ExtReal& v) { return v.str(); }

std::string fmt_cell(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ordered_json json_number_or_sentinel(const ExtReal& v) {
    if (v.finite()) return v.raw();
    return v.is_pos_inf() ? "+inf" : "-inf";
}

ordered_json json_number_or_sentinel(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

}  // namespace

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::stein: return "stein";
        case ExperimentKind::sanov: return "sanov";
        case ExperimentKind::aep: return "aep";
        case ExperimentKind::mixing_audit: return "mixing_audit";
        case ExperimentKind::stationary: return "stationary";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "stein") return ExperimentKind::stein;
    if (s == "sanov") return ExperimentKind::sanov;
    if (s == "aep") return ExperimentKind::aep;
    if (s == "mixing_audit" || s == "mixing") return ExperimentKind::mixing_audit;
    if (s == "stationary") return ExperimentKind::stationary;
    cfg_error("kind", "unknown experiment kind '" + s + "'");
}

const SourceModel& ExperimentConfig::model(const std::string& name) const {
    for (const auto& [k, m] : models)
        if (k == name) return m;
    cfg_error("models." + name, "missing required model");
}

std::vector<SourceModel> ExperimentConfig::model_group(const std::string& prefix) const {
    std::vector<SourceModel> out;
    for (const auto& [k, m] : models)
        if (k == prefix || k.rfind(prefix + ".", 0) == 0) out.push_back(m);
    return out;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");

    static const char* known[] = {"kind",     "models",  "eps",          "delta",
                                  "eta",      "n_values", "m_slices",    "seed",
                                  "max_dim",  "out",     "format",       "l_values",
                                  "tolerance", "eps_schedule", "delta_schedule"};
    for (const auto& [key, _] : j.items())
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            cfg_error(key, "unknown field");

    ExperimentConfig cfg;
    if (!j.contains("kind")) cfg_error("kind", "required");
    if (!j.at("kind").is_string()) cfg_error("kind", "expected a string");
    cfg.kind = experiment_kind_from_string(j.at("kind").get<std::string>());

    if (!j.contains("models") || !j.at("models").is_object())
        cfg_error("models", "required object of named models");
    for (const auto& [name, mj] : j.at("models").items()) {
        try {
            if (mj.is_array()) {
                int i = 0;
                for (const auto& entry : mj)
                    cfg.models.emplace_back(name + "." + std::to_string(i++),
                                            SourceModel::from_json(entry, base_dir));
            } else {
                cfg.models.emplace_back(name, SourceModel::from_json(mj, base_dir));
            }
        } catch (const AcceptanceFailure&) {
            throw;
        } catch (const std::exception& e) {
            cfg_error("models." + name, e.what());
        }
    }

    if (j.contains("eps")) cfg.eps = get_real(j.at("eps"), "eps");
    if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) cfg_error("eps", "must lie in (0,1)");
    if (j.contains("delta")) cfg.delta = get_real(j.at("delta"), "delta");
    if (!(cfg.delta > 0.0)) cfg_error("delta", "must be positive");
    if (j.contains("eta")) {
        cfg.eta = get_real(j.at("eta"), "eta");
        if (!(*cfg.eta > 0.0)) cfg_error("eta", "must be positive");
    }

    if (j.contains("n_values")) {
        if (!j.at("n_values").is_array()) cfg_error("n_values", "expected an array");
        for (const auto& v : j.at("n_values")) cfg.n_values.push_back(v.get<int>());
        for (size_t i = 0; i < cfg.n_values.size(); ++i) {
            if (cfg.n_values[i] < 1) cfg_error("n_values", "entries must be positive");
            if (i > 0 && cfg.n_values[i] <= cfg.n_values[i - 1])
                cfg_error("n_values", "must be strictly ascending");
        }
    }
    if (cfg.kind != ExperimentKind::mixing_audit && cfg.n_values.empty())
        cfg_error("n_values", "required for this experiment kind");

    if (j.contains("m_slices")) cfg.m_slices = j.at("m_slices").get<int>();
    if (cfg.m_slices < 1) cfg_error("m_slices", "must be >= 1");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_dim")) cfg.max_dim = j.at("max_dim").get<int>();
    if (cfg.max_dim < 2) cfg_error("max_dim", "must be >= 2");
    if (j.contains("out")) cfg.out_path = j.at("out").get<std::string>();
    if (j.contains("format")) cfg.format = j.at("format").get<std::string>();
    if (cfg.format != "csv" && cfg.format != "jsonl")
        cfg_error("format", "must be 'csv' or 'jsonl'");
    if (j.contains("l_values")) {
        for (const auto& v : j.at("l_values")) cfg.l_values.push_back(v.get<int>());
        for (int l : cfg.l_values)
            if (l < 1) cfg_error("l_values", "entries must be positive");
    }
    if (j.contains("tolerance")) cfg.tolerance = get_real(j.at("tolerance"), "tolerance");
    if (!(cfg.tolerance > 0.0)) cfg_error("tolerance", "must be positive");

    auto read_schedule = [&](const char* key, std::vector<double>& dst, bool unit_interval) {
        if (!j.contains(key)) return;
        for (const auto& v : j.at(key)) dst.push_back(v.get<double>());
        if (dst.size() != cfg.n_values.size())
            cfg_error(key, "length must match n_values");
        for (double x : dst)
            if (unit_interval ? !(x > 0.0 && x < 1.0) : !(x > 0.0))
                cfg_error(key, unit_interval ? "entries must lie in (0,1)"
                                             : "entries must be positive");
    };
    read_schedule("eps_schedule", cfg.eps_schedule, true);
    read_schedule("delta_schedule", cfg.delta_schedule, false);
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string dir;
    auto slash = path.find_last_of('/');
    if (slash != std::string::npos) dir = path.substr(0, slash);
    return from_json_text(ss.str(), dir);
}

std::string ExperimentConfig::canonical_json() const {
    ordered_json j;
    j["kind"] = to_string(kind);
    ordered_json ms = ordered_json::array();
    for (const auto& [name, m] : models) ms.push_back({name, m.to_json()});
    j["models"] = ms;
    j["eps"] = eps;
    j["delta"] = delta;
    if (eta) j["eta"] = *eta;
    j["n_values"] = n_values;
    j["m_slices"] = m_slices;
    j["seed"] = seed;
    j["max_dim"] = max_dim;
    j["format"] = format;
    j["l_values"] = l_values;
    j["tolerance"] = tolerance;
    j["eps_schedule"] = eps_schedule;
    j["delta_schedule"] = delta_schedule;
    return j.dump();
}

std::uint64_t ExperimentConfig::hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char c : canonical_json()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<RunRecord> run_stein(const ExperimentConfig& cfg) {
    const SourceModel& p = cfg.model("null");
    const SourceModel& q = cfg.model("reference");
    ExtReal target = -relative_entropy_rate(p, q, kRateDepth).value;
    std::vector<RunRecord> out;
    for (size_t i = 0; i < cfg.n_values.size(); ++i) {
        RowTimer timer;
        int n = cfg.n_values[i];
        double eps_n = schedule_at(cfg.eps_schedule, i, cfg.eps);
        BetaPoint b = beta_point(p, q, n, eps_n, cfg.max_dim);
        RunRecord r = base_record(cfg, n);
        ExtReal rel_rate = (1.0 / n) * b.relaxed;
        r.quantities = {{"beta_relaxed_over_n", rel_rate},
                        {"beta_projection_over_n", (1.0 / n) * b.projection},
                        {"converse_over_n", b.converse_rate},
                        {"type1_error", b.type1},
                        {"eps", eps_n}};
        r.target = target;
        r.gap = gap_between(rel_rate, target);
        r.wall_time_ms = timer.ms();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RunRecord> run_sanov(const ExperimentConfig& cfg) {
    std::vector<SourceModel> omega = cfg.model_group("omega");
    if (omega.empty()) cfg_error("models.omega", "at least one member required");
    const SourceModel& ref = cfg.model("reference");
    std::vector<RunRecord> out;
    for (int n : cfg.n_values) {
        RowTimer timer;
        SeparatingProjection sp = slice_sanov_projector(omega, ref, n, cfg.m_slices, cfg.eta);
        double eta_used = sp.spec.eta;
        ExtReal target = sp.spec.s_ref.finite() ? ExtReal(-sp.spec.s_ref.raw() + eta_used)
                                                : ExtReal(-1.0 / eta_used);
        RunRecord r = base_record(cfg, n);
        double min_mass = 1.0;
        for (size_t i = 0; i < sp.member_masses.size(); ++i) {
            r.quantities.emplace_back("mass" + std::to_string(i), sp.member_masses[i]);
            min_mass = std::min(min_mass, sp.member_masses[i]);
        }
        bool mass_ok = min_mass >= 1.0 - eta_used - 1e-9;
        r.quantities.emplace_back("ref_log_mass", sp.ref_log_mass);
        r.quantities.emplace_back("log_rank_over_n", sp.set.log_rank() / n);
        r.quantities.emplace_back("eta", eta_used);
        r.quantities.emplace_back("mass_ok", mass_ok ? 1.0 : 0.0);
        r.target = target;
        // signed slack of the separation bound; <= 0 is the good direction
        r.gap = sp.ref_log_mass.is_neg_inf() ? -kInf : sp.ref_log_mass.raw() - target.raw();
        r.wall_time_ms = timer.ms();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RunRecord> run_aep(const ExperimentConfig& cfg) {
    const SourceModel& p = cfg.model("null");
    const SourceModel& q = cfg.model("reference");
    std::vector<RunRecord> out;
    double prev = -kInf;
    for (size_t i = 0; i < cfg.n_values.size(); ++i) {
        RowTimer timer;
        int n = cfg.n_values[i];
        double eps_n = schedule_at(cfg.eps_schedule, i, cfg.eps);
        RelativeAepResult res = relative_aep_mass(p, q, n, eps_n);
        RunRecord r = base_record(cfg, n);
        r.quantities = {{"mass", res.mass},
                        {"center", res.center},
                        {"trend_nondecreasing", res.mass >= prev - 1e-12 ? 1.0 : 0.0},
                        {"eps", eps_n}};
        r.target = 1.0;
        r.gap = 1.0 - res.mass;
        r.wall_time_ms = timer.ms();
        prev = res.mass;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RunRecord> run_mixing_audit(const ExperimentConfig& cfg) {
    const SourceModel& ref = cfg.model("reference");
    std::vector<int> ls = cfg.l_values;
    if (ls.empty())
        for (int l = 1; l <= 10; ++l) ls.push_back(l);
    MixingReport mr = mixing_report(ref, ls);
    std::vector<RunRecord> out;
    for (size_t i = 0; i < mr.l_values.size(); ++i) {
        RunRecord r = base_record(cfg, mr.l_values[i]);
        r.quantities = {{"alpha_hat", mr.alpha[i]},
                        {"star_mixing", mr.star_mixing ? 1.0 : 0.0}};
        r.target = 1.0;
        r.gap = 1.0 - mr.alpha[i];
        out.push_back(std::move(r));
    }

    std::vector<std::pair<std::string, SourceModel>> nulls;
    for (const auto& [name, m] : cfg.models)
        if (name == "null" || name.rfind("null.", 0) == 0) nulls.emplace_back(name, m);
    std::vector<int> probe_n = cfg.n_values;
    if (probe_n.empty()) probe_n = {4, 8, 16};
    for (size_t k = 0; k < nulls.size(); ++k) {
        RowTimer timer;
        HpProbeReport rep = hp_probe(nulls[k].second, ref, cfg.eps, probe_n, cfg.tolerance);
        if (rep.verdict == "violated")
            throw AcceptanceFailure("hp probe verdict 'violated' for model " + nulls[k].first);
        double code = rep.verdict == "consistent" ? 1.0 : 0.0;
        for (size_t i = 0; i < rep.n_values.size(); ++i) {
            RunRecord r = base_record(cfg, rep.n_values[i]);
            r.quantities = {{"beta_over_n", rep.beta_over_n[i]},
                            {"null_index", static_cast<double>(k)},
                            {"verdict_consistent", code}};
            if (i + 1 == rep.n_values.size())
                r.quantities.emplace_back("final_gap", rep.final_gap);
            r.target = rep.target;
            r.gap = gap_between(rep.beta_over_n[i], rep.target);
            r.wall_time_ms = timer.ms();
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<RunRecord> run_stationary(const ExperimentConfig& cfg) {
    const SourceModel& p = cfg.model("null");
    const SourceModel& q = cfg.model("reference");
    ExtReal under = underline_s(p, q, 1, kRateDepth);
    ExtReal over = overline_s(p, 1);
    ErgodicComponentList comps = ergodic_components(p);
    ExtReal target = -under;
    std::vector<RunRecord> out;
    for (size_t i = 0; i < cfg.n_values.size(); ++i) {
        RowTimer timer;
        int n = cfg.n_values[i];
        double eps_n = schedule_at(cfg.eps_schedule, i, cfg.eps);
        double delta_n = schedule_at(cfg.delta_schedule, i, cfg.delta);
        BetaPoint b = beta_point(p, q, n, eps_n, cfg.max_dim);
        // the universal set must sit strictly above every component's entropy
        // rate; delta is the natural margin
        UniversalTypicalResult u =
            universal_typical_projector(comps.components, n, over.raw() + delta_n, delta_n);
        double min_mass = 1.0;
        for (double m : u.member_masses) min_mass = std::min(min_mass, m);
        RunRecord r = base_record(cfg, n);
        ExtReal rel_rate = (1.0 / n) * b.relaxed;
        double rank_rate = u.log_rank / n;
        r.quantities = {{"beta_relaxed_over_n", rel_rate},
                        {"converse_over_n", b.converse_rate},
                        {"underline_s", under},
                        {"overline_s", over},
                        {"log_rank_over_n", rank_rate},
                        {"rank_gap", over.finite() ? rank_rate - over.raw() : kInf},
                        {"min_member_mass", min_mass}};
        r.target = target;
        r.gap = gap_between(rel_rate, target);
        r.wall_time_ms = timer.ms();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case ExperimentKind::stein: return run_stein(cfg);
        case ExperimentKind::sanov: return run_sanov(cfg);
        case ExperimentKind::aep: return run_aep(cfg);
        case ExperimentKind::mixing_audit: return run_mixing_audit(cfg);
        case ExperimentKind::stationary: return run_stationary(cfg);
    }
    throw std::logic_error("unreachable experiment kind");
}

std::string to_csv(const std::vector<RunRecord>& records) {
    std::vector<std::string> cols;
    for (const RunRecord& r : records)
        for (const auto& [k, _] : r.quantities)
            if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);

    std::ostringstream os;
    os << "kind,n";
    for (const std::string& c : cols) os << ',' << c;
    os << ",target,gap,seed,config_hash\n";
    for (const RunRecord& r : records) {
        os << r.kind << ',' << r.n;
        for (const std::string& c : cols) {
            os << ',';
            for (const auto& [k, v] : r.quantities)
                if (k == c) {
                    os << fmt_cell(v);
                    break;
                }
        }
        os << ',' << fmt_cell(r.target) << ',' << fmt_cell(r.gap) << ',' << r.seed << ','
           << hash_hex(r.config_hash) << '\n';
    }
    return os.str();
}

std::string to_jsonl(const std::vector<RunRecord>& records) {
    std::ostringstream os;
    for (const RunRecord& r : records) {
        ordered_json j;
        j["kind"] = r.kind;
        j["n"] = r.n;
        for (const auto& [k, v] : r.quantities) j[k] = json_number_or_sentinel(v);
        j["target"] = json_number_or_sentinel(r.target);
        j["gap"] = json_number_or_sentinel(r.gap);
        j["seed"] = r.seed;
        j["config_hash"] = hash_hex(r.config_hash);
        os << j.dump() << '\n';
    }
    return os.str();
}

void emit(const std::vector<RunRecord>& records, const ExperimentConfig& cfg) {
    if (cfg.out_path.empty()) cfg_error("out", "no output path configured");
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw std::runtime_error("emit: cannot open '" + cfg.out_path + "' for writing");
    out << (cfg.format == "jsonl" ? to_jsonl(records) : to_csv(records));
    if (!out) throw std::runtime_error("emit: write failed for '" + cfg.out_path + "'");
}

}  // namespace qsanov

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qsanov/np_testing.hpp"
#include "qsanov/typicality.hpp"

namespace qsanov {

// A computed quantity contradicts a proved inequality (converse bound, probe
// violation trigger). Distinct from config/runtime errors so the CLI can map
// it to its own exit code.
struct AcceptanceFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { stein, sanov, aep, mixing_audit, stationary };
const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::stein;
    // named models, order as configured; Sanov member lists flatten to
    // "omega.0", "omega.1", ... and are recovered by prefix
    std::vector<std::pair<std::string, SourceModel>> models;
    double eps = 0.1;
    double delta = 0.1;
    std::optional<double> eta;  // slice width override; engages the spec default when absent
    std::vector<int> n_values;
    int m_slices = 4;
    std::uint64_t seed = 0;
    int max_dim = kDimGuardDefault;
    std::string out_path;  // empty: caller handles the bytes
    std::string format = "csv";
    std::vector<int> l_values;         // mixing audit gaps; default 1..10
    double tolerance = 0.05;           // hp_probe gap tolerance, nats
    std::vector<double> eps_schedule;  // per-n overrides aligned with n_values
    std::vector<double> delta_schedule;

    const SourceModel& model(const std::string& name) const;
    std::vector<SourceModel> model_group(const std::string& prefix) const;

    // field-path-tagged validation errors ("config.models.null: ...")
    static ExperimentConfig from_json_text(const std::string& text, const std::string& base_dir = "");
    static ExperimentConfig from_json_file(const std::string& path);
    std::string canonical_json() const;  // reparse-stable; input to hash()
    std::uint64_t hash() const;          // FNV-1a over canonical_json
};

struct RunRecord {
    std::string kind;
    int n = 0;
    std::vector<std::pair<std::string, ExtReal>> quantities;
    ExtReal target = 0.0;
    double gap = 0.0;
    double wall_time_ms = 0.0;  // not emitted
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

std::vector<RunRecord> run_stein(const ExperimentConfig& cfg);
std::vector<RunRecord> run_sanov(const ExperimentConfig& cfg);
std::vector<RunRecord> run_aep(const ExperimentConfig& cfg);
std::vector<RunRecord> run_mixing_audit(const ExperimentConfig& cfg);
std::vector<RunRecord> run_stationary(const ExperimentConfig& cfg);
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

// csv: kind,n,<quantity columns in first-appearance order>,target,gap,seed,
// config_hash; missing quantities are empty cells; infinities are the
// "+inf"/"-inf" literals. jsonl: one flat object per line, infinities as
// string sentinels.
std::string to_csv(const std::vector<RunRecord>& records);
std::string to_jsonl(const std::vector<RunRecord>& records);
// writes cfg.out_path in cfg.format; byte-identical for identical config+seed
void emit(const std::vector<RunRecord>& records, const ExperimentConfig& cfg);

}  // namespace qsanov

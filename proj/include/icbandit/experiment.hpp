#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "icbandit/bounds.hpp"
#include "icbandit/game.hpp"
#include "icbandit/learners.hpp"
#include "icbandit/rewards.hpp"
#include "icbandit/temporal.hpp"

namespace icbandit {

/// Schema violation in an experiment config. `keys` lists the offending
/// dotted key paths.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, std::vector<std::string> keys = {});
    const std::vector<std::string>& keys() const noexcept { return keys_; }

private:
    std::vector<std::string> keys_;
};

struct EnsembleSpec {
    // leaders: K stationary instances, instance k has arm k at `high` and the
    //   rest at `low`, equally likely; rho > 0 turns each into a reflected walk.
    // finite: explicit stationary mean vectors with weights.
    // drifting: generator of random walks with drift rho.
    // piecewise: one instance with equal-length stationary segments.
    // manifest: an ensemble manifest on disk.
    std::string kind = "leaders";
    double high = 0.8;
    double low = 0.4;
    double rho = 0.0;
    std::vector<std::vector<double>> means;
    std::vector<double> weights;
    std::vector<std::vector<double>> segments;
    std::filesystem::path path;
    NoiseFamily noise = NoiseFamily::bernoulli();
};

struct BeliefSpec {
    std::string kind = "uniform";  // uniform | point | pmf
    std::size_t start = 1;
    std::optional<std::size_t> length;  // uniform; absent = through round T
    std::size_t round = 1;              // point
    std::vector<double> pmf;
    std::optional<std::size_t> components;  // check a full-horizon window through decompose_uniform blocks too
};

struct AssumptionSpec {
    double Delta = 0.0;
    std::optional<double> alpha;  // absent = verify on the ensemble
    std::optional<double> rho;    // absent = verify on the ensemble
};

struct ReplicationSpec {
    std::size_t runs = 100;   // regret
    std::size_t outer = 200;  // ic-check
    std::size_t inner = 5;
    std::size_t min_count = 100;
};

struct BoundsSpec {
    std::vector<std::size_t> horizons;
    std::vector<std::size_t> windows;
    std::vector<double> rho;             // absolute drift values
    std::vector<double> rho_per_window;  // drift c / L for each entry c
    double alpha = 1.0;
    double Delta = 1.0;
    std::optional<std::size_t> arms;
    double regret_constant = 1.0;
    WindowRegretRate rate = WindowRegretRate::horizon_tuned;
    std::optional<BoundInputs> point;
    bool chart = true;
};

struct AdaptiveSpec {
    std::vector<std::size_t> lengths;  // explicit grid, or generated from min/max/count
    std::size_t min_length = 0;
    std::size_t max_length = 0;
    std::size_t count = 12;
    std::size_t seeds = 50;
    IntervalRegretBasis basis = IntervalRegretBasis::pseudo;
    std::string baseline = "exp3";
    bool chart = true;
};

struct OracleSpec {
    std::size_t transcripts = 1000;
    std::size_t max_horizon = 50;
    std::size_t max_arms = 4;
};

struct ExperimentConfig {
    std::string scenario = "unnamed";
    std::size_t horizon = 0;
    std::size_t arms = 0;
    std::optional<EnsembleSpec> ensemble;
    std::vector<BeliefSpec> beliefs;
    std::optional<PolicyConfig> policy;
    std::optional<AssumptionSpec> assumptions;
    std::optional<double> regret;  // fed to the bounds; absent = measured
    std::optional<double> delta;   // confidence level of the concentration term
    GainMethod method = GainMethod::rao_blackwell;
    ReplicationSpec replications;
    std::optional<BoundsSpec> bounds;
    std::optional<AdaptiveSpec> adaptive;
    OracleSpec oracle;
    std::uint64_t seed = 0;
    std::filesystem::path out = "results";
};

/// Parses and validates a config. Every unknown key anywhere in the document
/// is collected before throwing.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

RewardEnsemble build_ensemble(const ExperimentConfig& config);
TemporalBelief build_belief(const BeliefSpec& spec, std::size_t horizon);

struct CommandResult {
    int exit_code = 0;             // 0 success, 1 a check failed
    std::string summary;           // human-readable digest
    std::vector<std::filesystem::path> files;  // outputs written
};

// Each command writes into config.out (created if missing). Outputs depend
// only on the config and its seed, never on `jobs`.
CommandResult cmd_regret(const ExperimentConfig& config, std::size_t jobs);
CommandResult cmd_ic_check(const ExperimentConfig& config, std::size_t jobs);
CommandResult cmd_bounds(const ExperimentConfig& config);
CommandResult cmd_adaptive(const ExperimentConfig& config, std::size_t jobs);
CommandResult cmd_oracle_check(const ExperimentConfig& config, std::size_t jobs);

/// Fixed 17-significant-digit rendering used in every CSV.
std::string format_real(double x);

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Static SVG line chart; log axes skip non-positive points.
void write_svg_chart(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<ChartSeries>& series, bool log_x, bool log_y);

}  // namespace icbandit

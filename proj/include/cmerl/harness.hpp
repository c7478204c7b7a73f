#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cmerl/agent.hpp"
#include "cmerl/cme_model.hpp"
#include "cmerl/env.hpp"
#include "cmerl/sketch.hpp"

namespace cmerl {

/// Invalid configuration; the CLI maps it to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct ApproximationSpec {
    SketchKind kind = SketchKind::RandomFourier;
    std::size_t features = 256;
    std::uint64_t seed = 0;
};

struct CheckSet {
    bool optimism = false;
    bool variance_sum = true;
    bool concentration = false;
    bool closed_form = false;
};

/// Everything one `run` needs.  Confidence constants left unset are
/// filled per environment by resolve_confidence.
struct ExperimentConfig {
    std::string env = "chain2";
    std::optional<KernelSpec> kernel;
    double lambda = 1.0;
    double delta = 0.1;
    std::optional<double> b_p;
    std::optional<double> b_v;
    std::optional<double> b_phi;
    std::optional<double> zeta;
    std::optional<double> one_norm;
    std::size_t episodes = 50;
    std::vector<std::uint64_t> seeds{0};
    std::uint64_t master_seed = 0;
    BonusMode mode = BonusMode::WellSpecified;
    bool include_lambda_root = true;
    double beta_scale = 1.0;
    std::optional<ApproximationSpec> approximation;
    /// Magnitude of the fixed +-zeta offsets injected into value targets (0 = none).
    double perturbation = 0.0;
    std::uint64_t perturbation_seed = 0;
    std::string out;
    std::size_t parallel = 1;
    CheckSet checks;
    bool strict = false;
    std::size_t mc_rollouts = 1000;
    bool record_wall_time = false;

    /// Throws ConfigError on the first invalid field.
    void validate() const;
};

ExperimentConfig parse_config_toml(const std::string& text);
ExperimentConfig parse_config_json(const std::string& text);
/// Reads a TOML file, or JSON when the path ends in ".json".  Applies the
/// CMERL_SEED environment override to the master seed.
ExperimentConfig load_config(const std::string& path);

/// Parses "a,b,c" into seeds; throws ConfigError on junk.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Default kernel for an environment: Delta on finite ones, squared
/// exponential (lengthscale 1) otherwise.
KernelSpec resolve_kernel(const ExperimentConfig& cfg, const Environment& env);

/// Fills unset constants: exact ||Theta_P||_HS and H sqrt(S) on finite MDPs,
/// sqrt(sup k(x, x)) for B_phi, sqrt(S) for ||1||.
ConfidenceConfig resolve_confidence(const ExperimentConfig& cfg, const Environment& env,
                                    const KernelSpec& kernel);

/// Value of the Theorem-style regret ceiling after `episodes` episodes.
double theoretical_bound(const ConfidenceConfig& cfg, bool misspecified, std::size_t horizon,
                         const EmbeddingModel& model, std::size_t episodes);

enum class CheckStatus { Pass, Fail, Skip };
const char* to_string(CheckStatus status);

struct EpisodeRecord {
    std::uint64_t seed = 0;
    std::size_t episode = 0;
    std::size_t step_count = 0;
    double inst_regret = 0.0;
    double regret_stderr = 0.0;  // Monte-Carlo estimates only
    double cum_regret = 0.0;
    double beta = 0.0;
    double info_gain = 0.0;
    double var_sum = 0.0;
    double bound = 0.0;
    CheckStatus optimism = CheckStatus::Skip;
    CheckStatus varsum = CheckStatus::Skip;
    CheckStatus concentration = CheckStatus::Skip;
    double wall_ms = 0.0;
    // Diagnostics kept out of the CSV.
    double conc_lhs = 0.0;
    double conc_beta = 0.0;
    double optimism_gap = 0.0;  // min over (h, s, a) of Q^t + slack - Q*
    double episode_return = 0.0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::string env;
    std::vector<EpisodeRecord> episodes;
    /// Regret per episode of the uniformly random policy (finite envs).
    std::optional<double> uniform_regret;
    bool bound_ok = true;
    std::size_t failures = 0;  // failed checks, bound ceiling included

    [[nodiscard]] double cumulative_regret() const {
        return episodes.empty() ? 0.0 : episodes.back().cum_regret;
    }
};

/// One seeded run of T episodes (single-threaded).
RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed);

/// All seeds, dispatched to `cfg.parallel` workers; results in seed order.
/// Writes per-seed CSVs, the merged results.csv and summary.json when
/// `cfg.out` is set.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg);

void write_csv_header(std::ostream& out);
void write_csv_rows(std::ostream& out, const RunRecord& run);
std::string summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& runs);

struct VerifyReport {
    std::size_t passed = 0;
    std::size_t total = 0;
    double worst = 0.0;
    std::string message;
    [[nodiscard]] bool ok() const { return passed == total; }
};

struct ClosedFormOptions {
    std::size_t instances = 100;
    std::uint64_t seed = 7;
    double tolerance = 1e-6;
};

/// Random small tabular instances: the KKT closed form, projected gradient
/// ascent and the kernel agent's mean-plus-bonus must coincide.
VerifyReport verify_closed_form(const ClosedFormOptions& options = {});

struct ConcentrationOptions {
    std::size_t runs = 200;
    std::size_t episodes = 50;
    std::string env = "chain2";
    double lambda = 1.0;
    double delta = 0.1;
    std::uint64_t master_seed = 0;
    std::size_t parallel = 1;
};

struct ConcentrationReport {
    std::size_t runs = 0;
    std::size_t covered_runs = 0;      // concentration held at every episode
    std::size_t checked_episodes = 0;  // episodes where optimism was tested
    std::size_t optimism_violations = 0;
    std::size_t varsum_failures = 0;
    std::size_t bound_failures = 0;
    double coverage() const { return runs ? static_cast<double>(covered_runs) / static_cast<double>(runs) : 0.0; }
};

ConcentrationReport verify_concentration(const ConcentrationOptions& options);

struct InvariantReport {
    std::vector<std::string> lines;
    std::size_t failures = 0;
};

/// Optimism, approximate optimism and variance-sum suites on the finite catalog.
InvariantReport verify_invariants(std::size_t episodes = 30, std::size_t seeds = 5,
                                  std::uint64_t master_seed = 0);

/// Entry point of the command-line tool.
int cli_main(int argc, char** argv);

}  // namespace cmerl

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cmerl/harness.hpp"

using namespace cmerl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cmerl_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CMERL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("TOML configuration parsing") {
    const ExperimentConfig cfg = parse_config_toml(R"(
env = "riverswim6"
episodes = 12
seeds = [3, 4]
master_seed = 9
mode = "misspecified"
beta_scale = 0.5
checks = ["optimism", "concentration"]

[kernel]
family = "matern"
nu = 2.5
lengthscale = 0.7

[confidence]
lambda = 0.5
delta = 0.05
zeta = 0.1

[approximation]
kind = "nystrom"
features = 64

[perturbation]
zeta = 0.05
seed = 11
)");
    CHECK(cfg.env == "riverswim6");
    CHECK(cfg.episodes == 12);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(cfg.master_seed == 9);
    CHECK(cfg.mode == BonusMode::Misspecified);
    CHECK(cfg.beta_scale == 0.5);
    CHECK(cfg.checks.optimism);
    CHECK(cfg.checks.concentration);
    CHECK(!cfg.checks.variance_sum);
    REQUIRE(cfg.kernel.has_value());
    CHECK(cfg.kernel->family == KernelFamily::Matern);
    CHECK(cfg.kernel->nu == MaternNu::FiveHalves);
    CHECK(cfg.kernel->lengthscale == 0.7);
    CHECK(cfg.lambda == 0.5);
    CHECK(cfg.delta == 0.05);
    CHECK(cfg.zeta == 0.1);
    CHECK(!cfg.b_p.has_value());
    REQUIRE(cfg.approximation.has_value());
    CHECK(cfg.approximation->kind == SketchKind::Nystrom);
    CHECK(cfg.approximation->features == 64);
    CHECK(cfg.perturbation == 0.05);
    CHECK(cfg.perturbation_seed == 11);

    const ExperimentConfig json = parse_config_json(R"({"env": "chain2", "episodes": 3, "kernel": {"family": "delta"}})");
    CHECK(json.episodes == 3);
    CHECK(json.kernel->family == KernelFamily::Delta);
}

TEST_CASE("configuration errors") {
    CHECK_THROWS_AS((void)parse_config_toml("envv = \"chain2\""), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("episodes = 0"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("episodes = \"ten\""), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("mode = \"robust\""), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("checks = [\"everything\"]"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("seeds = [-1]"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("[confidence]\nlambda = -1.0"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("[confidence]\ndelta = 1.5"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("[kernel]\nfamily = \"cosine\""), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("[approximation]\nkind = \"sparse\""), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("env = \"chain2\"\nenv_file = \"x.json\""), ConfigError);
    CHECK_THROWS_AS((void)parse_config_toml("this is = not toml ["), ConfigError);
    CHECK_THROWS_AS((void)parse_config_json("{"), ConfigError);
    CHECK_THROWS_AS((void)load_config("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("seed lists") {
    CHECK(parse_seed_list("0,1,2") == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(parse_seed_list("42") == std::vector<std::uint64_t>{42});
    CHECK_THROWS_AS((void)parse_seed_list(""), ConfigError);
    CHECK_THROWS_AS((void)parse_seed_list("1,x"), ConfigError);
    CHECK_THROWS_AS((void)parse_seed_list("1,,2"), ConfigError);
}

TEST_CASE("default confidence constants") {
    ExperimentConfig cfg;
    const auto chain = make_standard_env("chain2");
    const KernelSpec k = resolve_kernel(cfg, *chain);
    CHECK(k.family == KernelFamily::Delta);
    const ConfidenceConfig c = resolve_confidence(cfg, *chain, k);
    CHECK(c.b_p == doctest::Approx(2.0));
    CHECK(c.b_v == doctest::Approx(2.0 * std::sqrt(2.0)));
    CHECK(c.one_norm == doctest::Approx(std::sqrt(2.0)));
    CHECK(c.b_phi == doctest::Approx(1.0));
    CHECK(c.zeta == 0.0);

    cfg.env = "nlds2d";
    const auto nl = make_standard_env("nlds2d");
    const KernelSpec se = resolve_kernel(cfg, *nl);
    CHECK(se.family == KernelFamily::SquaredExponential);
    CHECK(se.lengthscale == 1.0);
    const ConfidenceConfig cn = resolve_confidence(cfg, *nl, se);
    CHECK(cn.b_p == 1.0);
    CHECK(cn.b_v == 4.0);

    cfg.b_v = 7.0;
    cfg.perturbation = 0.05;
    const ConfidenceConfig over = resolve_confidence(cfg, *nl, se);
    CHECK(over.b_v == 7.0);
    CHECK(over.zeta == 0.05);
}

TEST_CASE("single episode on chain2") {
    ExperimentConfig cfg;
    cfg.episodes = 1;
    cfg.checks.optimism = true;
    cfg.checks.concentration = true;
    const RunRecord run = run_single(cfg, 0);
    REQUIRE(run.episodes.size() == 1);
    const EpisodeRecord& e = run.episodes[0];
    CHECK(e.inst_regret >= 0.0);
    CHECK(e.inst_regret <= 1.0);
    CHECK(e.step_count == 2);
    // Recorded after the episode is absorbed: two distinct pairs, each seen once.
    CHECK(e.info_gain == doctest::Approx(std::log(2.0)));
    CHECK(e.var_sum == doctest::Approx(2.0));
    CHECK(e.cum_regret == e.inst_regret);
    CHECK(e.optimism == CheckStatus::Pass);
    CHECK(e.concentration == CheckStatus::Pass);
    CHECK(run.uniform_regret.has_value());
    CHECK(*run.uniform_regret == doctest::Approx(0.5));
}

TEST_CASE("runs are reproducible byte for byte") {
    const fs::path a = scratch_dir("repro_a");
    const fs::path b = scratch_dir("repro_b");
    ExperimentConfig cfg;
    cfg.env = "riverswim6";
    cfg.episodes = 6;
    cfg.seeds = {0, 1, 2};
    cfg.master_seed = 5;
    cfg.out = a.string();
    (void)run_experiment(cfg);
    cfg.out = b.string();
    cfg.parallel = 3;
    (void)run_experiment(cfg);
    CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
    CHECK(slurp(a / "seed_1.csv") == slurp(b / "seed_1.csv"));
    CHECK(slurp(a / "results.csv").rfind("seed,episode,step_count,inst_regret,cum_regret,beta,", 0) == 0);
    CHECK(fs::exists(a / "summary.json"));

    // A different master seed changes the trajectory.
    cfg.master_seed = 6;
    const fs::path c = scratch_dir("repro_c");
    cfg.out = c.string();
    (void)run_experiment(cfg);
    CHECK(slurp(a / "results.csv") != slurp(c / "results.csv"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("sketch kinds that do not fit the kernel are rejected up front") {
    ExperimentConfig cfg;
    cfg.approximation = ApproximationSpec{};
    CHECK_THROWS_AS((void)run_experiment(cfg), ConfigError);
}

TEST_CASE("command line exit codes") {
    const fs::path dir = scratch_dir("cli");
    CHECK(run_cli("list-envs") == 0);
    CHECK(run_cli("run /nonexistent/missing.toml") == 2);
    CHECK(run_cli("frobnicate") == 2);
    {
        std::ofstream f(dir / "bad.toml");
        f << "episodes = -3\n";
    }
    CHECK(run_cli("run " + (dir / "bad.toml").string()) == 2);
    {
        std::ofstream f(dir / "ok.toml");
        f << "env = \"chain2\"\nepisodes = 3\nseeds = [0]\n";
    }
    CHECK(run_cli("run " + (dir / "ok.toml").string() + " --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "seed_0.csv"));
    CHECK(run_cli("info-gain " + (dir / "ok.toml").string()) == 0);
    fs::remove_all(dir);
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kCli = DATAPRICER_CLI_PATH;
const fs::path kConfigDir = DATAPRICER_CONFIG_DIR;

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path temp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "datapricer_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CommandResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = temp_dir() / ("out" + std::to_string(counter) + ".txt");
  const fs::path err = temp_dir() / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string command =
      kCli + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out);
  result.err = slurp(err);
  return result;
}

fs::path write_worked_dataset() {
  const fs::path path = temp_dir() / "worked.csv";
  std::ofstream out(path);
  out << "x_1,x_2,y,sigma\n1,3,-1,1\n3,1,1,1\n";
  return path;
}

fs::path write_anisotropic_dataset() {
  const fs::path path = temp_dir() / "aniso.csv";
  std::ofstream out(path);
  out << "x_1,x_2,y,sigma\n1,0,0.9,1\n1,0,1.1,1\n1,0,1.0,1\n0,1,-0.5,1\n";
  return path;
}

}  // namespace

TEST(Cli, ValueMatchesWorkedExample) {
  const auto result = run_cli("value --data " + write_worked_dataset().string() + " --x 1,1");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  const json payload = json::parse(result.out);
  EXPECT_NEAR(payload["value_nats"].get<double>(), 0.5 * std::log(17.0), 1e-12);
  EXPECT_NEAR(payload["prior_predictive_variance"].get<double>(), 2.0, 1e-12);
  EXPECT_NEAR(payload["posterior_predictive_variance"].get<double>(), 2.0 / 17.0, 1e-12);
}

TEST(Cli, ShapleyAndFirstBestAndKappa) {
  const fs::path data = write_anisotropic_dataset();
  const auto shapley = run_cli("shapley --data " + data.string() + " --x 1,0");
  ASSERT_EQ(shapley.exit_code, 0) << shapley.err;
  EXPECT_EQ(json::parse(shapley.out)["coalition_value_fn_evals"].get<int>(), 16);

  const auto fb = run_cli("first-best --data " + data.string() + " --x 1,1");
  ASSERT_EQ(fb.exit_code, 0);
  EXPECT_NEAR(json::parse(fb.out)["value_nats"].get<double>(), 0.5 * std::log(8.0 / 3.0),
              1e-12);

  const auto kappa = run_cli("kappa --data " + data.string());
  ASSERT_EQ(kappa.exit_code, 0);
  EXPECT_NEAR(json::parse(kappa.out)["kappa"].get<double>(), std::sqrt(3.0), 1e-12);
}

TEST(Cli, PricingVerbs) {
  const fs::path data = write_anisotropic_dataset();
  const auto perfect = run_cli("price-perfect --report 0,1 --n 3 --sigma 1.0");
  ASSERT_EQ(perfect.exit_code, 0) << perfect.err;
  EXPECT_NEAR(json::parse(perfect.out)["payment_nats"].get<double>(), std::log(2.0), 1e-12);

  const auto svd = run_cli("price-svd --data " + data.string() + " --report 1,1");
  ASSERT_EQ(svd.exit_code, 0);
  EXPECT_NEAR(json::parse(svd.out)["payment_nats"].get<double>(), 0.5 * std::log(2.5), 1e-12);

  const auto mab = run_cli("price-mab --data " + data.string() + " --report 0,1");
  ASSERT_EQ(mab.exit_code, 0);
  EXPECT_NEAR(json::parse(mab.out)["payment_nats"].get<double>(), 0.5 * std::log(2.0), 1e-12);
}

TEST(Cli, VerificationVerbs) {
  const fs::path data = write_anisotropic_dataset();
  EXPECT_EQ(run_cli("verify-ic --mechanism svd --data " + data.string() +
                    " --grid mesh --grid-count 180")
                .exit_code,
            0);
  EXPECT_EQ(run_cli("verify-ir --mechanism perfect --n 5 --grid mesh --grid-count 90")
                .exit_code,
            0);
  EXPECT_EQ(run_cli("audit-regret --data " + data.string() + " --grid mesh --grid-count 360")
                .exit_code,
            0);
  const auto imposs =
      run_cli("demo-impossibility --data " + data.string() + " --grid mesh --grid-count 720");
  EXPECT_EQ(imposs.exit_code, 0);
  EXPECT_NEAR(json::parse(imposs.out)["deviation_gain"].get<double>(), 0.5 * std::log(2.0),
              1e-9);
  EXPECT_EQ(run_cli("check-envelope --n 5 --dim 2 --sigma-affine 1.0,0.5,0.0 "
                    "--grid mesh --grid-count 100")
                .exit_code,
            0);
  EXPECT_EQ(run_cli("coupling-check --data " + write_worked_dataset().string() +
                    " --x 1,1 --samples 20000 --seed 5")
                .exit_code,
            0);
}

TEST(Cli, ExitCodesByFailureClass) {
  // Input error: missing file.
  const auto missing = run_cli("value --data /nonexistent.csv --x 1,1");
  EXPECT_EQ(missing.exit_code, 2);
  const json err = json::parse(missing.err);
  EXPECT_EQ(err["error"]["code"].get<int>(), 2);

  // Flag-level parse errors are input errors too, with JSON on stderr.
  const auto bad_flag = run_cli("value --no-such-flag");
  EXPECT_EQ(bad_flag.exit_code, 2);
  EXPECT_EQ(json::parse(bad_flag.err)["error"]["code"].get<int>(), 2);
  EXPECT_EQ(run_cli("--help").exit_code, 0);

  // csv format only applies to tabular outputs.
  EXPECT_EQ(run_cli("kappa --data " + write_anisotropic_dataset().string() + " --format csv")
                .exit_code,
            2);

  // Numeric error: rank-deficient design.
  const fs::path deficient = temp_dir() / "deficient.csv";
  {
    std::ofstream out(deficient);
    out << "x_1,x_2,y,sigma\n1,0,0.1,1\n2,0,0.2,1\n";
  }
  EXPECT_EQ(run_cli("audit-regret --data " + deficient.string()).exit_code, 3);

  // Verification failure: anisotropy too small to exhibit a witness.
  const fs::path faint = temp_dir() / "faint.csv";
  {
    std::ofstream out(faint);
    out << "x_1,x_2,y,sigma\n" << std::setprecision(17) << std::sqrt(1.0 + 1e-7)
        << ",0,0.1,1\n0,1,0.2,1\n";
  }
  EXPECT_EQ(run_cli("demo-impossibility --data " + faint.string() + " --grid mesh")
                .exit_code,
            1);

  // Config error from the run pipeline.
  const fs::path bad_config = temp_dir() / "bad.json";
  {
    std::ofstream out(bad_config);
    out << "{\"dimension\": 0}";
  }
  EXPECT_EQ(run_cli("run --config " + bad_config.string()).exit_code, 2);
}

TEST(Cli, GenerateIsByteDeterministic) {
  const fs::path config = temp_dir() / "gen.json";
  {
    std::ofstream out(config);
    out << R"({
      "dimension": 2,
      "seed": 42,
      "noise": {"kind": "constant", "stddev": 1.0},
      "generate": {"random_rows": 6}
    })";
  }
  const fs::path a = temp_dir() / "gen_a.csv";
  const fs::path b = temp_dir() / "gen_b.csv";
  ASSERT_EQ(run_cli("generate --config " + config.string() + " --out " + a.string()).exit_code,
            0);
  ASSERT_EQ(run_cli("generate --config " + config.string() + " --out " + b.string()).exit_code,
            0);
  const std::string bytes_a = slurp(a);
  EXPECT_EQ(bytes_a, slurp(b));
  EXPECT_FALSE(bytes_a.empty());

  // A different seed produces a different dataset.
  const fs::path c = temp_dir() / "gen_c.csv";
  ASSERT_EQ(run_cli("generate --config " + config.string() + " --seed 43 --out " + c.string())
                .exit_code,
            0);
  EXPECT_NE(slurp(c), bytes_a);
}

TEST(Cli, RunEmitsRecordAndPlot) {
  const fs::path record_path = temp_dir() / "record.json";
  const fs::path plot_path = temp_dir() / "plot.csv";
  const auto result = run_cli("run --config " + (kConfigDir / "anisotropic_regret.json").string() +
                              " --out " + record_path.string() + " --plot-out " +
                              plot_path.string());
  ASSERT_EQ(result.exit_code, 0) << result.err;
  const json record = json::parse(slurp(record_path));
  EXPECT_TRUE(record["all_passed"].get<bool>());
  EXPECT_EQ(record["rng"].get<std::string>(), "mt19937_64/box-muller");
  const std::string plot = slurp(plot_path);
  EXPECT_EQ(plot.substr(0, 26), "angle_or_index,value_nats\n");

  // Byte-identical rerun of the numeric payload.
  const fs::path record2 = temp_dir() / "record2.json";
  ASSERT_EQ(run_cli("run --config " + (kConfigDir / "anisotropic_regret.json").string() +
                    " --out " + record2.string())
                .exit_code,
            0);
  EXPECT_EQ(json::parse(slurp(record_path))["results"].dump(),
            json::parse(slurp(record2))["results"].dump());
}

TEST(Cli, TableFormat) {
  const auto result = run_cli("kappa --data " + write_anisotropic_dataset().string() +
                              " --format table");
  ASSERT_EQ(result.exit_code, 0);
  EXPECT_NE(result.out.find("kappa:"), std::string::npos);
}

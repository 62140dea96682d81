#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kipm/cli.hpp"

namespace fs = std::filesystem;
using namespace kipm;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "kipm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string sample(const char* name) { return std::string(KIPM_SAMPLES_DIR) + "/" + name; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kipm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  io::Json read_json(const std::string& name) const {
    std::ifstream in(path(name));
    return io::Json::parse(in);
  }

 private:
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpShowsDefaultSolverSettings) {
  const auto r = run({"solve-qp", "--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--gamma", "--mu-tol", "--cg-tol", "--cg-maxit", "--mu-init",
                           "--max-iter", "--trace", "--solution", "--verbose"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_NE(r.out.find("[0.99]"), std::string::npos);
  EXPECT_NE(r.out.find("[1e-06]"), std::string::npos);
  EXPECT_NE(r.out.find("[1e-07]"), std::string::npos);
  EXPECT_NE(r.out.find("[5000]"), std::string::npos);

  const auto s = run({"solve-svm", "--help"});
  EXPECT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("[0.99]"), std::string::npos);
  EXPECT_NE(s.out.find("--sigma"), std::string::npos);
}

TEST_F(CliTest, SolvesBoxQp) {
  const auto r = run({"solve-qp", sample("box_qp.json"), "--solution", path("sol.json"),
                      "--trace", path("trace.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json("sol.json");
  EXPECT_EQ(doc["status"], "converged");
  EXPECT_NEAR(doc["x"][0].get<double>(), 2.0, 1e-5);
  EXPECT_TRUE(doc.contains("primal_inf") && doc.contains("dual_inf") &&
              doc.contains("compl_inf") && doc.contains("objective"));

  std::ifstream tf(path("trace.csv"));
  const auto trace = io::read_trace(tf);
  EXPECT_EQ(trace.size(), doc["iterations"].get<std::size_t>());
  EXPECT_LT(trace.back().mu, 1e-6);
}

TEST_F(CliTest, VerbosePrintsOneLinePerIteration) {
  const auto r = run({"solve-qp", sample("equality_qp.json"), "--verbose", "--solution",
                      path("sol.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto iters = read_json("sol.json")["iterations"].get<std::size_t>();
  std::size_t lines = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) lines += line.find(" mu ") != std::string::npos;
  EXPECT_EQ(lines, iters);
}

TEST_F(CliTest, SolvesQuasiNewtonSample) {
  const auto r = run({"solve-qp", sample("bfgs_qp.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("status converged"), std::string::npos);
}

TEST_F(CliTest, IterationLimitExitCode) {
  EXPECT_EQ(run({"solve-qp", sample("box_qp.json"), "--max-iter", "1"}).code, 2);
}

TEST_F(CliTest, MalformedDocumentNamesTheMember) {
  const auto f = write("bad.json", R"({"n": 1, "hessian": {"kind": "diagonal", "d": [1]},
                                       "p": [0], "lx": ["zero"]})");
  const auto r = run({"solve-qp", f});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("lx[0]"), std::string::npos) << r.err;
}

TEST_F(CliTest, InvertedBoundsAreReported) {
  const auto f = write("inv.json", R"({"n": 1, "hessian": {"kind": "diagonal", "d": [1]},
                                       "p": [0], "lx": [1], "ux": [0]})");
  const auto r = run({"solve-qp", f});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("inverted bound"), std::string::npos) << r.err;
}

TEST_F(CliTest, CheckValidFile) {
  const auto r = run({"check", sample("bfgs_qp.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "OK n=3 m_A=2 m_E=0\n");
}

TEST_F(CliTest, CheckDimensionMismatch) {
  const auto f = write("dim.json", R"({"n": 2, "hessian": {"kind": "diagonal", "d": [1, 1]},
                                       "p": [0, 0, 0], "lx": [0, 0]})");
  const auto r = run({"check", f});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("1 violation(s)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("dimension mismatch"), std::string::npos);
}

TEST_F(CliTest, CheckUnreadablePath) {
  const auto r = run({"check", path("missing.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);
}

TEST_F(CliTest, TrainsTwoPointSvm) {
  const auto r = run({"solve-svm", sample("two_point.svm"), "--sigma", "1", "--c", "1",
                      "--solution", path("model.json"), "--trace", path("trace.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json("model.json");
  EXPECT_LE(std::abs(doc["alpha_dot_y"].get<double>()), 1e-8);
  EXPECT_EQ(doc["alpha"].size(), 2u);
  EXPECT_NEAR(doc["bias"].get<double>(), 0.0, 1e-6);
  EXPECT_EQ(doc["support_indices"].size(), 2u);
  EXPECT_EQ(doc["training_accuracy"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(path("trace.csv")));
}

TEST_F(CliTest, SvmRequiresSigma) {
  const auto r = run({"solve-svm", sample("two_point.svm"), "--c", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--sigma"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, SvmParseErrorsAreInputErrors) {
  const auto f = write("bad.svm", "+1 1:1\n5 1:2\n");
  const auto r = run({"solve-svm", f, "--sigma", "1", "--c", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingSubcommandIsAnInputError) {
  EXPECT_EQ(run({}).code, 1);
}

TEST(ExitCodes, FollowSolveStatus) {
  EXPECT_EQ(cli::exit_code(SolveStatus::Converged), 0);
  EXPECT_EQ(cli::exit_code(SolveStatus::IterationLimit), 2);
  EXPECT_EQ(cli::exit_code(SolveStatus::LinearSolverFailure), 3);
}

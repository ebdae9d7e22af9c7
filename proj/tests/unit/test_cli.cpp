#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mreal_unit_cli";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + MREAL_CLI_PATH + "\" " + args + " > \"" + (kWork / "stdout.txt").string() +
                          "\" 2> \"" + (kWork / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string at(const std::string& name) { return "\"" + (kWork / name).string() + "\""; }

}  // namespace

TEST_CASE("cli: synth, prepare, train, generate, evaluate") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  std::ofstream(kWork / "train.conf") << "channels = 8\nlatent_dim = 16\nminibatch = 4\nn_dstep = 1\n"
                                          "checkpoint_interval = 2\n";

  REQUIRE(run("synth --out " + at("real.csv") + " --n 12 --seed 3") == 0);
  REQUIRE(run("prepare --data " + at("real.csv") + " --out " + at("prep")) == 0);
  CHECK(fs::exists(kWork / "prep" / "stats.txt"));
  CHECK(slurp(kWork / "prep" / "data.csv") == slurp(kWork / "real.csv"));

  REQUIRE(run("train --config " + at("train.conf") + " --data " + at("real.csv") + " --stats " +
              at("prep/stats.txt") + " --out " + at("run") + " --steps 3 --seed 1") == 0);
  CHECK(fs::exists(kWork / "run" / "final" / "manifest.txt"));
  CHECK(fs::exists(kWork / "run" / "ckpt_00000002"));

  // Untrained generator: shapes line up with the real file.
  REQUIRE(run("train --config " + at("train.conf") + " --data " + at("real.csv") + " --out " + at("run0") +
              " --steps 0") == 0);
  REQUIRE(run("generate --checkpoint " + at("run0/final") + " --n 12 --out " + at("gen0.csv")) == 0);
  REQUIRE(run("evaluate --real " + at("real.csv") + " --generated " + at("gen0.csv")) == 0);

  REQUIRE(run("generate --checkpoint " + at("run/final") + " --n 12 --seed 5 --out " + at("gen1.csv")) == 0);
  REQUIRE(run("generate --checkpoint " + at("run/final") + " --n 12 --seed 5 --out " + at("gen2.csv")) == 0);
  CHECK(slurp(kWork / "gen1.csv") == slurp(kWork / "gen2.csv"));

  REQUIRE(run("evaluate --real " + at("real.csv") + " --generated " + at("gen1.csv") + " --seed 2") == 0);
  const auto report = slurp(kWork / "stdout.txt");
  CHECK(report.rfind("metric,appliance,value\n", 0) == 0);
  CHECK(report.find("interdependency,all,") != std::string::npos);

  REQUIRE(run("evaluate --self-test --real " + at("real.csv") + " --generated " + at("real.csv") +
              " --out " + at("self.csv")) == 0);
  std::istringstream rows(slurp(kWork / "self.csv"));
  std::string line;
  std::getline(rows, line);
  int n = 0;
  while (std::getline(rows, line)) {
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) == 0.0);
    ++n;
  }
  CHECK(n == 7);
}

TEST_CASE("cli: usage and input errors") {
  fs::create_directories(kWork);
  CHECK(run("") == 2);
  CHECK(run("train --no-such-flag") == 2);
  CHECK(run("generate --checkpoint " + at("nowhere") + " --n 3 --out " + at("x.csv")) == 2);
  CHECK(run("evaluate --real " + at("missing.csv") + " --generated " + at("missing.csv")) == 2);

  std::ofstream(kWork / "broken.csv") << "sample_id,day_type,appliance,t0\nx,weekday,0,-4\n";
  CHECK(run("prepare --data " + at("broken.csv") + " --out " + at("p2")) == 1);
  CHECK(slurp(kWork / "stderr.txt").rfind("error: input:", 0) == 0);
}

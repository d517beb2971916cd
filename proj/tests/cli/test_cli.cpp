#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lamod/io/files.hpp"
#include "lamod/io/lmf1.hpp"
#include "lamod/io/serialize.hpp"
#include "lamod/phantom.hpp"

namespace fs = std::filesystem;
using lamod::io::read_bytes;
using lamod::io::read_text;

namespace {

const fs::path kWork = LAMOD_TEST_WORK_DIR;

struct Result {
  int code = -1;
  std::string out, err;
};

// Runs the lamod binary with `args` (already shell-quoted where needed).
Result run_lamod(const std::string& args) {
  const fs::path o = kWork / "stdout.txt", e = kWork / "stderr.txt";
  const std::string cmd = std::string("\"") + LAMOD_EXE + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                          e.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(o);
  r.err = read_text(e);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// 32x32 phantoms with two frames after the reference: frame 1 is the peak of
// the cycle and frame 2 is identical to frame 0.
const char* kSmallConfig = R"({
  "grid": {"height": 32, "width": 32},
  "registration": {"max_iterations": 500, "network_epochs": 2},
  "nets": {"base_channels": 4, "latent_channels": 4},
  "diffusion": {"steps": 5, "max_epochs": 3, "learning_rate": 1e-3},
  "phantom": {"frames": 2, "r_inner": 5, "r_outer": 10,
              "ranges": {"r_inner_min": 5, "r_inner_max": 6, "thickness_min": 3, "thickness_max": 4,
                         "center_jitter": 1}},
  "seed": 3
})";

struct Fixture {
  fs::path config = kWork / "small.json";
  fs::path data = kWork / "data";

  Fixture() {
    if (!fs::exists(config)) {
      fs::create_directories(kWork);
      write_file(config, kSmallConfig);
    }
    if (!fs::exists(data / "manifest.json")) {
      const Result r = run_lamod("phantom --config " + q(config) + " --out " + q(data) + " -n 5");
      REQUIRE(r.code == 0);
    }
  }
};

double max_abs_field(const fs::path& p, const char* name, std::size_t frame) {
  const auto f = lamod::io::fields_from_container(lamod::io::read_container(p), name);
  double m = 0.0;
  for (std::size_t k = 0; k < f.at(frame).x.size(); ++k)
    m = std::max({m, std::abs(f[frame].x[k]), std::abs(f[frame].y[k])});
  return m;
}

}  // namespace

TEST_CASE("config") {
  fs::create_directories(kWork);
  SUBCASE("defaults match the reference file") {
    const Result r = run_lamod("config");
    REQUIRE(r.code == 0);
    CHECK(r.out == read_text(fs::path(LAMOD_SOURCE_DIR) / "docs" / "config_reference.json"));
  }
  SUBCASE("unknown key") {
    write_file(kWork / "bad.json", R"({"registration": {"sigmaa": 0.01}})");
    const Result r = run_lamod("config --config " + q(kWork / "bad.json"));
    CHECK(r.code != 0);
    CHECK(line_count(r.err) == 1);
    CHECK(r.err.find("sigmaa") != std::string::npos);
    CHECK(r.out.empty());
  }
  SUBCASE("seed override") {
    const Result r = run_lamod("config --seed 17");
    REQUIRE(r.code == 0);
    CHECK(nlohmann::json::parse(r.out).at("seed") == 17);
  }
  SUBCASE("bad usage exits nonzero") {
    CHECK(run_lamod("").code != 0);
    CHECK(run_lamod("frobnicate").code != 0);
    CHECK(run_lamod("register sideways --data " + q(kWork)).code != 0);
  }
}

TEST_CASE("phantom") {
  Fixture fx;
  const fs::path a = kWork / "ph_a", b = kWork / "ph_b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run_lamod("phantom --config " + q(fx.config) + " --out " + q(a) + " -n 30").code == 0);
  REQUIRE(run_lamod("phantom --config " + q(fx.config) + " --out " + q(b) + " -n 30").code == 0);

  const auto m = nlohmann::json::parse(read_text(a / "manifest.json"));
  CHECK(m.at("train").size() == 22);
  CHECK(m.at("validation").size() == 4);
  CHECK(m.at("test").size() == 4);

  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() == ".lmf1") ++files;
    CHECK(read_bytes(e.path()) == read_bytes(b / e.path().filename()));
  }
  CHECK(files == 30);

  SUBCASE("different seed, different data") {
    const fs::path c = kWork / "ph_c";
    fs::remove_all(c);
    REQUIRE(run_lamod("phantom --config " + q(fx.config) + " --seed 4 --out " + q(c) + " -n 30").code == 0);
    CHECK(read_bytes(a / "seq_000.lmf1") != read_bytes(c / "seq_000.lmf1"));
  }
}

TEST_CASE("register") {
  Fixture fx;
  const fs::path direct = kWork / "reg_direct";
  REQUIRE(run_lamod("register direct --config " + q(fx.config) + " --data " + q(fx.data) + " --split train --out " +
                q(direct))
              .code == 0);
  const auto m = nlohmann::json::parse(read_text(fx.data / "manifest.json"));
  const std::string stem = fs::path(m.at("train").at(0).get<std::string>()).stem().string();

  SUBCASE("identical frames give a zero velocity") {
    CHECK(max_abs_field(direct / (stem + "_v0.lmf1"), "velocities", 1) < 1e-8);
    CHECK(max_abs_field(direct / (stem + "_v0.lmf1"), "velocities", 0) > 0.01);
  }

  SUBCASE("energy table") {
    const auto rows = csv_rows(direct / "energy.csv");
    REQUIRE(rows.size() == 2 * m.at("train").size());
    for (const auto& r : rows) CHECK(std::stod(r[3]) <= std::stod(r[2]));
  }

  SUBCASE("apply without a model") {
    const Result r = run_lamod("register apply --config " + q(fx.config) + " --data " + q(fx.data) + " --model " +
                           q(kWork / "missing.lmf1") + " --out " + q(kWork / "reg_apply_missing"));
    CHECK(r.code != 0);
    CHECK(line_count(r.err) == 1);
    CHECK(r.err.find("missing.lmf1") != std::string::npos);
    CHECK_FALSE(fs::exists(kWork / "reg_apply_missing" / "energy.csv"));
  }
}

TEST_CASE("register train then apply") {
  Fixture fx;
  // longer fit so the network closes most of the amortization gap
  const fs::path cfg = kWork / "amortize.json";
  auto j = nlohmann::json::parse(kSmallConfig);
  j["registration"]["network_epochs"] = 1000;
  j["registration"]["learning_rate"] = 1e-3;
  j["nets"]["base_channels"] = 8;
  write_file(cfg, j.dump());

  const fs::path model = kWork / "er" / "er.lmf1";
  const fs::path direct = kWork / "am_direct", a1 = kWork / "am_apply1", a2 = kWork / "am_apply2";
  const std::string base = " --config " + q(cfg) + " --data " + q(fx.data);
  REQUIRE(run_lamod("register direct" + base + " --split train --out " + q(direct)).code == 0);
  REQUIRE(run_lamod("register train" + base + " --model " + q(model)).code == 0);
  REQUIRE(run_lamod("register apply" + base + " --split train --model " + q(model) + " --out " + q(a1)).code == 0);
  REQUIRE(run_lamod("register apply" + base + " --split train --model " + q(model) + " --out " + q(a2)).code == 0);

  const auto log = csv_rows(fs::path(model.string() + ".csv"));
  CHECK(log.size() == 1000);

  const auto d = csv_rows(direct / "energy.csv");
  const auto a = csv_rows(a1 / "energy.csv");
  REQUIRE(d.size() == a.size());
  // frame 1 is the contracted pair
  const double e_direct = std::stod(d[0][3]);
  const double e_apply = std::stod(a[0][3]);
  MESSAGE("direct " << e_direct << ", network " << e_apply);
  CHECK(std::abs(e_apply - e_direct) < 0.25 * e_direct);

  for (const auto& e : fs::directory_iterator(a1)) CHECK(read_bytes(e.path()) == read_bytes(a2 / e.path().filename()));
}

TEST_CASE("train, resume and infer") {
  Fixture fx;
  const std::string cfg = " --config " + q(fx.config);
  const fs::path er = kWork / "tr" / "er.lmf1", model = kWork / "tr" / "diff.lmf1";
  REQUIRE(run_lamod("register train" + cfg + " --data " + q(fx.data) + " --model " + q(er)).code == 0);
  REQUIRE(run_lamod("train" + cfg + " --data " + q(fx.data) + " --reg-model " + q(er) + " --out " + q(model) +
                " --epochs 1")
              .code == 0);

  const fs::path log = model.string() + ".csv";
  auto rows = csv_rows(log);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == "1");
  CHECK(rows[0][1] == "train");
  CHECK(rows[1][0] == "1");
  CHECK(rows[1][1] == "validation");

  REQUIRE(run_lamod("train" + cfg + " --data " + q(fx.data) + " --reg-model " + q(er) + " --out " + q(model) +
                " --epochs 2 --resume")
              .code == 0);
  rows = csv_rows(log);
  REQUIRE(rows.size() == 6);
  CHECK(rows[2][0] == "2");
  CHECK(rows[5][0] == "3");
  CHECK(rows[5][1] == "validation");

  const auto m = nlohmann::json::parse(read_text(fx.data / "manifest.json"));
  const fs::path seq = fx.data / m.at("test").at(0).get<std::string>();
  const fs::path o1 = kWork / "inf" / "a.lmf1", o2 = kWork / "inf" / "b.lmf1", o3 = kWork / "inf" / "c.lmf1";
  const std::string args = cfg + " --sequence " + q(seq) + " --reg-model " + q(er) + " --model " + q(model);
  REQUIRE(run_lamod("infer" + args + " --out " + q(o1)).code == 0);
  REQUIRE(run_lamod("infer" + args + " --out " + q(o2)).code == 0);
  REQUIRE(run_lamod("infer" + args + " --seed 99 --out " + q(o3)).code == 0);
  CHECK(read_bytes(o1) == read_bytes(o2));
  CHECK(read_bytes(o1) != read_bytes(o3));

  const auto phi = lamod::io::fields_from_container(lamod::io::read_container(o1), "displacements");
  REQUIRE(phi.size() == 2);
  CHECK(phi[0].grid.height == 32);
  CHECK(phi[0].grid.width == 32);

  SUBCASE("missing inputs") {
    const Result r = run_lamod("infer" + cfg + " --sequence " + q(kWork / "nope.lmf1") + " --reg-model " + q(er) +
                           " --model " + q(model) + " --out " + q(kWork / "inf" / "d.lmf1"));
    CHECK(r.code != 0);
    CHECK(line_count(r.err) == 1);
  }
  SUBCASE("resume without a checkpoint") {
    const Result r = run_lamod("train" + cfg + " --data " + q(fx.data) + " --reg-model " + q(er) + " --out " +
                           q(kWork / "tr" / "none.lmf1") + " --resume");
    CHECK(r.code != 0);
    CHECK(line_count(r.err) == 1);
  }
}

TEST_CASE("strain and eval on the analytic motion") {
  fs::create_directories(kWork);
  lamod::PhantomConfig pc;
  pc.contraction_amp = 0.1;
  pc.twist_amp = 0.2;
  pc.center_jitter = 2.0;  // the reports use the mask centroid, not this center
  pc.seed = 7;
  const lamod::PhantomSample s = lamod::generate(pc);
  const fs::path seq = kWork / "analytic" / "seq.lmf1", truth = kWork / "analytic" / "truth.lmf1";
  fs::create_directories(seq.parent_path());
  lamod::io::write_container(seq, lamod::io::sample_to_container(s));
  lamod::io::write_container(truth, lamod::io::fields_to_container(s.motions, "displacements"));

  SUBCASE("peak-frame segment means") {
    const fs::path out = kWork / "pgm_strain";
    REQUIRE(run_lamod("strain --motion " + q(truth) + " --sequence " + q(seq) + " --out " + q(out)).code == 0);
    const auto rows = csv_rows(out / "strain.csv");
    REQUIRE(rows.size() == 6 * s.motions.size());
    std::size_t peak = 0;
    for (const auto& r : rows) {
      if (r[0] != "4") continue;
      ++peak;
      CHECK(std::abs(std::stod(r[2]) - (-0.095)) < 1e-3);
    }
    CHECK(peak == 6);
    CHECK(fs::exists(out / "ecc_08.pgm"));
  }

  SUBCASE("prediction equal to the truth") {
    const fs::path out = kWork / "pgm_eval";
    REQUIRE(run_lamod("eval --pred " + q(truth) + " --sequence " + q(seq) + " --out " + q(out)).code == 0);
    const auto rows = csv_rows(out / "eval.csv");
    REQUIRE(rows.size() == 7);
    CHECK(rows[0][0] == "epe_mm");
    CHECK(std::stod(rows[0][2]) == 0.0);
    for (std::size_t q = 1; q <= 6; ++q) {
      CHECK(rows[q][0] == "strain_error");
      CHECK(rows[q][1] == std::to_string(q));
      CHECK(std::stod(rows[q][2]) == 0.0);
    }
    CHECK(csv_rows(out / "eval_frames.csv").size() == s.motions.size());
  }

  SUBCASE("grid mismatch") {
    lamod::PhantomConfig small = pc;
    small.grid = lamod::Grid2{48, 48, 1.0};
    small.r_inner = 8;
    small.r_outer = 14;
    const fs::path other = kWork / "analytic" / "other.lmf1";
    lamod::io::write_container(other, lamod::io::fields_to_container(lamod::generate(small).motions, "displacements"));
    for (const char* cmd : {"strain --motion ", "eval --pred "}) {
      const Result r = run_lamod(std::string(cmd) + q(other) + " --sequence " + q(seq) + " --out " +
                             q(kWork / "mismatch"));
      CHECK(r.code != 0);
      CHECK(line_count(r.err) == 1);
    }
  }

  SUBCASE("frame count mismatch") {
    std::vector<lamod::VectorField> fewer(s.motions.begin(), s.motions.begin() + 3);
    const fs::path p = kWork / "analytic" / "fewer.lmf1";
    lamod::io::write_container(p, lamod::io::fields_to_container(fewer, "displacements"));
    const Result r = run_lamod("eval --pred " + q(p) + " --sequence " + q(seq) + " --out " + q(kWork / "mismatch"));
    CHECK(r.code != 0);
    CHECK(r.err.find("3 frames") != std::string::npos);
  }
}

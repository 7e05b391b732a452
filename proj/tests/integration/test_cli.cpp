#include "dudf/pipeline.hpp"

#include "tempdir.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <string>

#ifdef DUDF_CLI_PATH

using dudf::testing::read_bytes;
using dudf::testing::TempDir;
using dudf::testing::write_text;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = std::string("'") + DUDF_CLI_PATH + "' " + args + " > '" + out.string() + "' 2> '" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_bytes(out);
  r.err = read_bytes(err);
  return r;
}

const char* kSmallConfig = R"(
[input]
shape = sphere
points = 3000
reference_points = 5000
[train]
iterations = 10
batch_size = 300
hidden_layers = 2
width = 16
[reconstruct]
resolution = 24
[render]
width = 32
height = 32
[eval]
samples = 3000
)";

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::size_t log_records(const std::filesystem::path& log) {
  std::ifstream in(log);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += !line.empty() && line[0] != '#';
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1") {
    TempDir dir;
    CHECK(run_cli(dir, "").code == 1);
    CHECK(run_cli(dir, "frobnicate").code == 1);
    CHECK(run_cli(dir, "train --bogus").code == 1);
    CHECK(run_cli(dir, "--config " + q(dir / "nope.cfg") + " train").code == 1);
    const Run help = run_cli(dir, "--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("reconstruct") != std::string::npos);
  }

  TEST_CASE("config errors exit with 1 and name the line") {
    TempDir dir;
    write_text(dir / "bad.cfg", "[train]\n\nwidth = wide\n");
    const Run r = run_cli(dir, "--config " + q(dir / "bad.cfg") + " train");
    CHECK(r.code == 1);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(r.err.find("train.width") != std::string::npos);
  }

  TEST_CASE("train smoke run") {
    TempDir dir;
    write_text(dir / "run.cfg", kSmallConfig);
    const Run r = run_cli(dir, "--config " + q(dir / "run.cfg") + " train --output " + q(dir / "out"));
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "out" / "model.ckpt"));
    CHECK(log_records(dir / "out" / "train.log") == 10);
    CHECK(r.out.find("checkpoint=") != std::string::npos);
  }

  TEST_CASE("missing input file is a runtime error naming the path") {
    TempDir dir;
    write_text(dir / "run.cfg", "[input]\ncloud = " + (dir / "ghost.xyz").string() + "\n[train]\niterations = 2\n");
    const Run r = run_cli(dir, "--config " + q(dir / "run.cfg") + " train --output " + q(dir / "out"));
    CHECK(r.code == 2);
    CHECK(r.err.find("ghost.xyz") != std::string::npos);
  }

  TEST_CASE("seeded runs are identical") {
    TempDir dir;
    write_text(dir / "run.cfg", kSmallConfig);
    const std::string base = "--config " + q(dir / "run.cfg") + " --seed 5 --deterministic ";
    CHECK(run_cli(dir, base + "--threads 1 train --output " + q(dir / "a")).code == 0);
    CHECK(run_cli(dir, base + "--threads 3 train --output " + q(dir / "b")).code == 0);
    CHECK(run_cli(dir, "--config " + q(dir / "run.cfg") + " --seed 6 train --output " + q(dir / "c")).code == 0);
    CHECK(read_bytes(dir / "a" / "model.ckpt") == read_bytes(dir / "b" / "model.ckpt"));
    CHECK(read_bytes(dir / "a" / "model.ckpt") != read_bytes(dir / "c" / "model.ckpt"));
  }

  TEST_CASE("reconstruct, render, eval and sample") {
    TempDir dir;
    write_text(dir / "run.cfg", kSmallConfig);
    const std::string cfg = "--config " + q(dir / "run.cfg") + " ";
    REQUIRE(run_cli(dir, cfg + "train --output " + q(dir / "out")).code == 0);
    const auto ckpt = dir / "out" / "model.ckpt";

    const Run rec = run_cli(dir, cfg + "reconstruct " + q(ckpt) + " " + q(dir / "mesh.obj"));
    CHECK(rec.code == 0);
    CHECK(rec.out.find("vertices=") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "mesh.obj"));
    CHECK(run_cli(dir, cfg + "reconstruct --resolution 4 " + q(ckpt) + " " + q(dir / "m4.obj")).code == 1);

    const Run ren = run_cli(dir, cfg + "render " + q(ckpt) + " " + q(dir / "a.ppm"));
    CHECK(ren.code == 0);
    CHECK(ren.out.find("hit_ratio=") != std::string::npos);
    CHECK(ren.out.find("fallback_ratio=") != std::string::npos);
    CHECK(ren.out.find("mean_steps=") != std::string::npos);
    CHECK(read_bytes(dir / "a.ppm").size() == std::string("P6\n32 32\n255\n").size() + 3 * 32 * 32);
    CHECK(run_cli(dir, cfg + "render " + q(ckpt) + " " + q(dir / "b.ppm")).code == 0);
    CHECK(read_bytes(dir / "a.ppm") == read_bytes(dir / "b.ppm"));

    // A checkpoint eval either reports metrics or, for an empty mesh, fails
    // with a runtime error and the failure flag.
    const Run ev = run_cli(dir, cfg + "eval " + q(ckpt));
    CHECK((ev.code == 0 || ev.code == 2));
    CHECK(ev.out.find(ev.code == 0 ? "failed=0\n" : "failed=1\n") != std::string::npos);

    const dudf::ScalingParams p(100);
    dudf::export_obj(dudf::reconstruct(dudf::AnalyticField(dudf::Sphere{}, p), p, 64).mesh, dir / "sphere.obj");
    const Run self = run_cli(dir, cfg + "eval " + q(dir / "sphere.obj") + " --report " + q(dir / "r.txt") +
                                      " --table " + q(dir / "t.txt"));
    CHECK(self.code == 0);
    CHECK(self.out.find("l1cd_x1e3=") != std::string::npos);
    CHECK(self.out.find("nc=") != std::string::npos);
    CHECK(read_bytes(dir / "r.txt") == self.out);
    CHECK(read_bytes(dir / "t.txt").rfind("# id time_s l1cd_x1e3 l2cd_x1e3 nc\n", 0) == 0);

    write_text(dir / "bare.xyz", "0 0 0.5\n0 0.5 0\n0.5 0 0\n");
    const Run bare = run_cli(dir, cfg + "eval " + q(dir / "sphere.obj") + " --reference " + q(dir / "bare.xyz"));
    CHECK(bare.code == 0);
    CHECK(bare.err.find("nc omitted") != std::string::npos);
    CHECK(bare.out.find("nc=") == std::string::npos);
    CHECK(bare.out.find("l2cd_x1e3=") != std::string::npos);

    const Run s = run_cli(dir, cfg + "sample " + q(dir / "batch.txt"));
    CHECK(s.code == 0);
    CHECK(s.out == "surface=100\nnear=100\nfar=100\n");
  }

  TEST_CASE("corrupt checkpoints are runtime errors") {
    TempDir dir;
    write_text(dir / "bad.ckpt", "DUDF9 1 2 3 4 5\n");
    const Run r = run_cli(dir, "reconstruct " + q(dir / "bad.ckpt") + " " + q(dir / "m.obj"));
    CHECK(r.code == 2);
    CHECK(r.err.find("DUDF1") != std::string::npos);
  }

  TEST_CASE("ablate writes one row per cell") {
    TempDir dir;
    write_text(dir / "run.cfg", kSmallConfig);
    const Run r = run_cli(dir, "--config " + q(dir / "run.cfg") + " ablate --alpha 1,100 --table " + q(dir / "t.txt"));
    CHECK(r.code == 0);
    CHECK(r.out.find("alpha=1 ") != std::string::npos);
    CHECK(r.out.find("alpha=100 ") != std::string::npos);
    const std::string table = read_bytes(dir / "t.txt");
    CHECK(std::count(table.begin(), table.end(), '\n') == 3);
    CHECK(run_cli(dir, "--config " + q(dir / "run.cfg") + " ablate").code == 1);
  }
}

#endif

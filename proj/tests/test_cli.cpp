#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "ara/cli.hpp"
#include "ara/serialize.hpp"

using namespace ara;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "[data]\ncount = 3\neval_count = 2\nheight = 32\nwidth = 32\nlength = 4\nsize_min = 4\nsize_max = 6\n"
    "[model]\nfeature_dim = 4\nvalue_dim = 2\ndecoder_hidden = 4\n"
    "[train]\nsteps = 6\n"
    "[attack]\niterations = 2\n"
    "[sweep]\nframes = 1, 2\n";

std::string first_line(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("the pipeline writes its documented outputs") {
  const fs::path root = fs::temp_directory_path() / "ara_test_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cfg = (root / "tiny.cfg").string();
  io::write_file(cfg, kTinyConfig);
  const std::string r = root.string();
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "ara");
    return cli::run(args);
  };

  REQUIRE(run({"gen-data", "--config", cfg, "--out", r + "/data"}) == 0);
  CHECK(fs::exists(root / "data" / "train" / "manifest.txt"));
  CHECK(fs::exists(root / "data" / "eval" / "manifest.txt"));
  CHECK(fs::exists(root / "data" / "run.manifest"));

  REQUIRE(run({"train", "--config", cfg, "--data", r + "/data", "--out", r + "/m.aram"}) == 0);
  CHECK(first_line(root / "m.aram.loss.csv") == "step,loss");
  CHECK(fs::exists(root / "m.aram.manifest"));

  REQUIRE(run({"attack", "--config", cfg, "--ckpt", r + "/m.aram", "--data", r + "/data", "--attacker", "ara",
               "--out", r + "/ara"}) == 0);
  CHECK(first_line(root / "ara" / "summary.csv") ==
        "attacker,sweep,value,videos,clean_jf,adv_jf,drop,drop_std,linf_max,aborted");
  CHECK(first_line(root / "ara" / "per_video.csv").rfind("attacker,sweep,value,video,", 0) == 0);
  CHECK(first_line(root / "ara" / "iterations.csv").rfind("attacker,sweep,value,video,frame,iteration", 0) == 0);
  CHECK(fs::exists(root / "ara" / "frames"));

  REQUIRE(run({"attack", "--config", cfg, "--ckpt", r + "/m.aram", "--data", r + "/data", "--attacker", "fgsm",
               "--sweep", "frames", "--out", r + "/sweep"}) == 0);
  CHECK_FALSE(fs::exists(root / "sweep" / "frames"));

  REQUIRE(run({"eval", "--config", cfg, "--ckpt", r + "/m.aram", "--data", r + "/data", "--adv", r + "/ara", "--out",
               r + "/eval.csv"}) == 0);
  CHECK(first_line(root / "eval.csv") == "video,objects,adv_frames,j,f,jf");

  REQUIRE(run({"report", "--runs", r + "/ara", r + "/sweep", "--out", r + "/report.txt"}) == 0);
  const std::string report = io::read_file(root / "report.txt");
  CHECK(report.find("# comparison") != std::string::npos);
  CHECK(report.find("# sweep frames") != std::string::npos);

  CHECK(run({"attack", "--ckpt", r + "/m.aram", "--data", r + "/data", "--attacker", "nope", "--out", r + "/x"}) != 0);
  CHECK(run({"train", "--data", r + "/missing", "--out", r + "/x.aram"}) != 0);
  fs::remove_all(root);
}

}  // TEST_SUITE

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semslam/app/commands.hpp"
#include "semslam/app/config.hpp"
#include "semslam/app/mesh.hpp"
#include "semslam/app/pipeline.hpp"
#include "semslam/errors.hpp"
#include "semslam/sim/dataset.hpp"

using namespace semslam;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("semslam_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

KeyValueConfig parse(const std::string& text) {
  std::istringstream in(text);
  return KeyValueConfig::parse(in);
}

SceneSpec noiseless(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.noise = SimNoise::zero();
  return s;
}

RunConfig serial(Mode m) {
  RunConfig cfg;
  cfg.mode = m;
  cfg.optimizer.max_threads = 1;
  return cfg;
}

const Mode kModes[] = {Mode::P, Mode::PP, Mode::PPM, Mode::PO, Mode::PPOMS};

}  // namespace

TEST_CASE("modes") {
  for (Mode m : kModes) CHECK(parse_mode(to_string(m)) == m);
  CHECK(to_string(Mode::PPOMS) == "PPO+MS");
  CHECK_THROWS_AS(parse_mode("PPX"), std::invalid_argument);
  CHECK(uses_planes(Mode::PP));
  CHECK_FALSE(uses_planes(Mode::PO));
  CHECK(uses_manhattan(Mode::PPM));
  CHECK(uses_objects(Mode::PO));
  CHECK(uses_support(Mode::PPOMS));
  CHECK_FALSE(uses_support(Mode::PO));
}

TEST_CASE("key-value config") {
  const auto kv = parse("# comment\nassoc.th_H = 9\n\noptimizer.max_iterations = 50  # trailing\nnoise.sigma_t=0.1\n");
  RunConfig cfg;
  apply_config(kv, cfg);
  CHECK(cfg.assoc.th_H == 9);
  CHECK(cfg.optimizer.max_iterations == 50);
  CHECK(cfg.noise.sigma_t == 0.1);

  RunConfig other;
  CHECK_THROWS_AS(apply_config(parse("assoc.unknown = 1\n"), other), FormatError);
  CHECK_THROWS_AS(apply_config(parse("assoc.th_H = many\n"), other), FormatError);
  try {
    parse("a = 1\nno equals sign\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("a = 1\na = 2\n"), FormatError);

  const SceneSpec spec = scene_spec_from(parse("seed = 5\nn_points = 50\ntrajectory = corridor\nnoise.pixel_sigma = 0.5\n"));
  CHECK(spec.seed == 5);
  CHECK(spec.n_points == 50);
  CHECK(spec.trajectory == TrajectoryKind::Corridor);
  CHECK(spec.noise.pixel_sigma == 0.5);
  CHECK_THROWS_AS(scene_spec_from(parse("trajectory = spiral\n")), std::exception);
  CHECK_THROWS_AS(scene_spec_from(parse("n_pointz = 3\n")), FormatError);
}

TEST_CASE("noiseless dataset is solved exactly in every mode") {
  const Dataset ds = simulate(noiseless(21));
  for (Mode m : kModes) {
    SUBCASE(std::string(to_string(m)).c_str()) {
      const PipelineResult r = run_pipeline(ds, serial(m));
      CHECK(r.solution.final_cost < 1e-6);
      CHECK(ate_rmse(r.solution.trajectory(), gt_trajectory(ds)) < 1e-6);
    }
  }
}

TEST_CASE("factor sets grow with the mode") {
  // Noiseless data keeps the associations identical across modes.
  const Dataset ds = simulate(noiseless(22));
  std::map<Mode, std::array<int, kFactorKindCount>> counts;
  for (Mode m : kModes) counts[m] = run_pipeline(ds, serial(m)).graph.factor_counts();
  auto count = [&](Mode m, FactorKind k) { return counts[m][static_cast<int>(k)]; };
  auto superset = [&](Mode big, Mode small) {
    for (int k = 0; k < kFactorKindCount; ++k) {
      if (counts[big][k] < counts[small][k]) return false;
    }
    return true;
  };
  CHECK(superset(Mode::PP, Mode::P));
  CHECK(superset(Mode::PPM, Mode::PP));
  CHECK(superset(Mode::PPOMS, Mode::PPM));
  CHECK(superset(Mode::PPOMS, Mode::PO));
  CHECK(count(Mode::P, FactorKind::PlaneObservation) == 0);
  CHECK(count(Mode::PP, FactorKind::PlaneObservation) > 0);
  CHECK(count(Mode::PP, FactorKind::PointPlane) > 0);
  CHECK(count(Mode::PP, FactorKind::PlaneParallel) + count(Mode::PP, FactorKind::PlanePerpendicular) == 0);
  CHECK(count(Mode::PPM, FactorKind::PlaneParallel) + count(Mode::PPM, FactorKind::PlanePerpendicular) > 0);
  CHECK(count(Mode::PO, FactorKind::QuadricObservation) > 0);
  CHECK(count(Mode::PO, FactorKind::Tangency) == 0);
  CHECK(count(Mode::PPOMS, FactorKind::Tangency) > 0);
  CHECK(count(Mode::PPOMS, FactorKind::ShapePrior) > 0);
}

TEST_CASE("solution file round trip") {
  const Dataset ds = simulate(noiseless(23));
  const Solution s = run_pipeline(ds, serial(Mode::PPOMS)).solution;
  const fs::path dir = scratch("solution");
  write_solution(s, dir);
  const Solution back = read_solution(dir);
  CHECK(back.mode == "PPO+MS");
  CHECK(back.status == s.status);
  CHECK(back.poses.size() == s.poses.size());
  CHECK(back.points.size() == s.points.size());
  CHECK(back.planes.size() == s.planes.size());
  CHECK(back.quadrics.size() == s.quadrics.size());
  CHECK(back.factor_counts == s.factor_counts);
  for (std::size_t i = 0; i < s.poses.size(); ++i) {
    CHECK((back.poses[i].second.matrix() - s.poses[i].second.matrix()).norm() < 1e-12);
  }
  for (std::size_t i = 0; i < s.quadrics.size(); ++i) {
    CHECK((quadric_dual_matrix(back.quadrics[i].quadric) - quadric_dual_matrix(s.quadrics[i].quadric)).norm() < 1e-12);
  }
  write_solution(back, dir / "again");
  const Solution twice = read_solution(dir / "again");
  CHECK(twice.final_cost == s.final_cost);

  fs::create_directories(dir / "broken");
  std::ofstream(dir / "broken" / kSolutionFileName) << "{\"format_version\": 1}\n{\"type\": \"pose\"}\n";
  CHECK_THROWS_AS(read_solution(dir / "broken"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("map exports") {
  const Dataset ds = simulate(noiseless(24));
  const Solution s = run_pipeline(ds, serial(Mode::PPOMS)).solution;
  std::ostringstream mesh;
  MeshOptions opt;
  write_map_mesh(s, mesh, opt);
  std::istringstream in(mesh.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "ply");
  std::getline(in, line);
  CHECK(line == "format ascii 1.0");
  long vertices = -1, faces = -1;
  while (std::getline(in, line) && line != "end_header") {
    std::istringstream ls(line);
    std::string w, what;
    long n = 0;
    ls >> w >> what >> n;
    if (w == "element" && what == "vertex") vertices = n;
    if (w == "element" && what == "face") faces = n;
  }
  const long ellipsoid_vertices = (opt.rings + 1) * opt.segments;
  CHECK(vertices == static_cast<long>(s.quadrics.size()) * ellipsoid_vertices +
                        4 * static_cast<long>(s.planes.size()) + static_cast<long>(s.points.size()));
  long body_lines = 0;
  while (std::getline(in, line)) ++body_lines;
  CHECK(body_lines == vertices + faces);

  std::ostringstream records;
  write_map_records(s, records);
  std::istringstream rin(records.str());
  std::map<std::string, int> kinds;
  while (std::getline(rin, line)) kinds[nlohmann::json::parse(line).at("type").get<std::string>()]++;
  CHECK(kinds["point"] == static_cast<int>(s.points.size()));
  CHECK(kinds["plane"] == static_cast<int>(s.planes.size()));
  CHECK(kinds["quadric"] == static_cast<int>(s.quadrics.size()));
}

TEST_CASE("commands and exit codes") {
  const fs::path dir = scratch("commands");
  std::ofstream(dir / "spec.txt") << "seed = 4\nn_keyframes = 10\n";
  std::ostringstream log, out;
  CHECK(cmd_simulate(dir / "spec.txt", dir / "ds", log) == kExitOk);
  CHECK(fs::exists(dir / "ds" / kDatasetFileName));

  std::ofstream(dir / "solve.cfg") << "optimizer.max_threads = 1\n";
  const int rc = cmd_solve(dir / "ds", "PP+M", dir / "solve.cfg", dir / "sol", log);
  CHECK((rc == kExitOk || rc == kExitNumerical));
  CHECK(fs::exists(dir / "sol" / kSolutionFileName));
  CHECK(cmd_solve(dir / "ds", "bogus", std::nullopt, dir / "sol2", log) == kExitUsage);
  CHECK(cmd_solve(dir / "missing", "P", std::nullopt, dir / "sol3", log) == kExitData);
  std::ofstream(dir / "bad.cfg") << "optimizer.nope = 1\n";
  CHECK(cmd_solve(dir / "ds", "P", dir / "bad.cfg", dir / "sol4", log) == kExitData);

  CHECK(cmd_eval(dir / "sol", dir / "ds", dir / "results.ndjson", out, log) == kExitOk);
  const auto rec = nlohmann::json::parse(out.str());
  CHECK(rec.at("mode") == "PP+M");
  CHECK(rec.at("n_keyframes") == 10);
  CHECK(rec.at("seed") == 4);
  CHECK(cmd_eval(dir / "sol", dir / "ds", dir / "results.ndjson", out, log) == kExitOk);
  std::ifstream results(dir / "results.ndjson");
  int lines = 0;
  for (std::string l; std::getline(results, l);) ++lines;
  CHECK(lines == 2);

  CHECK(cmd_export(dir / "sol", "map-mesh", std::nullopt, log) == kExitOk);
  CHECK(fs::exists(dir / "sol" / "map.ply"));
  CHECK(cmd_export(dir / "sol", "records", dir / "r.ndjson", log) == kExitOk);
  CHECK(fs::exists(dir / "r.ndjson"));
  CHECK(cmd_export(dir / "sol", "obj", std::nullopt, log) == kExitUsage);

  // Corrupt dataset line reported with its number.
  std::ofstream(dir / "ds" / kDatasetFileName, std::ios::app) << "garbage\n";
  log.str("");
  CHECK(cmd_solve(dir / "ds", "P", std::nullopt, dir / "sol5", log) == kExitData);
  CHECK(log.str().find("line ") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("executable usage errors") {
  const char* exe = std::getenv("SEMSLAM_CLI");
  if (!exe) return;
  auto run = [&](const std::string& args) {
    const int status = std::system((std::string(exe) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("") == kExitUsage);
  CHECK(run("frobnicate") == kExitUsage);
  CHECK(run("solve --dataset /nonexistent") == kExitUsage);
  CHECK(run("--help") == kExitOk);
  CHECK(run("eval --solution /nonexistent --dataset /nonexistent") == kExitData);
}

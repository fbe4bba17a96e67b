#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../tools/cli.hpp"
#include "autores/io.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace autores;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "autores");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("autores_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const fs::path& p) { return Json::parse(slurp(p)); }

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  return out;
}

// Runs `sub` with a config written from `text`; output into dir/out.
Run run_config(const std::string& sub, const fs::path& dir, const std::string& text,
               std::vector<std::string> extra = {}) {
  std::vector<std::string> args{sub, "--config", write_config(dir, text).string(), "--out",
                                (dir / "out").string()};
  args.insert(args.end(), extra.begin(), extra.end());
  return run(args);
}

const char* kEnsembleConfig = R"({
  "lambda": 1, "gamma": 0.1,
  "noise": {"mu": 0.3, "sigma1": {"kind": "constant", "coeff": 0}, "sigma2": {"kind": "constant", "coeff": 1}},
  "initial": {"ball_radius": 0.01},
  "tau0": 10, "horizon": 2, "dt": 0.001, "paths": 120, "eps1": 0.05
})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("series writes coefficients and a manifest") {
    const fs::path d = scratch("series");
    const Run r = run_config("series", d, R"({"lambda": 1, "gamma": 0.1, "K": 3})", {"--threads", "2"});
    REQUIRE(r.code == 0);
    const Json s = read_json(d / "out" / "series.json");
    CHECK(s["psi0"].get<double>() == doctest::Approx(3.0414252));
    CHECK(s["r"].size() == 4);
    const Json m = read_json(d / "out" / "manifest.json");
    CHECK(m["manifest_version"] == cli::kManifestVersion);
    CHECK(m["artifact_version"] == cli::kArtifactVersion);
    CHECK(m["subcommand"] == "series");
    CHECK(m["config"]["branch"] == "stable");
    CHECK(m["config"]["seed"] == 1);
    CHECK_FALSE(m["config"].contains("threads"));
    CHECK(m["execution"]["threads"] == 2);
  }

  TEST_CASE("configuration errors exit 2 and name the field") {
    const fs::path d = scratch("config_errors");
    Run r = run_config("series", d, "");
    CHECK(r.code == 2);
    CHECK(r.err.find("config") != std::string::npos);

    r = run_config("series", d, R"({"lambda": 1, "gamma": 0.1, "bogus": 3})");
    CHECK(r.code == 2);
    CHECK(r.err.find("bogus") != std::string::npos);

    r = run_config("series", d, R"({"lambda": 1, "gamma": 1.5})");
    CHECK(r.code == 2);
    CHECK(r.err.find("gamma") != std::string::npos);

    r = run_config("series", d, R"({"lambda": 1})");
    CHECK(r.code == 2);
    CHECK(r.err.find("gamma") != std::string::npos);

    r = run_config("series", d, R"({"lambda": "one", "gamma": 0.1})");
    CHECK(r.code == 2);
    CHECK(r.err.find("lambda") != std::string::npos);

    r = run_config("series", d, "{not json");
    CHECK(r.code == 2);

    r = run_config("ensemble", d,
                   R"({"lambda": 1, "gamma": 0.1, "noise": {"mu": 0.3, "sigma1": {"kind": "constant", "coeff": 0, "extra": 1}},
                       "initial": {"r": 1, "psi": 2}, "tau0": 0, "horizon": 1, "paths": 1})");
    CHECK(r.code == 2);
    CHECK(r.err.find("noise.sigma1.extra") != std::string::npos);

    r = run_config("ensemble", d,
                   R"({"lambda": 1, "gamma": 0.1, "noise": {"mu": 0.3, "sigma1": {"kind": "constant", "coeff": 0.5}},
                       "initial": {"r": 1, "psi": 2}, "tau0": 1, "horizon": 1, "paths": 1})");
    CHECK(r.code == 2);
    CHECK(r.err.find("noise") != std::string::npos);

    r = run_config("ensemble", d,
                   R"({"lambda": 1, "gamma": 0.1, "noise": {"mu": 0.1}, "initial": {"r": 1, "psi": 2},
                       "tau0": 0, "horizon": 150, "dt": 0.001, "paths": 1})");
    CHECK(r.code == 2);
    CHECK(r.err.find("dt") != std::string::npos);

    CHECK(run({"series", "--out", (d / "x").string()}).code == 2);
    CHECK(run({"nonsense"}).code == 2);
    CHECK(run({"series", "--config", (d / "missing.json").string()}).code == 2);
    CHECK(run({"series", "--threads", "many"}).code == 2);
    CHECK(run({"--help"}).code == 0);
  }

  TEST_CASE("runtime failures exit 1") {
    const fs::path d = scratch("runtime");
    const Run r = run_config("certify", d,
                             R"({"lambda": 1, "gamma": 0.1, "d_lo": 3, "d_hi": 3, "tau_lo": 10, "tau_hi": 12,
                                 "tau_horizon": 100, "grid": {"radial": 32, "angular": 32, "tau": 32},
                                 "spot_checks": 10})");
    CHECK(r.code == 1);
    const Json c = read_json(d / "out" / "certificate.json");
    CHECK(c["certified"] == false);
    CHECK(c["failure"].contains("inequality"));
    CHECK(fs::exists(d / "out" / "manifest.json"));
  }

  TEST_CASE("certify writes a certificate") {
    const fs::path d = scratch("certify");
    const Run r = run_config("certify", d,
                             R"({"lambda": 1, "gamma": 0.1, "d_lo": 0.05, "d_hi": 0.1, "tau_lo": 10, "tau_hi": 50,
                                 "tau_horizon": 200, "grid": {"radial": 32, "angular": 32, "tau": 32},
                                 "spot_checks": 500})");
    REQUIRE(r.code == 0);
    const Json c = read_json(d / "out" / "certificate.json");
    CHECK(c["certified"] == true);
    CHECK(c["certificate"]["d0"].get<double>() >= 0.05);
    CHECK(c["certificate"]["spot_violations"] == 0);
  }

  TEST_CASE("simulate writes 17-digit CSV with a sidecar") {
    const fs::path d = scratch("simulate");
    Run r = run_config("simulate", d,
                       R"({"lambda": 1, "gamma": 0.1, "tau0": 0, "tau1": 60, "initial": {"r": 1.09, "psi": 2.15}})");
    REQUIRE(r.code == 0);
    const auto ls = lines(d / "out" / "trajectory.csv");
    CHECK(ls.front() == "tau,r,psi");
    CHECK(ls.size() == 6002);
    const auto cells = split(ls[1234]);
    REQUIRE(cells.size() == 3);
    for (const auto& c : cells) CHECK(io::format_double(std::stod(c)) == c);
    CHECK(split(ls[1234])[1].find('e') == std::string::npos);
    const Json side = read_json(d / "out" / "trajectory.json");
    CHECK(side["integrator"] == "dopri5");
    CHECK(side["seed"] == "deterministic");
    CHECK(side["columns"] == Json::array({"tau", "r", "psi"}));
    CHECK(side["truncated"] == false);
    CHECK(side["samples"] == 6001);
    CHECK(side.contains("capture"));

    r = run_config("simulate", d,
                   R"({"lambda": 1, "gamma": 0.1, "tau0": 10, "tau1": 20, "initial": {"ball_radius": 0},
                       "frame": "error", "noise": {"mu": 0.1, "dt": 0.001}})",
                   {"--seed", "9"});
    REQUIRE(r.code == 0);
    CHECK(lines(d / "out" / "trajectory.csv").front() == "tau,R,Psi");
    const Json side2 = read_json(d / "out" / "trajectory.json");
    CHECK(side2["seed"] == 9);
    CHECK(side2["integrator"] == "euler_maruyama");
    CHECK(read_json(d / "out" / "manifest.json")["config"]["seed"] == 9);
  }

  TEST_CASE("ensemble reruns from its manifest byte for byte") {
    const fs::path d = scratch("ensemble");
    Run r = run_config("ensemble", d, kEnsembleConfig, {"--seed", "5", "--threads", "1"});
    REQUIRE(r.code == 0);
    const Json s = read_json(d / "out" / "stats.json");
    CHECK(s["paths"] == 120);
    CHECK(s["deviation_tracked"] == true);
    CHECK(s["exceed_prob_psi"]["estimate"].get<double>() >= 0.0);
    CHECK(lines(d / "out" / "paths.csv").size() == 121);
    const Json side = read_json(d / "out" / "paths.json");
    CHECK(side["rows"] == 120);
    CHECK(side["seed"] == 5);
    CHECK(side["columns"].size() == 13);

    r = run({"ensemble", "--config", (d / "out" / "manifest.json").string(), "--out", (d / "again").string(),
             "--threads", "3"});
    REQUIRE(r.code == 0);
    CHECK(slurp(d / "out" / "stats.json") == slurp(d / "again" / "stats.json"));
    CHECK(slurp(d / "out" / "paths.csv") == slurp(d / "again" / "paths.csv"));
    const Json m1 = read_json(d / "out" / "manifest.json"), m2 = read_json(d / "again" / "manifest.json");
    CHECK(m1["config"] == m2["config"]);
    CHECK(m2["execution"]["threads"] == 3);
  }

  TEST_CASE("exit-times writes the scaling table") {
    const fs::path d = scratch("exit_times");
    const Run r = run_config("exit-times", d,
                             R"({"lambda": 1, "gamma": 0.1, "mu_list": [0.2, 0.3, 0.45], "tau0": 10, "horizon": 2,
                                 "dt": 0.0005, "paths": 60, "eps1": 0.05, "bootstrap": 100})");
    REQUIRE(r.code == 0);
    const auto ls = lines(d / "out" / "exit_times.csv");
    CHECK(ls.front() == "mu,median_exit,lo,hi");
    CHECK(ls.size() == 4);
    const Json side = read_json(d / "out" / "exit_times.json");
    CHECK(side["columns"] == Json::array({"mu", "median_exit", "lo", "hi"}));
    CHECK(side["rows"] == 3);
    CHECK(side["bootstrap"] == 100);
    const Json s = read_json(d / "out" / "scaling.json");
    CHECK(s["slope"].get<double>() < 0.0);
    CHECK(s["points"].size() == 3);
  }

  TEST_CASE("thresholds reproduce the closed forms") {
    const fs::path d = scratch("thresholds");
    const Run r = run_config("thresholds", d,
                             R"({"N": 1, "kappa": 0.5, "h": 1, "n": 2, "A": 3, "a": 1.005038, "C": 1,
                                 "eps1": 0.1, "eps2": 0.1, "mu_list": [0.1, 0.01], "B": 1, "q": 0.5, "beta": 1})");
    REQUIRE(r.code == 0);
    const Json t = read_json(d / "out" / "thresholds.json");
    CHECK(t["delta"].get<double>() == doctest::Approx(9.117e-3).epsilon(5e-4));
    CHECK(t["Delta"].get<double>() == doctest::Approx(1.25e-4).epsilon(5e-4));
    CHECK(t["T_mu_exponent"].get<double>() == doctest::Approx(-1.0));
    CHECK(t["T_mu"][0]["T_mu"].get<double>() == doctest::Approx(10.0));
    CHECK(t["a_k"][0].get<double>() == doctest::Approx(32.0));
    CHECK(t["beta_horizon_exponent"].get<double>() == doctest::Approx(-0.75));

    const Run bad = run_config("thresholds", d,
                               R"({"kappa": 1.5, "a": 1, "C": 1, "eps1": 0.1, "eps2": 0.1})");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("kappa") != std::string::npos);
  }

  TEST_CASE("pendulum writes the comparison files") {
    const fs::path d = scratch("pendulum");
    const Run r = run_config("pendulum", d,
                             R"({"eps": 0.05, "alpha": 3.125e-4, "theta": 2.5e-3, "tau_start": 5, "tau_end": 20})");
    REQUIRE(r.code == 0);
    for (const char* f : {"pendulum.csv", "pendulum.json", "averaged.csv", "averaged.json", "comparison.csv",
                          "comparison.json", "pendulum_summary.json", "manifest.json"}) {
      CHECK(fs::exists(d / "out" / f));
    }
    CHECK(lines(d / "out" / "comparison.csv").front() == "tau,envelope,predicted,relerr");
    CHECK(lines(d / "out" / "pendulum.csv").front() == "t,u,v");
    const Json s = read_json(d / "out" / "pendulum_summary.json");
    CHECK(s["lambda"].get<double>() == doctest::Approx(1.0));
    CHECK(s["mean_relerr"].get<double>() < 0.2);

    const Run bad = run_config("pendulum", d, R"({"eps": 0.05, "alpha": 3.125e-4, "theta": 0, "tau_start": 5, "tau_end": 20})");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("theta") != std::string::npos);
  }

  TEST_CASE("figures emit the trajectory sets") {
    const fs::path d = scratch("figures");
    Run r = run({"figures", "--which", "fig1", "--out", (d / "out").string()});
    REQUIRE(r.code == 0);
    int csv = 0;
    for (const auto& e : fs::directory_iterator(d / "out" / "fig1")) {
      if (e.path().extension() == ".csv" && e.path().filename() != "index.csv") ++csv;
    }
    CHECK(csv == 32);
    const auto idx = lines(d / "out" / "fig1" / "index.csv");
    CHECK(idx.size() == 33);
    CHECK(read_json(d / "out" / "fig1" / "index.json")["rows"] == 32);
    bool cap = false, esc = false;
    for (const auto& l : idx) {
      cap = cap || l.find(",captured") != std::string::npos;
      esc = esc || l.find(",escaped") != std::string::npos;
    }
    CHECK(cap);
    CHECK(esc);

    r = run({"figures", "--which", "fig2", "--out", (d / "out").string(), "--seed", "3"});
    REQUIRE(r.code == 0);
    CHECK(lines(d / "out" / "fig2" / "index.csv").size() == 4);
    CHECK(read_json(d / "out" / "manifest.json")["config"]["which"] == "fig2");

    CHECK(run({"figures", "--which", "fig3", "--out", (d / "out").string()}).code == 2);
  }
}

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qcrab/io.hpp"
#include "qcrab/reference_pulses.hpp"

using namespace qcrab;

TEST_CASE("strict object consumes every key") {
  json j = json::parse(R"({"a": 1, "b": 2.5, "c": "hi"})");

  SUBCASE("all keys consumed") {
    StrictObject o(j, "cfg");
    CHECK(o.require<int>("a") == 1);
    CHECK(o.require<double>("b") == 2.5);
    CHECK(o.require<std::string>("c") == "hi");
    CHECK_NOTHROW(o.finish());
  }
  SUBCASE("leftover key is an error") {
    StrictObject o(j, "cfg");
    o.require<int>("a");
    o.require<double>("b");
    CHECK_THROWS_AS(o.finish(), config_error);
  }
  SUBCASE("missing required key") {
    StrictObject o(j, "cfg");
    CHECK_THROWS_AS(o.require<double>("nope"), config_error);
  }
  SUBCASE("fallback only fires when absent") {
    StrictObject o(j, "cfg");
    CHECK(o.get<int>("a", 7) == 1);
    CHECK(o.get<int>("zz", 7) == 7);
  }
  SUBCASE("wrong type reports the key") {
    StrictObject o(j, "cfg");
    CHECK_THROWS_AS(o.require<double>("c"), config_error);
  }
  SUBCASE("int is accepted where double is wanted") {
    StrictObject o(j, "cfg");
    CHECK(o.require<double>("a") == 1.0);
  }
}

TEST_CASE("strict object sub-objects") {
  json j = json::parse(R"({"outer": {"x": [1.0, 2.0]}, "n": 3})");
  StrictObject o(j, "cfg");
  CHECK(o.has_sub("outer"));
  CHECK(!o.has_sub("n"));
  StrictObject s = o.sub("outer");
  std::vector<double> x = s.require<std::vector<double>>("x");
  CHECK(x == std::vector<double>{1.0, 2.0});
  CHECK_NOTHROW(s.finish());
  o.require<int>("n");
  CHECK_NOTHROW(o.finish());

  CHECK_THROWS_AS(StrictObject(json::parse("[1,2]"), "cfg"), config_error);
  StrictObject o2(j, "cfg");
  CHECK_THROWS_AS(o2.sub("n"), config_error);
}

TEST_CASE("crab params json round trip") {
  CrabParams p = reference_pi_half();
  json j = to_json(p);
  CrabParams q = crab_params_from_json(j);
  CHECK(dump_json(to_json(q)) == dump_json(j));
  CHECK(q.T == p.T);
  CHECK(q.g0 == p.g0);
  CHECK(q.p == p.p);
  CHECK(q.a == p.a);
  CHECK(q.b == p.b);
  CHECK(q.omega == p.omega);

  json bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(crab_params_from_json(bad), config_error);
  json missing = j;
  missing.erase("T_ns");
  CHECK_THROWS_AS(crab_params_from_json(missing), config_error);
}

TEST_CASE("optimization result json round trip") {
  OptimizationResult r;
  r.params = reference_pi();
  r.merit = 0.0014330123;
  r.fidelity_f = 0.9985670321;
  r.max_amp = 29.91402;
  r.evaluations = 1234;
  r.start_index = 7;
  r.converged = true;
  json j = to_json(r);
  OptimizationResult s = optimization_result_from_json(j);
  CHECK(dump_json(to_json(s)) == dump_json(j));
  CHECK(s.merit == r.merit);
  CHECK(s.fidelity_f == r.fidelity_f);
  CHECK(s.max_amp == r.max_amp);
  CHECK(s.evaluations == r.evaluations);
  CHECK(s.start_index == r.start_index);
  CHECK(s.converged == r.converged);
  CHECK(s.params.a == r.params.a);
}

TEST_CASE("parse and dump json") {
  CHECK_THROWS_AS(parse_json("{broken", "test input"), config_error);
  json j = parse_json(R"({"b": 1, "a": 2})", "test input");
  // Insertion order is preserved, so emission is byte-stable.
  CHECK(dump_json(j) == "{\n  \"b\": 1,\n  \"a\": 2\n}\n");
  CHECK(dump_json(parse_json(dump_json(j), "again")) == dump_json(j));
}

TEST_CASE("format_sig9") {
  CHECK(format_sig9(0.0) == "0");
  CHECK(format_sig9(1.0) == "1");
  CHECK(format_sig9(-26.2698162641840) == "-26.2698163");
  CHECK(format_sig9(0.998567) == "0.998567");
  CHECK(format_sig9(1e-12) == "1e-12");
}

TEST_CASE("waveform csv round trip") {
  PulseWaveform w = sample_waveform(reference_pi(), 1.0 / 24.0);
  std::string csv = waveform_csv(w);
  CHECK(csv.rfind("t_ns,gamma_MHz\n", 0) == 0);
  PulseWaveform back = waveform_from_csv(csv);
  REQUIRE(back.samples.size() == w.samples.size());
  CHECK(back.dt == doctest::Approx(w.dt).epsilon(1e-7));
  for (size_t i = 0; i < w.samples.size(); ++i) {
    if (std::abs(w.samples[i]) > 1e-6)
      CHECK(back.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-7));
    else
      CHECK(std::abs(back.samples[i] - w.samples[i]) < 1e-6);
  }
  // The CSV only records the grid, so T comes back as the last sample time,
  // which sits within one step past the true duration.
  CHECK(back.T >= w.T - 1e-7);
  CHECK(back.T < w.T + w.dt);

  CHECK_THROWS_AS(waveform_from_csv("nonsense\n1,2\n"), config_error);
  CHECK_THROWS_AS(waveform_from_csv("t_ns,gamma_MHz\n0,1\n0.5,1\n2.0,1\n"),
                  non_uniform_grid);
}

TEST_CASE("trace and spectrum csv") {
  Trace tr;
  tr.times = {0.0, 1.5, 3.0};
  tr.signal = {1.0, 0.25, 0.5};
  CHECK(trace_csv(tr) == "tau_ns,signal\n0,1\n1.5,0.25\n3,0.5\n");

  Spectrum sp;
  sp.freq_mhz = {0.0, 2.5};
  sp.magnitude = {0.1, 0.023456789012};
  CHECK(spectrum_csv(sp) == "f_MHz,magnitude\n0,0.1\n2.5,0.023456789\n");
}

TEST_CASE("text file round trip") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "qcrab_io_test";
  ensure_dir(dir.string());
  fs::path f = dir / "x.txt";
  write_text_file(f.string(), "hello\nworld\n");
  CHECK(read_text_file(f.string()) == "hello\nworld\n");
  CHECK_THROWS_AS(read_text_file((dir / "missing.txt").string()), config_error);
  fs::remove_all(dir);
}

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qcrab/experiments.hpp"
#include "qcrab/optimizer.hpp"

namespace qcrab {

// Insertion-ordered JSON keeps every emitted document byte-stable.
using json = nlohmann::ordered_json;

// Strict-schema view over a JSON object: every key must be consumed by get()
// or require(), and finish() throws config_error on leftovers. Guards config
// files against typos silently changing defaults.
class StrictObject {
 public:
  StrictObject(const json& obj, std::string path);

  bool has(const std::string& key) const;
  template <typename T>
  T require(const std::string& key);
  template <typename T>
  T get(const std::string& key, T fallback);
  StrictObject sub(const std::string& key);        // required sub-object
  bool has_sub(const std::string& key) const;
  void finish();                                   // throws on unconsumed keys

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string> consumed_;
  const json& fetch(const std::string& key);
  template <typename T>
  T convert(const json& v, const std::string& key) const;
};

// Number formatting for CSV output: 9 significant digits.
std::string format_sig9(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
void ensure_dir(const std::string& path);

json parse_json(const std::string& text, const std::string& what);
// Canonical emission: 2-space indent plus trailing newline. Documents written
// this way re-emit byte-identically after a parse round trip.
std::string dump_json(const json& j);

json to_json(const CrabParams& p);
CrabParams crab_params_from_json(const json& j);

json to_json(const OptimizationResult& r);
OptimizationResult optimization_result_from_json(const json& j);

// CSV: header then one row per sample, 9 significant digits.
std::string waveform_csv(const PulseWaveform& w);          // t_ns, gamma_MHz
PulseWaveform waveform_from_csv(const std::string& text);
std::string trace_csv(const Trace& t);                     // tau_ns, signal
std::string spectrum_csv(const Spectrum& s);               // f_MHz, magnitude

}  // namespace qcrab

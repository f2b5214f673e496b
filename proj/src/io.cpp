#include "qcrab/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qcrab {

StrictObject::StrictObject(const json& obj, std::string path)
    : obj_(obj), path_(std::move(path)) {
  if (!obj_.is_object())
    throw config_error(path_ + ": expected a JSON object");
}

bool StrictObject::has(const std::string& key) const {
  return obj_.contains(key);
}

const json& StrictObject::fetch(const std::string& key) {
  if (!obj_.contains(key))
    throw config_error(path_ + ": missing required key \"" + key + "\"");
  consumed_.push_back(key);
  return obj_.at(key);
}

template <typename T>
T StrictObject::convert(const json& v, const std::string& key) const {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw config_error(path_ + "." + key + ": wrong type");
  }
}

template <typename T>
T StrictObject::require(const std::string& key) {
  return convert<T>(fetch(key), key);
}

template <typename T>
T StrictObject::get(const std::string& key, T fallback) {
  if (!has(key)) return fallback;
  return convert<T>(fetch(key), key);
}

StrictObject StrictObject::sub(const std::string& key) {
  const json& v = fetch(key);
  return StrictObject(v, path_ + "." + key);
}

bool StrictObject::has_sub(const std::string& key) const {
  return obj_.contains(key) && obj_.at(key).is_object();
}

void StrictObject::finish() {
  std::string unknown;
  for (auto it = obj_.begin(); it != obj_.end(); ++it) {
    if (std::find(consumed_.begin(), consumed_.end(), it.key()) ==
        consumed_.end()) {
      if (!unknown.empty()) unknown += ", ";
      unknown += "\"" + it.key() + "\"";
    }
  }
  if (!unknown.empty())
    throw config_error(path_ + ": unknown key(s) " + unknown);
}

template bool StrictObject::require<bool>(const std::string&);
template int StrictObject::require<int>(const std::string&);
template long StrictObject::require<long>(const std::string&);
template double StrictObject::require<double>(const std::string&);
template std::string StrictObject::require<std::string>(const std::string&);
template std::uint64_t StrictObject::require<std::uint64_t>(const std::string&);
template std::vector<double> StrictObject::require<std::vector<double>>(
    const std::string&);

template bool StrictObject::get<bool>(const std::string&, bool);
template int StrictObject::get<int>(const std::string&, int);
template long StrictObject::get<long>(const std::string&, long);
template double StrictObject::get<double>(const std::string&, double);
template std::string StrictObject::get<std::string>(const std::string&,
                                                    std::string);
template std::uint64_t StrictObject::get<std::uint64_t>(const std::string&,
                                                        std::uint64_t);
template std::vector<double> StrictObject::get<std::vector<double>>(
    const std::string&, std::vector<double>);

std::string format_sig9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("cannot write file: " + path);
  out << content;
  if (!out) throw config_error("write failed: " + path);
}

void ensure_dir(const std::string& path) {
  if (path.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw config_error("cannot create directory " + path + ": " + ec.message());
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(what + ": " + e.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json to_json(const CrabParams& p) {
  return json{{"N", p.N},
              {"T_ns", p.T},
              {"p", p.p},
              {"g0_MHz", p.g0},
              {"c_f", p.c_f},
              {"a_MHz", p.a},
              {"b_MHz", p.b},
              {"omega_GHz", p.omega}};
}

namespace {

CrabParams crab_params_from(StrictObject o) {
  CrabParams p;
  p.N = o.require<int>("N");
  p.T = o.require<double>("T_ns");
  p.p = o.require<int>("p");
  p.g0 = o.require<double>("g0_MHz");
  p.c_f = o.require<double>("c_f");
  p.a = o.require<std::vector<double>>("a_MHz");
  p.b = o.require<std::vector<double>>("b_MHz");
  p.omega = o.require<std::vector<double>>("omega_GHz");
  o.finish();
  p.validate();
  return p;
}

}  // namespace

CrabParams crab_params_from_json(const json& j) {
  return crab_params_from(StrictObject(j, "params"));
}

json to_json(const OptimizationResult& r) {
  return json{{"params", to_json(r.params)},
              {"merit", r.merit},
              {"fidelity_f", r.fidelity_f},
              {"max_amp_MHz", r.max_amp},
              {"evaluations", r.evaluations},
              {"start_index", r.start_index},
              {"converged", r.converged}};
}

OptimizationResult optimization_result_from_json(const json& j) {
  StrictObject o(j, "result");
  OptimizationResult r;
  r.params = crab_params_from(o.sub("params"));
  r.merit = o.require<double>("merit");
  r.fidelity_f = o.require<double>("fidelity_f");
  r.max_amp = o.require<double>("max_amp_MHz");
  r.evaluations = o.require<long>("evaluations");
  r.start_index = o.require<int>("start_index");
  r.converged = o.require<bool>("converged");
  o.finish();
  return r;
}

std::string waveform_csv(const PulseWaveform& w) {
  std::string out = "t_ns,gamma_MHz\n";
  for (size_t k = 0; k < w.samples.size(); ++k) {
    out += format_sig9(static_cast<double>(k) * w.dt);
    out += ',';
    out += format_sig9(w.samples[k]);
    out += '\n';
  }
  return out;
}

PulseWaveform waveform_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t_ns,gamma_MHz")
    throw config_error("waveform csv: bad header");
  std::vector<double> t, g;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw config_error("waveform csv: malformed row: " + line);
    t.push_back(std::stod(line.substr(0, comma)));
    g.push_back(std::stod(line.substr(comma + 1)));
  }
  if (t.size() < 2) throw config_error("waveform csv: need at least 2 samples");
  // Times carry 9-significant-digit rounding, so fit dt over the whole span
  // and allow slack well above that rounding but far below any real jitter.
  double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  double tol = 1e-6 * std::max(1.0, std::abs(t.back()));
  for (size_t k = 0; k < t.size(); ++k)
    if (std::abs(t[k] - (t.front() + static_cast<double>(k) * dt)) > tol)
      throw non_uniform_grid("waveform csv: non-uniform time grid");
  PulseWaveform w;
  w.dt = dt;
  w.samples = std::move(g);
  w.T = t.back();
  return w;
}

std::string trace_csv(const Trace& tr) {
  std::string out = "tau_ns,signal\n";
  for (size_t k = 0; k < tr.times.size(); ++k) {
    out += format_sig9(tr.times[k]);
    out += ',';
    out += format_sig9(tr.signal[k]);
    out += '\n';
  }
  return out;
}

std::string spectrum_csv(const Spectrum& s) {
  std::string out = "f_MHz,magnitude\n";
  for (size_t k = 0; k < s.freq_mhz.size(); ++k) {
    out += format_sig9(s.freq_mhz[k]);
    out += ',';
    out += format_sig9(s.magnitude[k]);
    out += '\n';
  }
  return out;
}

}  // namespace qcrab

#include "sdlab/io.hpp"
#include "sdlab/fields.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace sdlab {

Rat rat_from_json(const json& v) {
  if (v.is_number_integer()) return Rat((long long)v.get<long long>());
  if (v.is_string()) return Rat::parse(v.get<std::string>());
  if (v.is_number_float()) {
    // accept simple decimals exactly: scale by a power of ten
    double x = v.get<double>();
    long long den = 1;
    while (den < 1000000 && std::abs(x * den - std::round(x * den)) > 1e-9) den *= 10;
    if (std::abs(x * den - std::round(x * den)) > 1e-9)
      throw ConfigError("rational parameters must be integers or \"p/q\" strings");
    return Rat::of((long long)std::llround(x * den), den);
  }
  throw ConfigError("expected integer or \"p/q\" rational");
}

TestFunction RunConfig::test_function_from(const json& spec, int d) {
  if (!spec.is_object() || !spec.contains("family"))
    throw ConfigError("test function spec needs a \"family\"");
  std::string fam = spec.at("family").get<std::string>();
  double amp = spec.value("amplitude", 1.0);
  if (fam == "const") return tf_constant(d, spec.value("value", 1.0));
  if (fam == "sin") return tf_sin(d, spec.value("freq", 1), amp);
  if (fam == "cos") return tf_cos(d, spec.value("freq", 1), amp);
  if (fam == "gauss_bump")
    return tf_gauss_bump(d, spec.value("center", 0.5), spec.value("width", 0.1), amp);
  throw ConfigError("unknown test function family: " + fam);
}

Kernel RunConfig::kernel() const {
  if (kernel_weights.is_string()) {
    if (kernel_weights.get<std::string>() == "nearest_neighbor")
      return nearest_neighbor_kernel(d);
    throw ConfigError("unknown kernel name");
  }
  std::map<Offset, Rat> w;
  for (const auto& entry : kernel_weights) {
    if (!entry.is_array() || entry.size() != 2)
      throw ConfigError("kernel_weights entries are [offset, weight] pairs");
    Offset off;
    if (entry[0].is_array())
      for (const auto& c : entry[0]) off.push_back(c.get<int>());
    else
      off.push_back(entry[0].get<int>());
    w[off] = rat_from_json(entry[1]);
  }
  return build_kernel(d, R, w);
}

Torus RunConfig::torus(int L) const {
  Torus t(d, L);
  if (L <= 2 * R) throw ConfigError("lattice must satisfy L > 2R");
  return t;
}

RunConfig RunConfig::parse(const json& j) {
  RunConfig c;
  c.raw = j;
  try {
    const auto& m = j.at("model");
    c.model = ModelSpec(m.at("sigma").get<int>(), rat_from_json(m.at("alpha")),
                        rat_from_json(m.at("rho")));
    const auto& lat = j.at("lattice");
    c.d = lat.value("d", 1);
    c.R = lat.value("R", 1);
    if (lat.contains("L")) c.n_list = {lat.at("L").get<int>()};
    if (lat.contains("n_list"))
      for (const auto& n : lat.at("n_list")) c.n_list.push_back(n.get<int>());
    if (c.n_list.empty()) throw ConfigError("lattice needs L or n_list");
    c.kernel_weights = lat.value("kernel_weights", json("nearest_neighbor"));

    if (j.contains("field")) {
      const auto& f = j.at("field");
      c.k = f.value("k", 1);
      c.phi_spec = f.value("phi", json{{"family", "sin"}, {"freq", 1}});
      if (f.contains("psi")) c.psi_spec = f.at("psi");
    } else {
      c.phi_spec = json{{"family", "sin"}, {"freq", 1}};
    }

    if (j.contains("experiment")) {
      const auto& e = j.at("experiment");
      c.suite = e.value("suite", "");
      c.T = e.value("T", 0.1);
      c.replicas = e.value("replicas", 100);
      if (e.contains("t_list"))
        for (const auto& t : e.at("t_list")) c.t_list.push_back(t.get<double>());
      c.tolerances = e.value("tolerances", json::object());
    } else {
      c.tolerances = json::object();
    }

    c.seed = j.value("seed", 1);
    c.output_dir = j.value("output_dir", "out");
    c.workers = j.value("workers", 0);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config parse error: ") + ex.what());
  }
  if (c.replicas < 2) throw ConfigError("replicas must be >= 2");
  if (c.k < 0 || c.k > kMaxFieldOrder) throw ConfigError("field order out of range");
  for (int L : c.n_list)
    if (L <= 2 * c.R) throw ConfigError("every lattice side must satisfy L > 2R");
  return c;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("config is not valid JSON: ") + ex.what());
  }
  return parse(j);
}

json convention_metadata(const DualityTable& table) {
  const ConventionInfo& ci = table.convention;
  return json{{"model", table.spec.name()},
              {"sigma", table.spec.sigma},
              {"alpha", table.spec.alpha.str()},
              {"rho", table.spec.rho.str()},
              {"stage", ci.stage},
              {"sign_e", ci.sign_e},
              {"sign_h", ci.sign_h},
              {"e_form", ci.e_form},
              {"h_form", ci.h_form},
              {"c_measured", ci.c_measured.str()},
              {"d1_constant", ci.d1_constant.str()},
              {"printed_pair_mean", ci.printed_mean.str()}};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  out << header << "\n";
  for (const auto& r : rows) out << r << "\n";
}

void write_report(const std::string& out_dir, const RunConfig& cfg,
                  const std::vector<SuiteResult>& suites, double elapsed_seconds) {
  std::filesystem::create_directories(out_dir);
  json rep;
  rep["schema_version"] = kSchemaVersion;
  rep["config"] = cfg.raw;
  rep["seed"] = cfg.seed;
  rep["elapsed_seconds"] = elapsed_seconds;
  bool all = true;
  json js = json::array();
  for (const auto& s : suites) {
    json one = s.details;
    one["suite"] = s.name;
    one["pass"] = s.pass;
    js.push_back(one);
    all = all && s.pass;
    if (!s.data.rows.empty())
      s.data.write(out_dir + "/" + s.name + "_data.csv");
  }
  rep["suites"] = js;
  rep["pass"] = all;
  std::ofstream out(out_dir + "/report.json");
  out << rep.dump(2) << "\n";
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  CsvWriter w;
  w.header = "time,from_site,to_site";
  for (const auto& e : traj.events)
    w.rows.push_back(format_double(e.time) + "," + std::to_string(e.from) + "," +
                     std::to_string(e.to));
  w.write(path);
}

void dump_table_csv(const std::string& csv_path, const std::string& sidecar_path,
                    const DualityTable& table) {
  CsvWriter w;
  w.header = "m,n,numerator,denominator";
  for (int m = 0; m <= table.m_max; ++m)
    for (int n = 0; n <= table.n_max; ++n) {
      Rat v = table.dd(m, n);
      w.rows.push_back(std::to_string(m) + "," + std::to_string(n) + "," +
                       i128_to_string(v.num()) + "," + i128_to_string(v.den()));
    }
  w.write(csv_path);
  std::ofstream side(sidecar_path);
  side << convention_metadata(table).dump(2) << "\n";
}

}  // namespace sdlab

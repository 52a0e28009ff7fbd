#ifndef SDLAB_IO_HPP
#define SDLAB_IO_HPP

#include <string>
#include <vector>
#include <optional>
#include <json.hpp>

#include "sdlab/model.hpp"
#include "sdlab/lattice.hpp"
#include "sdlab/testfunc.hpp"
#include "sdlab/orthopoly.hpp"
#include "sdlab/dynamics.hpp"

namespace sdlab {

using json = nlohmann::json;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Batch run description parsed from the JSON configuration file.
struct RunConfig {
  ModelSpec model;
  int d = 1;
  int R = 1;
  std::vector<int> n_list;  // lattice sides; single-L runs use n_list[0]
  json kernel_weights;      // "nearest_neighbor" or [[offset...], "p/q"] pairs

  int k = 1;
  json phi_spec;  // {"family": ..., parameters}
  std::optional<json> psi_spec;

  std::string suite;
  double T = 0.1;
  long long replicas = 100;
  std::vector<double> t_list;
  json tolerances;  // se_sigmas, slope_tol, qv_rel, ...

  uint64_t seed = 1;
  std::string output_dir = "out";
  int workers = 0;  // 0: hardware default

  json raw;  // config echo

  Kernel kernel() const;
  Torus torus(int L) const;
  TestFunction phi() const { return test_function_from(phi_spec, d); }
  TestFunction psi() const {
    return psi_spec ? test_function_from(*psi_spec, d) : phi();
  }

  static TestFunction test_function_from(const json& spec, int d);
  static RunConfig parse(const json& j);
  static RunConfig parse_file(const std::string& path);

  double tol(const std::string& key, double fallback) const {
    if (tolerances.contains(key)) return tolerances.at(key).get<double>();
    return fallback;
  }
};

Rat rat_from_json(const json& v);

// ----- output records -------------------------------------------------------

inline constexpr const char* kSchemaVersion = "1";

json convention_metadata(const DualityTable& table);

// writes with enough digits to round-trip doubles bit-exactly
std::string format_double(double v);

struct CsvWriter {
  std::string header;
  std::vector<std::string> rows;
  void write(const std::string& path) const;
};

struct SuiteResult {
  std::string name;
  bool pass = true;
  json details;
  CsvWriter data;
};

void write_report(const std::string& out_dir, const RunConfig& cfg,
                  const std::vector<SuiteResult>& suites, double elapsed_seconds);

void write_trajectory_csv(const std::string& path, const Trajectory& traj);

void dump_table_csv(const std::string& csv_path, const std::string& sidecar_path,
                    const DualityTable& table);

}  // namespace sdlab

#endif

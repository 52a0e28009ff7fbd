#ifndef SDLAB_VERIFY_HPP
#define SDLAB_VERIFY_HPP

#include "sdlab/io.hpp"
#include "sdlab/stats.hpp"

namespace sdlab {

// Quantitative verification suites. Every suite is deterministic given
// (config, master seed): replica r of suite s draws from the counter stream
// keyed by (seed, tag(s) << 32 | r). Raw per-replica values go to data.csv.

SuiteResult suite_duality(const RunConfig& cfg);        // exact + Monte Carlo semigroup
SuiteResult suite_orthogonality(const RunConfig& cfg);  // gram matrix, norms, ratio
SuiteResult suite_cdc_identity(const RunConfig& cfg);   // exact carre-du-champ forms
SuiteResult suite_taylor(const RunConfig& cfg);         // kernel Taylor remainder
SuiteResult suite_drift_scaling(const RunConfig& cfg);
SuiteResult suite_qv_replacement(const RunConfig& cfg);
SuiteResult suite_martingale(const RunConfig& cfg);
SuiteResult suite_covariance(const RunConfig& cfg);
SuiteResult suite_moments(const RunConfig& cfg);        // field moment flatness in n

// dispatch by name; throws ConfigError for unknown suites
SuiteResult run_suite(const std::string& name, const RunConfig& cfg);

// the exact identity suites used by the check command
std::vector<SuiteResult> run_check_suites(const RunConfig& cfg);

}  // namespace sdlab

#endif

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace manipsim::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 1,
    kInadmissible = 2,
    kVerifyFailed = 3,
};

/// Executes one command line (without the program name), e.g.
/// {"simulate", "--model", "2", "--fig1", "--out", "runs/m2"}.
/// Every command writes manifest.json next to its outputs.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// $MANIPSIM_OUT when set, otherwise "manipsim_out".
std::string default_out_dir();

/// Lambda scenarios of the simulation figure: {-0.1, 0, 1}, or {-0.05, 0, 0.1} for Model 3.
std::vector<double> fig1_lambdas(int model);

/// Grids of the Model 3 sensitivity sweep.
inline const std::vector<double> kAnaA{0.1, 0.5, 0.9};
inline const std::vector<double> kAnaG{0.05, 0.1, 0.5};

}  // namespace manipsim::cli

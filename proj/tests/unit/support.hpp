#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "manipsim/coeffs.hpp"
#include "manipsim/params.hpp"

namespace testing {

inline manipsim::ModelParams fig1(manipsim::ModelKind kind, double lambda) {
    return manipsim::ModelParams::validate(manipsim::reference_params(kind, lambda));
}

inline manipsim::ModelParams make(manipsim::RawParams r,
                                  manipsim::AdmissibilityMode mode = manipsim::AdmissibilityMode::Enforce) {
    return manipsim::ModelParams::validate(r, mode);
}

inline double max_abs_diff(const std::vector<double>& x, const std::vector<double>& y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("manipsim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing

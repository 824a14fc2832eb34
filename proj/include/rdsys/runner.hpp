#pragma once

#include "rdsys/config_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rdsys {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitChecksFailed = 1,
    kExitUsage = 2,
    kExitUnknownStage = 3,
    kExitMissingDependency = 4,
    kExitOutputDir = 5,
    kExitModel = 6,
    kExitNumerical = 7,
};

// Failure of the pipeline itself (as opposed to a failed check), carrying its exit code.
class RunError : public Error {
public:
    RunError(const std::string& what, int code) : Error(what), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

struct RunConfig {
    std::string scenario;     // shipped scenario name
    std::string config_path;  // scenario document (JSON); exclusive with `scenario`
    std::vector<std::string> stages;
    std::string out_dir;
    std::uint64_t seed = 1;
    std::optional<std::size_t> paths;     // market paths for simulate / hedge / checks
    std::optional<int> steps;             // path time steps over [0, T]
    std::optional<int> grid_x;            // PDE nodes per axis
    std::optional<int> grid_t;            // PDE time steps
    std::optional<std::size_t> fk_paths;  // paths per node of the Feynman-Kac operator
    std::optional<int> fk_grid_x;
    std::optional<int> fk_grid_t;
    std::optional<double> beta;
    std::optional<double> tol;
    std::optional<double> rel_tol;  // cross-method and recursive-check relative tolerance
};

struct CheckRecord {
    std::string name;
    std::string stage;
    std::string identity;  // the relation being tested, in words and symbols
    double statistic = 0.0;
    double threshold = 0.0;
    bool passed = false;
    bool skipped = false;
    std::string note;
};

struct RunResult {
    int exit_code = kExitOk;
    std::vector<CheckRecord> checks;
    std::vector<std::string> artifacts;  // file names inside out_dir
    Json summary;
};

std::vector<std::string> known_stages();
std::vector<std::string> parse_stage_list(const std::string& csv);

// Runs the stages in order, writing artifacts and summary.json into out_dir. Throws RunError for
// pipeline errors (unknown stage, missing dependency, unwritable output) and lets library errors
// propagate; exit_code is kExitChecksFailed when any check failed.
RunResult run(const RunConfig& config);

// Maps an exception thrown by run() or the library to the documented exit code.
int exit_code_for(const std::exception& e);

}  // namespace rdsys

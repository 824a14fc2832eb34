#include "rdsys/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rdsys;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rdsys_unit_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int code_of(const RunConfig& cfg) {
    try {
        return run(cfg).exit_code;
    } catch (const std::exception& e) {
        return exit_code_for(e);
    }
}

}  // namespace

TEST_CASE("stage list parsing") {
    CHECK(parse_stage_list("validate, solve-pde,,check-oracle ") == std::vector<std::string>{"validate", "solve-pde", "check-oracle"});
    CHECK(parse_stage_list("").empty());
    CHECK(known_stages().size() == 14);
}

TEST_CASE("treasury bond end to end against the closed form") {
    RunConfig cfg;
    cfg.scenario = "defaultable_bond_treasury";
    cfg.stages = {"validate", "solve-pde", "check-oracle"};
    cfg.out_dir = scratch("e2e").string();
    const RunResult r = run(cfg);
    CHECK(r.exit_code == kExitOk);
    CHECK(fs::exists(fs::path(cfg.out_dir) / "value_pde.csv"));
    CHECK(fs::exists(fs::path(cfg.out_dir) / "summary.json"));
    const Json summary = Json::parse(slurp(fs::path(cfg.out_dir) / "summary.json"));
    CHECK(summary["all_passed"].get<bool>());
    for (const auto& c : summary["checks"]) CHECK_FALSE(c["identity"].get<std::string>().empty());
}

TEST_CASE("pipeline errors have distinct exit codes") {
    RunConfig cfg;
    cfg.scenario = "defaultable_bond_treasury";
    cfg.out_dir = scratch("codes").string();
    SUBCASE("hedging before a solve is a missing dependency") {
        cfg.stages = {"hedge"};
        CHECK(code_of(cfg) == kExitMissingDependency);
    }
    SUBCASE("bounds check needs a solved field") {
        cfg.stages = {"check-bounds"};
        CHECK(code_of(cfg) == kExitMissingDependency);
    }
    SUBCASE("unknown stage") {
        cfg.stages = {"solve-pde", "levitate"};
        CHECK(code_of(cfg) == kExitUnknownStage);
    }
    SUBCASE("output directory that cannot be created") {
        const fs::path blocker = scratch("blocker");
        std::ofstream(blocker) << "file";
        cfg.out_dir = (blocker / "sub").string();
        cfg.stages = {"solve-pde"};
        CHECK(code_of(cfg) == kExitOutputDir);
    }
    SUBCASE("unknown scenario is a model/config error") {
        cfg.scenario = "nope";
        cfg.stages = {"solve-pde"};
        CHECK(code_of(cfg) == kExitModel);
    }
    SUBCASE("scenario and config together are a usage error") {
        cfg.config_path = "x.json";
        cfg.stages = {"solve-pde"};
        CHECK(code_of(cfg) == kExitUsage);
    }
}

TEST_CASE("config document reproduces the named scenario run") {
    RunConfig a;
    a.scenario = "defaultable_bond_market_value";
    a.stages = {"solve-pde", "check-oracle"};
    a.out_dir = scratch("named").string();
    const RunResult ra = run(a);
    RunConfig b = a;
    b.scenario.clear();
    b.config_path = (fs::path(a.out_dir) / "scenario.json").string();
    b.out_dir = scratch("from_doc").string();
    const RunResult rb = run(b);
    CHECK(rb.exit_code == kExitOk);
    CHECK(slurp(fs::path(a.out_dir) / "value_pde.csv") == slurp(fs::path(b.out_dir) / "value_pde.csv"));
    CHECK(ra.summary["inputs_hash"] == rb.summary["inputs_hash"]);
}

TEST_CASE("same inputs and seed give byte-identical artifacts") {
    RunConfig cfg;
    cfg.scenario = "defaultable_bond_linked";
    cfg.stages = {"solve-pde", "simulate", "hedge", "check-bounds"};
    cfg.paths = 500;
    cfg.steps = 20;
    cfg.grid_x = 41;
    cfg.grid_t = 40;
    const fs::path d1 = scratch("det1"), d2 = scratch("det2");
    cfg.out_dir = d1.string();
    const RunResult r1 = run(cfg);
    cfg.out_dir = d2.string();
    const RunResult r2 = run(cfg);
    REQUIRE(r1.artifacts == r2.artifacts);
    for (const auto& name : r1.artifacts) {
        CAPTURE(name);
        CHECK(slurp(d1 / name) == slurp(d2 / name));
    }
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbdsde/config.hpp"

using namespace fbdsde;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "fbdsde_config_test";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(Config, UnknownKeysAreErrors) {
    EXPECT_THROW(parse_experiment(Json::parse(R"({"sede": 3})")), ConfigError);
    EXPECT_THROW(parse_experiment(Json::parse(R"({"grid": {"T": 1, "n": 3}})")), ConfigError);
    EXPECT_THROW(parse_experiment(Json::parse(R"({"solver": {"picard_tolerance": 1e-9}})")), ConfigError);
    EXPECT_THROW(parse_linear_system(Json::parse(R"({"builtin": "degenerate", "h1": 1})")), ConfigError);
    EXPECT_THROW(parse_linear_system(Json::parse(R"({"x0": 1, "drift": {}})")), ConfigError);
    EXPECT_THROW(parse_spde(Json::parse(R"({"sigma": 1})")), ConfigError);
    EXPECT_THROW(parse_game(Json::parse(R"({"B": 1})")), ConfigError);
}

TEST(Config, BadValuesAreErrors) {
    EXPECT_THROW(parse_solver(Json::parse(R"({"picard_tol": -1})")), ConfigError);
    EXPECT_THROW(parse_solver(Json::parse(R"({"picard_max_iters": "many"})")), ConfigError);
    EXPECT_THROW(parse_solver(Json::parse(R"({"basis": "spline"})")), ConfigError);
    EXPECT_THROW(parse_experiment(Json::parse(R"({"grid": {"T": 0, "N": 3}})")), ConfigError);
    EXPECT_THROW(parse_linear_system(Json::parse(R"({"builtin": "nope"})")), ConfigError);
    EXPECT_THROW(parse_game(Json::parse(R"({"E": 1.5})")), ConfigError);
    EXPECT_THROW(load_experiment(scratch("missing.json")), ConfigError);
}

TEST(Config, ValuesReachTheStructures) {
    const auto c = parse_experiment(Json::parse(
        R"({"seed": 9, "grid": {"T": 2, "N": 5}, "solver": {"anderson_depth": 4, "basis": "full_sigma", "features": ["tail"]}})"));
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.horizon, 2.0);
    EXPECT_EQ(c.steps, 5);
    EXPECT_EQ(c.solver.anderson_depth, 4);
    EXPECT_EQ(c.solver.basis, BasisKind::full_sigma);
    ASSERT_EQ(c.solver.features.size(), 1u);
    EXPECT_EQ(c.solver.features[0], BackwardFeature::tail);
    EXPECT_EQ(c.solver.seed, 9u);
    EXPECT_TRUE(c.model.is_null());

    const auto s = parse_linear_system(Json::parse(
        R"({"x0": 0.5, "f": {"c0": 0.1, "state": [0.1, -0.3, 0.1, 0.0], "control": 1.0}, "h1": 0.5,
            "domain": {"interval": [-1, 1]}})"));
    EXPECT_EQ(s.x0, 0.5);
    EXPECT_EQ(s.f.state[1], -0.3);
    EXPECT_EQ(s.h1, 0.5);
    EXPECT_FALSE(s.domain.contains(1.5));
    EXPECT_EQ(parse_linear_system(Json::parse(R"({"builtin": "order_system"})")).F.state[0], 0.2);
}

TEST(Config, CommentsAreAllowed) {
    const auto p = scratch("commented.json");
    std::ofstream(p) << "{\n  // horizon and steps\n  \"grid\": {\"T\": 1.5, \"N\": 2}, /* inline */ \"seed\": 4\n}\n";
    const auto c = load_experiment(p);
    EXPECT_EQ(c.horizon, 1.5);
    EXPECT_EQ(c.seed, 4u);
}

TEST(Config, ShippedConfigsParse) {
    int seen = 0;
    for (const auto& e : fs::directory_iterator(FBDSDE_SOURCE_DIR "/configs")) {
        if (e.path().extension() != ".json") continue;
        ++seen;
        EXPECT_NO_THROW(load_experiment(e.path())) << e.path();
    }
    EXPECT_GE(seen, 8);
}

TEST(Output, DoublesRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        const auto s = format_double(x);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), x) << s;
    }
    EXPECT_EQ(format_double(1.0 / 3.0), "0.33333333333333331");
}

TEST(Output, CsvIsByteIdenticalForEqualInputs) {
    Provenance prov;
    prov.seed = 5;
    prov.steps = 3;
    auto write = [&](const fs::path& p) {
        CsvWriter w(p, prov, {"k", "value", "label"});
        for (int k = 0; k < 4; ++k) w.row({k, std::sqrt(2.0) * k, "row"});
    };
    const auto a = scratch("a.csv"), b = scratch("b.csv");
    write(a);
    write(b);
    EXPECT_EQ(slurp(a), slurp(b));
    const auto text = slurp(a);
    EXPECT_EQ(text.rfind("# ", 0), 0u);
    EXPECT_NE(text.find("\"seed\":5"), std::string::npos);
    EXPECT_NE(text.find("k,value,label\n"), std::string::npos);
    EXPECT_NE(text.find("1.4142135623730951"), std::string::npos);
    CsvWriter w(scratch("c.csv"), prov, {"x"});
    EXPECT_THROW(w.row({1.0, 2.0}), DomainError);
}

TEST(Output, SummarySchema) {
    Summary s;
    s.command = "solve";
    s.provenance.seed = 3;
    s.add("residual", 1e-12, 1e-10, true);
    s.add("gap", -std::numeric_limits<double>::infinity(), 0.0, false, "no finite value");
    s.artifacts.push_back("fields.csv");
    const auto j = s.json();
    for (const char* key : {"schema_version", "command", "timestamp", "seed", "grid", "solver", "build_id", "checks",
                            "artifacts", "details", "pass"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["schema_version"], kSummarySchemaVersion);
    EXPECT_FALSE(j["pass"].get<bool>());
    EXPECT_EQ(j["checks"][1]["value"], "-inf");
    EXPECT_EQ(j["checks"][1]["note"], "no finite value");
    EXPECT_EQ(j["solver"]["seed"], 1);
    EXPECT_EQ(j["grid"]["N"], 1);
}

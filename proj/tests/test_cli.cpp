#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lepton/cli.hpp"

using namespace lepton;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lepton_test_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig from_text(const std::string& text) {
    RunConfig c;
    parse_config_text(c, text, "test.ini");
    return c;
}

std::string fixture(const std::string& name) {
    const char* dir = std::getenv("LEPTON_TEST_FIXTURES");
    return (fs::path(dir ? dir : "fixtures") / name).string();
}

} // namespace

TEST(ParseConfig, EmptyFileNeedsCommand) {
    RunConfig c = from_text("# nothing here\n\n");
    EXPECT_EQ(c.kind, "neutrino3");
    EXPECT_EQ(c.n, 32);
    try {
        validate(c);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "command");
    }
    c.output_dir = scratch("empty").string();
    EXPECT_EQ(run_command(c).exit_code, kExitConfigError);
}

TEST(ParseConfig, ZeroEpsilonRejected) {
    RunConfig c = from_text("command = residual\nepsilon = 0\n");
    c.output_dir = scratch("eps0").string();
    const CommandResult r = run_command(c);
    EXPECT_EQ(r.exit_code, kExitConfigError);
    EXPECT_EQ(r.report["failures"][0]["field"], "epsilon");
    EXPECT_EQ(r.report["status"], "config_error");
}

TEST(ParseConfig, ClosureAlphaEchoed) {
    const RunConfig c = from_text("command = residual\nm0 = 2\nm = 1\nepsilon = 0.6\n");
    const auto j = to_json(c);
    EXPECT_NEAR(j["alpha"].get<double>(), 2.0 * 1.0 * 0.6 / (2.0 * 2.0), 1e-15);
    EXPECT_EQ(j["alpha_source"], "closure");
    EXPECT_FALSE(j.contains("threads"));
}

TEST(ParseConfig, ErrorsCarryLineNumbers) {
    try {
        from_text("command = verify\nfoo = 1\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "test.ini:2");
        EXPECT_NE(std::string(e.what()).find("unknown key"), std::string::npos);
    }
    EXPECT_THROW(from_text("n = abc\n"), ConfigError);
    EXPECT_THROW(from_text("just a line\n"), ConfigError);
    EXPECT_THROW(from_text("kind = neutrino3\nsign1 = x\n"), ConfigError);
}

TEST(ParseConfig, CommentsListsAndOverrides) {
    RunConfig c = from_text("command = mms ; trailing\nresolutions = 32, 64,128\nkind = ym_scalar # note\n");
    EXPECT_EQ(c.resolutions, (std::vector<int>{32, 64, 128}));
    EXPECT_EQ(c.kind, "ym_scalar");
    set_key(c, "kind", "electron3"); // a later flag wins
    EXPECT_EQ(c.kind, "electron3");
    EXPECT_NO_THROW(validate(c));
}

TEST(Validate, PreconditionsByField) {
    auto field_of = [](const std::string& text) {
        try {
            validate(from_text(text));
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string("ok");
    };
    EXPECT_EQ(field_of("command = evolve\ndims = 2\n"), "dims");
    EXPECT_EQ(field_of("command = evolve\nn = 4\n"), "n");
    EXPECT_EQ(field_of("command = evolve\ndt = 1\n"), "dt");
    EXPECT_EQ(field_of("command = verify\nresolutions = 64,32,128\n"), "resolutions");
    EXPECT_EQ(field_of("command = verify\nresolutions = 32,64\n"), "resolutions");
    EXPECT_EQ(field_of("command = residual\nkind = all\n"), "kind");
    EXPECT_EQ(field_of("command = frobnicate\n"), "command");
    EXPECT_EQ(field_of("command = mms\ndims = 3\n"), "dims");
    EXPECT_EQ(field_of("command = gauge-check\nkind = all\n"), "ok");
}

TEST(RunCommand, ZeroFixtureResidualIsZero) {
    RunConfig c;
    parse_config_file(c, fixture("zero_fields.ini"));
    c.output_dir = scratch("zero").string();
    const CommandResult r = run_command(c);
    EXPECT_EQ(r.exit_code, kExitPass);
    EXPECT_EQ(r.report["results"]["residual"]["max_equation_norm"].get<double>(), 0.0);
    for (const auto& e : r.report["results"]["residual"]["equations"]) EXPECT_EQ(e["max_norm"].get<double>(), 0.0);
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "report.json"));
    EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "residual_fields.csv"));
}

TEST(RunCommand, EvolveWithLargeEpsilonAborts) {
    RunConfig c = from_text("command = evolve\nkind = neutrino3\nepsilon = 3\n");
    c.output_dir = scratch("eps3").string();
    const CommandResult r = run_command(c);
    EXPECT_EQ(r.exit_code, kExitRuntimeAbort);
    EXPECT_EQ(r.report["status"], "abort");
    EXPECT_EQ(r.report["failures"][0]["sites"].size(), 32u);
}

TEST(RunCommand, EvolveWritesDiagnostics) {
    RunConfig c = from_text("command = evolve\nkind = ym_scalar\nalpha = 0.7\nT = 0.25\ncadence = 4\nsnapshot_cadence = 2\n");
    c.output_dir = scratch("evolve").string();
    const CommandResult r = run_command(c);
    EXPECT_EQ(r.exit_code, kExitPass) << r.report.dump(2);
    std::ifstream f(fs::path(c.output_dir) / "diagnostics.csv");
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "t,gauss_norm,charge_re,charge_im,min_abs_det_phi,scalar_norm,dt");
    bool snapshot = false;
    for (const auto& a : r.artifacts) snapshot |= a.rfind("snapshot_", 0) == 0;
    EXPECT_TRUE(snapshot);
}

TEST(RunCommand, ReportSchema) {
    RunConfig c;
    parse_config_file(c, fixture("zero_fields.ini"));
    c.output_dir = scratch("schema").string();
    const json r = run_command(c).report;
    for (const char* key : {"schema", "tool", "command", "timestamp", "config", "results", "failures", "exit_code",
                            "status", "artifacts"})
        EXPECT_TRUE(r.contains(key)) << key;
    EXPECT_EQ(r["schema"], kReportSchema);
    EXPECT_EQ(r["config"]["command"], "residual");
    EXPECT_FALSE(strip_volatile(r).contains("timestamp"));
}

TEST(RunCommand, VerifyIsDeterministic) {
    RunConfig c = from_text("command = verify\nseed = 7\n");
    c.output_dir = scratch("verify").string();
    const CommandResult a = run_command(c);
    const CommandResult b = run_command(c);
    EXPECT_EQ(a.exit_code, kExitPass) << a.report["failures"].dump();
    EXPECT_EQ(strip_volatile(a.report).dump(), strip_volatile(b.report).dump());
    EXPECT_TRUE(a.report["failures"].empty());
}

TEST(RunCommand, FailedChecksExitOne) {
    // an unreachable order threshold turns every convergence check red
    RunConfig c = from_text("command = gauge-check\nkind = neutrino2\nmin_order = 5\nresolutions = 16,32,64\n");
    c.output_dir = scratch("fail").string();
    const CommandResult r = run_command(c);
    EXPECT_EQ(r.exit_code, kExitCheckFailure);
    EXPECT_FALSE(r.report["failures"].empty());
    EXPECT_EQ(r.report["status"], "fail");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "twpac/config.hpp"
#include "twpac/device.hpp"
#include "twpac/errors.hpp"
#include "twpac/output.hpp"

namespace fs = std::filesystem;
using namespace twpac;
using namespace twpac::cli;

namespace {

const fs::path kSource = TWPAC_SOURCE_DIR;
const std::string kCli = TWPAC_CLI_PATH;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("twpac_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = "'" + kCli + "' " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const std::string kToml = R"(critical_current_uA = 5.0
junction_capacitance_fF = 240.5
supercell_count = 40
bias_uA = 1.5
[rpm]
L_pH = 230.0
C_fF = 557.0
spacing = 6
[loading]
Zm_ohm = 47.0
delta_c = 0.1
delta_c2 = 0.12
supercell_cells = 66
)";

std::vector<double> second_row(const std::string& csv) {
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    std::getline(ss, line);
    std::vector<double> v;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) v.push_back(std::stod(c));
    return v;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto k = s.find(from);
    REQUIRE(k != std::string::npos);
    return s.replace(k, from.size(), to);
}

void check_config_error(const std::string& text, const std::string& needle) {
    try {
        (void)parse_device(text, true);
        FAIL("expected a config error mentioning " << needle);
    } catch (const ConfigError& e) {
        CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
}

}  // namespace

TEST_CASE("shipped reference config") {
    const auto d = load_device(kSource / "configs" / "reference_device.toml");
    CHECK(d.total_cells() == 2640);
    const auto r = device::reference_device();
    CHECK(d.junction.critical_current == doctest::Approx(r.junction.critical_current).epsilon(1e-14));
    CHECK(d.junction.junction_capacitance == doctest::Approx(r.junction.junction_capacitance).epsilon(1e-14));
    CHECK(d.rpm.inductance == doctest::Approx(r.rpm.inductance).epsilon(1e-14));
    CHECK(d.rpm.capacitance == doctest::Approx(r.rpm.capacitance).epsilon(1e-14));
    CHECK(d.rpm.spacing == 6);
    CHECK(d.loading == r.loading);
    CHECK(d.loss_tangent == doctest::Approx(4e-4));
    CHECK(d.bias.dc_current == doctest::Approx(1.5e-6));
    CHECK(d.design_frequency == doctest::Approx(r.design_frequency));

    const auto j = load_device(kSource / "configs" / "reference_device.json");
    CHECK(j == d);
}

TEST_CASE("emit then load reproduces the device") {
    const fs::path dir = scratch("roundtrip");
    auto variants = std::vector<device::DeviceSpec>{device::reference_device()};
    auto v = device::reference_device();
    v.junction.critical_current = 4.321e-6;
    v.bias.dc_current = -0.7e-6;
    v.loss_tangent = 1.234567e-5;
    v.rpm_enabled = false;
    v.rpm.offset = 3;
    v.loading.fundamental_depth = -0.2;
    v.design_frequency = 2.0 * 3.141592653589793 * 6.123e9;
    variants.push_back(v);
    for (const auto& spec : variants) {
        CHECK(parse_device(device_to_toml(spec), true) == spec);
        CHECK(parse_device(device_to_json(spec), false) == spec);
        emit_device(spec, dir / "d.toml");
        emit_device(spec, dir / "d.json");
        CHECK(load_device(dir / "d.toml") == spec);
        CHECK(load_device(dir / "d.json") == spec);
    }
}

TEST_CASE("schema errors name the key") {
    CHECK_NOTHROW((void)parse_device(kToml, true));
    check_config_error(replace(kToml, "critical_current_uA = 5.0\n", ""), "critical_current_uA");
    check_config_error(kToml + "colour = 3\n", "colour");
    check_config_error(replace(kToml, "spacing = 6", "spacing = 6\nQ = 4"), "rpm.Q");
    check_config_error(replace(kToml, "delta_c2 = 0.12", "delta_c2 = 0.95"), "delta_c");
    check_config_error(replace(kToml, "supercell_count = 40", "supercell_count = 4.5"), "supercell_count");
    check_config_error(replace(kToml, "bias_uA = 1.5", "bias_uA = \"high\""), "bias_uA");
    check_config_error(replace(kToml, "bias_uA = 1.5", "bias_uA = 6.0"), "bias_uA");
    check_config_error(replace(kToml, "spacing = 6", "spacing = 7"), "rpm.spacing");
    check_config_error(replace(kToml, "[loading]\n", "[loadin]\n"), "loadin");
    check_config_error("critical_current_uA = = 3", "TOML");
    CHECK_THROWS_AS((void)parse_device("{\"critical_current_uA\": }", false), ConfigError);
    CHECK_THROWS_AS((void)load_device("/nonexistent/device.toml"), ConfigError);

    const auto no_rpm = parse_device(replace(kToml, "[rpm]\nL_pH = 230.0\nC_fF = 557.0\nspacing = 6\n", ""), true);
    CHECK_FALSE(no_rpm.rpm_enabled);
}

TEST_CASE("CSV output") {
    const fs::path dir = scratch("csv");
    Table t{{"freq_GHz", "value"}, {{1.0, 1.0 / 3.0}, {2.5, 123456789012.0}}};
    emit_csv(t, dir / "t.csv");
    CHECK(slurp(dir / "t.csv") == "freq_GHz,value\n1,0.333333333\n2.5,1.23456789e+11\n");

    Table empty{{"freq_GHz"}, {}};
    CHECK_THROWS_AS(emit_csv(empty, dir / "e.csv"), ConfigError);
    CHECK_FALSE(fs::exists(dir / "e.csv"));
    Table ragged{{"a", "b"}, {{1.0}}};
    CHECK_THROWS_AS((void)format_csv(ragged), ConfigError);
    CHECK_THROWS_AS(emit_csv(t, dir / "missing" / "t.csv"), ConfigError);
}

TEST_CASE("SVG output") {
    Panel p;
    p.title = "gain";
    p.traces.push_back({"forward", {1, 2, 3}, {0, 10, 5}, ""});
    p.traces.push_back({"backward", {1, 2, 3}, {0, -10, -5}, ""});
    const std::string s = format_svg({p});
    CHECK(s.rfind("<svg", 0) == 0);
    std::size_t lines = 0;
    for (auto k = s.find("<polyline"); k != std::string::npos; k = s.find("<polyline", k + 1)) ++lines;
    CHECK(lines == 2);
    CHECK(s.find("frequency (GHz)") != std::string::npos);
    CHECK(s.find(">dB<") != std::string::npos);
    CHECK(s.find("forward") != std::string::npos);
    CHECK(s.find("backward") != std::string::npos);
    CHECK_THROWS_AS(emit_svg({}, scratch("svg") / "x.svg"), ConfigError);
}

TEST_CASE("manifest round trip and output directory") {
    const fs::path dir = scratch("manifest");
    RunManifest m{"dev.toml", "cme-sweep", {{"--fmin", "6"}, {"--no-4wm", "true"}}, dir.string(), 17, version()};
    write_manifest(m, dir / "manifest.json");
    const auto r = read_manifest(dir / "manifest.json");
    CHECK(r.device_config == m.device_config);
    CHECK(r.subcommand == m.subcommand);
    CHECK(r.parameters == m.parameters);
    CHECK(r.seed == 17);
    CHECK(r.version == version());
    CHECK_THROWS_AS((void)read_manifest(dir / "none.json"), ConfigError);

    CHECK(output_directory("explicit") == fs::path("explicit"));
    ::setenv("TWPAC_OUTPUT_DIR", "/tmp/from_env", 1);
    CHECK(output_directory("") == fs::path("/tmp/from_env"));
    ::unsetenv("TWPAC_OUTPUT_DIR");
    CHECK(output_directory("") == fs::current_path());
}

TEST_CASE("command line: outputs, exit codes and determinism") {
    const std::string dev = "--device '" + (kSource / "configs" / "reference_device.toml").string() + "'";
    const fs::path dir = scratch("run");

    SUBCASE("dispersion") {
        REQUIRE(run_cli("dispersion " + dev + " --fmax 8 --out-dir '" + (dir / "d").string() + "' --svg") == 0);
        const std::string csv = slurp(dir / "d" / "dispersion.csv");
        const std::string header = csv.substr(0, csv.find('\n'));
        CHECK(header == "freq_GHz,s21_db,s21_phase_rad,k_rad_per_cell,kstar_rad_per_cell,re_Z_ohm,im_Z_ohm,alpha_np_per_cell");
        CHECK(fs::exists(dir / "d" / "dispersion.svg"));
        CHECK(fs::exists(dir / "d" / "manifest.json"));
        CHECK(read_manifest(dir / "d" / "manifest.json").subcommand == "dispersion");
    }

    SUBCASE("cme sweep is independent of the worker count and reproducible from its manifest") {
        const std::string common = "cme-sweep " + dev + " --no-4wm --fmin 6 --fmax 8 --step 0.25 ";
        REQUIRE(run_cli(common + "--workers 1 --out-dir '" + (dir / "w1").string() + "'") == 0);
        REQUIRE(run_cli(common + "--workers 3 --out-dir '" + (dir / "w3").string() + "' --svg") == 0);
        const std::string a = slurp(dir / "w1" / "cme_forward.csv");
        CHECK_FALSE(a.empty());
        CHECK(a == slurp(dir / "w3" / "cme_forward.csv"));
        CHECK(slurp(dir / "w1" / "cme_backward.csv") == slurp(dir / "w3" / "cme_backward.csv"));
        CHECK(a.substr(0, a.find('\n')).rfind("freq_GHz,gain_db,P_a_dbm", 0) == 0);
        CHECK(fs::exists(dir / "w3" / "cme_sweep.svg"));

        REQUIRE(run_cli("rerun '" + (dir / "w3" / "manifest.json").string() + "' --out-dir '" + (dir / "re").string() + "'") == 0);
        CHECK(slurp(dir / "re" / "cme_forward.csv") == slurp(dir / "w3" / "cme_forward.csv"));
        CHECK(slurp(dir / "re" / "cme_backward.csv") == slurp(dir / "w3" / "cme_backward.csv"));
    }

    SUBCASE("noise fit with a seeded generator") {
        REQUIRE(run_cli("noise-fit --synthetic --seed 5 --out-dir '" + (dir / "n1").string() + "'") == 0);
        REQUIRE(run_cli("noise-fit --synthetic --seed 5 --out-dir '" + (dir / "n2").string() + "'") == 0);
        CHECK(slurp(dir / "n1" / "noise_fit.csv") == slurp(dir / "n2" / "noise_fit.csv"));
        CHECK(read_manifest(dir / "n1" / "manifest.json").seed == 5);
        // Fitting the emitted data file (9 significant digits) gives the same parameters.
        REQUIRE(run_cli("noise-fit --input '" + (dir / "n1" / "noise_input.csv").string() + "' --out-dir '" +
                        (dir / "n3").string() + "'") == 0);
        const auto a = second_row(slurp(dir / "n1" / "noise_fit.csv"));
        const auto b = second_row(slurp(dir / "n3" / "noise_fit.csv"));
        REQUIRE(a.size() == 8);
        REQUIRE(b.size() == 8);
        CHECK(b[2] == doctest::Approx(a[2]).epsilon(1e-7));
        CHECK(b[3] == doctest::Approx(a[3]).epsilon(1e-7));
        CHECK(std::abs(a[2] - 1.7) < 0.1);
        CHECK(fs::exists(dir / "n1" / "noise_overlay.csv"));
    }

    SUBCASE("transient sweep on a reduced line") {
        REQUIRE(run_cli("transient-sweep " + dev + " --cells-override 330 --pa-off --fc-off --fmin 7 --fmax 7 --out-dir '" +
                        (dir / "t").string() + "'") == 0);
        const std::string csv = slurp(dir / "t" / "transient_sweep.csv");
        CHECK(csv.rfind("freq_GHz,s21_fwd_db,s21_bwd_db\n7,", 0) == 0);
    }

    SUBCASE("exit codes") {
        CHECK(run_cli("--help") == 0);
        CHECK(run_cli("phase-match --help") == 0);
        CHECK(run_cli("") == 2);
        CHECK(run_cli("dispersion") == 2);
        CHECK(run_cli("dispersion --device /nonexistent.toml") == 2);
        CHECK(run_cli("dispersion " + dev + " --no-such-flag") == 2);
        CHECK(run_cli("dispersion " + dev + " --bias-ua 7") == 2);
        CHECK(run_cli("transient-sweep " + dev + " --cells-override 100") == 2);
        CHECK(run_cli("noise-fit --out-dir '" + (dir / "x").string() + "'") == 2);
        CHECK(run_cli("phase-match " + dev + " --process pa --target-ghz 1 --scan-min-ghz 20 --scan-max-ghz 21 --out-dir '" +
                      (dir / "p").string() + "'") == 3);
        CHECK(run_cli("phase-match " + dev + " --process pa --target-ghz 1 --out-dir '" + (dir / "p").string() + "'") == 0);
    }
}

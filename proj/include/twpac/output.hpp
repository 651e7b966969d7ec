#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace twpac::cli {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Header row plus rows at 9 significant digits. Throws on empty tables; no file is created.
void emit_csv(const Table& table, const std::filesystem::path& path);
[[nodiscard]] std::string format_csv(const Table& table);

struct Trace {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
};

struct Panel {
    std::string title;
    std::string x_label = "frequency (GHz)";
    std::string y_label = "dB";
    std::vector<Trace> traces;
};

/// Stacked line plots with labeled axes.
void emit_svg(const std::vector<Panel>& panels, const std::filesystem::path& path);
[[nodiscard]] std::string format_svg(const std::vector<Panel>& panels);

struct RunManifest {
    std::string device_config;
    std::string subcommand;
    std::map<std::string, std::string> parameters;
    std::string output_directory;
    unsigned long long seed = 0;
    std::string version;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
[[nodiscard]] RunManifest read_manifest(const std::filesystem::path& path);

/// Toolkit version string.
[[nodiscard]] std::string version();

/// Output directory: explicit flag, else $TWPAC_OUTPUT_DIR, else the working directory.
[[nodiscard]] std::filesystem::path output_directory(const std::string& flag);

}  // namespace twpac::cli

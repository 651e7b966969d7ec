#include "twpac/output.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "twpac/errors.hpp"
#include "json.hpp"

namespace twpac::cli {

std::string format_csv(const Table& t) {
    if (t.rows.empty() || t.header.empty()) throw ConfigError("refusing to write an empty table");
    std::string s;
    for (std::size_t k = 0; k < t.header.size(); ++k) {
        if (k) s += ',';
        s += t.header[k];
    }
    s += '\n';
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) throw ConfigError("row width does not match the header");
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) s += ',';
            s += fmt::format("{:.9g}", row[k]);
        }
        s += '\n';
    }
    return s;
}

void emit_csv(const Table& table, const std::filesystem::path& path) {
    const std::string text = format_csv(table);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

namespace {

constexpr double kWidth = 720.0;
constexpr double kPanelHeight = 260.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 45.0;

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '&': o += "&amp;"; break;
            default: o += c;
        }
    }
    return o;
}

/// Tick step of 1, 2 or 5 times a power of ten giving about five ticks.
double tick_step(double span) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / 5.0;
    const double p = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * p >= raw) return m * p;
    return 10.0 * p;
}

}  // namespace

std::string format_svg(const std::vector<Panel>& panels) {
    static const char* palette[] = {"#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555"};
    const double height = kPanelHeight * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, height);
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels[p];
        const double y0 = kPanelHeight * static_cast<double>(p);
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
        for (const auto& t : panel.traces) {
            for (std::size_t k = 0; k < t.x.size() && k < t.y.size(); ++k) {
                if (!std::isfinite(t.x[k]) || !std::isfinite(t.y[k])) continue;
                xmin = std::min(xmin, t.x[k]);
                xmax = std::max(xmax, t.x[k]);
                ymin = std::min(ymin, t.y[k]);
                ymax = std::max(ymax, t.y[k]);
            }
        }
        if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
        if (xmax == xmin) xmax = xmin + 1.0;
        if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }
        const double pw = kWidth - kLeft - kRight;
        const double ph = kPanelHeight - kTop - kBottom;
        auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
        auto sy = [&](double y) { return y0 + kTop + (ymax - y) / (ymax - ymin) * ph; };

        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"13\">{}</text>\n", kLeft, y0 + 18.0,
                         esc(panel.title));
        s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                         kLeft, y0 + kTop, pw, ph);
        const double dx = tick_step(xmax - xmin);
        for (double x = std::ceil(xmin / dx) * dx; x <= xmax + 1e-12 * dx; x += dx) {
            s += fmt::format("<line x1=\"{0:.1f}\" x2=\"{0:.1f}\" y1=\"{1:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>"
                             "<text x=\"{0:.1f}\" y=\"{3:.1f}\" text-anchor=\"middle\">{4:g}</text>\n",
                             sx(x), y0 + kTop, y0 + kTop + ph, y0 + kTop + ph + 14.0, x);
        }
        const double dy = tick_step(ymax - ymin);
        for (double y = std::ceil(ymin / dy) * dy; y <= ymax + 1e-12 * dy; y += dy) {
            s += fmt::format("<line x1=\"{0:.1f}\" x2=\"{1:.1f}\" y1=\"{2:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>"
                             "<text x=\"{3:.1f}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:g}</text>\n",
                             kLeft, kLeft + pw, sy(y), kLeft - 4.0, sy(y) + 4.0, y);
        }
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + 0.5 * pw,
                         y0 + kPanelHeight - 8.0, esc(panel.x_label));
        s += fmt::format("<text transform=\"translate(16,{:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                         y0 + kTop + 0.5 * ph, esc(panel.y_label));
        for (std::size_t k = 0; k < panel.traces.size(); ++k) {
            const auto& t = panel.traces[k];
            const std::string color = t.color.empty() ? palette[k % 6] : t.color;
            std::string pts;
            for (std::size_t i = 0; i < t.x.size() && i < t.y.size(); ++i) {
                if (!std::isfinite(t.x[i]) || !std::isfinite(t.y[i])) continue;
                pts += fmt::format("{:.2f},{:.2f} ", sx(t.x[i]), sy(t.y[i]));
            }
            s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.3\" points=\"{}\"/>\n", color, pts);
            s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\" text-anchor=\"end\">{}</text>\n",
                             kLeft + pw - 6.0, y0 + kTop + 14.0 + 13.0 * static_cast<double>(k), color, esc(t.label));
        }
    }
    s += "</svg>\n";
    return s;
}

void emit_svg(const std::vector<Panel>& panels, const std::filesystem::path& path) {
    if (panels.empty()) throw ConfigError("refusing to write an empty plot");
    const std::string text = format_svg(panels);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["device_config"] = m.device_config;
    j["subcommand"] = m.subcommand;
    j["parameters"] = m.parameters;
    j["output_directory"] = m.output_directory;
    j["seed"] = m.seed;
    j["version"] = m.version;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest parse error: ") + e.what());
    }
    RunManifest m;
    m.device_config = j.value("device_config", "");
    m.subcommand = j.value("subcommand", "");
    m.parameters = j.value("parameters", std::map<std::string, std::string>{});
    m.output_directory = j.value("output_directory", "");
    m.seed = j.value("seed", 0ULL);
    m.version = j.value("version", "");
    return m;
}

std::string version() { return "0.1.0"; }

std::filesystem::path output_directory(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("TWPAC_OUTPUT_DIR"); env && *env) return env;
    return std::filesystem::current_path();
}

}  // namespace twpac::cli

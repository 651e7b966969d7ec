#include "twpac/config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "twpac/constants.hpp"
#include "twpac/errors.hpp"
#define TOML_EXCEPTIONS 1
#include "toml.hpp"
#include "json.hpp"

namespace twpac::cli {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& n) {
    if (const auto* t = n.as_table()) {
        json j = json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (const auto* a = n.as_array()) {
        json j = json::array();
        for (const auto& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (const auto* v = n.as_integer()) return json(static_cast<std::int64_t>(v->get()));
    if (const auto* v = n.as_floating_point()) return json(v->get());
    if (const auto* v = n.as_boolean()) return json(v->get());
    if (const auto* v = n.as_string()) return json(v->get());
    throw ConfigError("unsupported TOML value type");
}

class Reader {
public:
    Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw ConfigError("'" + name("") + "' must be a table");
    }

    void allow(std::initializer_list<const char*> keys) {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : j_.items()) {
            if (!ok.count(k)) throw ConfigError("unknown key '" + name(k) + "'");
        }
    }
    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

    [[nodiscard]] double number(const char* key) const {
        if (!j_.contains(key)) throw ConfigError("missing required key '" + name(key) + "'");
        return number_value(key);
    }
    [[nodiscard]] double number(const char* key, double fallback) const {
        return j_.contains(key) ? number_value(key) : fallback;
    }
    [[nodiscard]] int integer(const char* key) const {
        if (!j_.contains(key)) throw ConfigError("missing required key '" + name(key) + "'");
        return integer_value(key);
    }
    [[nodiscard]] int integer(const char* key, int fallback) const {
        return j_.contains(key) ? integer_value(key) : fallback;
    }
    [[nodiscard]] bool boolean(const char* key, bool fallback) const {
        if (!j_.contains(key)) return fallback;
        if (!j_.at(key).is_boolean()) throw ConfigError("'" + name(key) + "' must be a boolean");
        return j_.at(key).get<bool>();
    }
    [[nodiscard]] Reader sub(const char* key) const {
        if (!j_.contains(key)) throw ConfigError("missing required table '" + name(key) + "'");
        return Reader(j_.at(key), name(key));
    }

private:
    [[nodiscard]] std::string name(const std::string& k) const {
        return prefix_.empty() ? k : (k.empty() ? prefix_ : prefix_ + "." + k);
    }
    [[nodiscard]] double number_value(const char* key) const {
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError("'" + name(key) + "' must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError("'" + name(key) + "' must be finite");
        return x;
    }
    [[nodiscard]] int integer_value(const char* key) const {
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError("'" + name(key) + "' must be an integer");
        return v.get<int>();
    }

    const json& j_;
    std::string prefix_;
};

device::DeviceSpec from_json(const json& root) {
    using namespace units;
    Reader r(root, "");
    r.allow({"critical_current_uA", "junction_capacitance_fF", "rpm", "loading", "supercell_count",
             "loss_tangent", "environment_impedance_ohm", "bias_uA", "design"});
    device::DeviceSpec d;
    d.junction.critical_current = r.number("critical_current_uA") * uA;
    d.junction.junction_capacitance = r.number("junction_capacitance_fF") * fF;
    if (r.has("rpm")) {
        Reader p = r.sub("rpm");
        p.allow({"L_pH", "C_fF", "spacing", "offset", "enabled"});
        d.rpm.inductance = p.number("L_pH") * pH;
        d.rpm.capacitance = p.number("C_fF") * fF;
        d.rpm.spacing = p.integer("spacing");
        d.rpm.offset = p.integer("offset", 0);
        d.rpm_enabled = p.boolean("enabled", true);
    } else {
        d.rpm_enabled = false;
    }
    Reader l = r.sub("loading");
    l.allow({"Zm_ohm", "delta_c", "delta_c2", "supercell_cells"});
    d.loading.mean_impedance = l.number("Zm_ohm");
    d.loading.fundamental_depth = l.number("delta_c");
    d.loading.second_harmonic_depth = l.number("delta_c2");
    d.loading.supercell_length = l.integer("supercell_cells");
    d.supercell_count = r.integer("supercell_count");
    d.loss_tangent = r.number("loss_tangent", 0.0);
    d.environment_impedance = r.number("environment_impedance_ohm", 50.0);
    d.bias.dc_current = r.number("bias_uA", 0.0) * uA;
    d.design_bias = d.bias;
    d.design_frequency = 0.0;
    if (r.has("design")) {
        Reader g = r.sub("design");
        g.allow({"bias_uA", "frequency_GHz"});
        d.design_bias.dc_current = g.number("bias_uA", r.number("bias_uA", 0.0)) * uA;
        d.design_frequency = constants::two_pi * g.number("frequency_GHz", 0.0) * GHz;
    }
    d.validate();
    return d;
}

/// Decimal value v with v * scale == x exactly, so that loading reproduces x bit for bit.
double to_unit(double x, double scale) {
    double v = x / scale;
    if (v * scale == x) return v;
    double up = v;
    double dn = v;
    for (int k = 0; k < 8; ++k) {
        up = std::nextafter(up, INFINITY);
        dn = std::nextafter(dn, -INFINITY);
        if (up * scale == x) return up;
        if (dn * scale == x) return dn;
    }
    return v;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

/// TOML needs a decimal point or exponent to keep a float a float.
std::string toml_float(double v) {
    std::string s = num(v);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace

device::DeviceSpec parse_device(const std::string& text, bool as_toml) {
    json root;
    if (as_toml) {
        try {
            const toml::table t = toml::parse(text);
            root = toml_to_json(t);
        } catch (const toml::parse_error& e) {
            throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
        }
    } else {
        try {
            root = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("JSON parse error: ") + e.what());
        }
    }
    return from_json(root);
}

device::DeviceSpec load_device(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open device config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_device(ss.str(), path.extension() != ".json");
}

std::string device_to_toml(const device::DeviceSpec& d) {
    using namespace units;
    std::string s;
    s += "critical_current_uA = " + toml_float(to_unit(d.junction.critical_current, uA)) + "\n";
    s += "junction_capacitance_fF = " + toml_float(to_unit(d.junction.junction_capacitance, fF)) + "\n";
    s += "supercell_count = " + std::to_string(d.supercell_count) + "\n";
    s += "loss_tangent = " + toml_float(d.loss_tangent) + "\n";
    s += "environment_impedance_ohm = " + toml_float(d.environment_impedance) + "\n";
    s += "bias_uA = " + toml_float(to_unit(d.bias.dc_current, uA)) + "\n";
    s += "\n[rpm]\n";
    s += "L_pH = " + toml_float(to_unit(d.rpm.inductance, pH)) + "\n";
    s += "C_fF = " + toml_float(to_unit(d.rpm.capacitance, fF)) + "\n";
    s += "spacing = " + std::to_string(d.rpm.spacing) + "\n";
    s += "offset = " + std::to_string(d.rpm.offset) + "\n";
    s += std::string("enabled = ") + (d.rpm_enabled ? "true" : "false") + "\n";
    s += "\n[loading]\n";
    s += "Zm_ohm = " + toml_float(d.loading.mean_impedance) + "\n";
    s += "delta_c = " + toml_float(d.loading.fundamental_depth) + "\n";
    s += "delta_c2 = " + toml_float(d.loading.second_harmonic_depth) + "\n";
    s += "supercell_cells = " + std::to_string(d.loading.supercell_length) + "\n";
    s += "\n[design]\n";
    s += "bias_uA = " + toml_float(to_unit(d.design_bias.dc_current, uA)) + "\n";
    s += "frequency_GHz = " + toml_float(to_unit(d.design_frequency, constants::two_pi * GHz)) + "\n";
    return s;
}

std::string device_to_json(const device::DeviceSpec& d) {
    using namespace units;
    json j;
    j["critical_current_uA"] = to_unit(d.junction.critical_current, uA);
    j["junction_capacitance_fF"] = to_unit(d.junction.junction_capacitance, fF);
    j["supercell_count"] = d.supercell_count;
    j["loss_tangent"] = d.loss_tangent;
    j["environment_impedance_ohm"] = d.environment_impedance;
    j["bias_uA"] = to_unit(d.bias.dc_current, uA);
    j["rpm"] = {{"L_pH", to_unit(d.rpm.inductance, pH)},
                {"C_fF", to_unit(d.rpm.capacitance, fF)},
                {"spacing", d.rpm.spacing},
                {"offset", d.rpm.offset},
                {"enabled", d.rpm_enabled}};
    j["loading"] = {{"Zm_ohm", d.loading.mean_impedance},
                    {"delta_c", d.loading.fundamental_depth},
                    {"delta_c2", d.loading.second_harmonic_depth},
                    {"supercell_cells", d.loading.supercell_length}};
    j["design"] = {{"bias_uA", to_unit(d.design_bias.dc_current, uA)},
                   {"frequency_GHz", to_unit(d.design_frequency, constants::two_pi * GHz)}};
    return j.dump(2) + "\n";
}

void emit_device(const device::DeviceSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << (path.extension() == ".json" ? device_to_json(spec) : device_to_toml(spec));
}

}  // namespace twpac::cli

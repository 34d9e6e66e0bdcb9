#include "config.hpp"

#include "pderm/dgp.hpp"
#include "pderm/experiments.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pderm::cli {

namespace {

enum class Type { text, real, integer, flag, reals, integers };

const std::map<std::string, std::map<std::string, Type>>& schema() {
    static const std::map<std::string, std::map<std::string, Type>> s{
        {"dgp",
         {{"preset", Type::text},
          {"rho", Type::real},
          {"mu_h", Type::real},
          {"sigma_h", Type::real},
          {"sigma_y", Type::real},
          {"r_m", Type::integer},
          {"burn_in", Type::integer},
          {"t_total", Type::integer}}},
        {"rule",
         {{"k", Type::integer},
          {"alpha0_lo", Type::real},
          {"alpha0_hi", Type::real},
          {"alpha1_lo", Type::real},
          {"alpha1_hi", Type::real},
          {"beta1_hi", Type::real},
          {"breakpoints", Type::reals},
          {"pilot_length", Type::integer},
          {"alpha0", Type::reals},
          {"alpha1", Type::reals},
          {"beta1", Type::reals}}},
        {"erm",
         {{"loss", Type::text},
          {"t", Type::integer},
          {"starts", Type::integer},
          {"grid_points", Type::integer},
          {"grid_seeds", Type::integer},
          {"n_mc", Type::integer},
          {"gamma", Type::real},
          {"seed", Type::integer},
          {"mc_draws", Type::integer},
          {"fine_grid_points", Type::integer},
          {"ref_starts", Type::integer}}},
        {"study",
         {{"kind", Type::text},
          {"t_grid", Type::integers},
          {"replications", Type::integer},
          {"smoke", Type::flag},
          {"grid_points", Type::integer},
          {"lags", Type::integer},
          {"theta_grid_points", Type::integer}}},
        {"output", {{"dir", Type::text}}},
    };
    return s;
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

double parse_real(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto t = trim(s);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(what + ": '" + s + "' is not a finite number");
    return v;
}

std::uint64_t parse_integer(const std::string& s, const std::string& what) {
    std::uint64_t v = 0;
    const auto t = trim(s);
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || t.empty())
        throw ConfigError(what + ": '" + s + "' is not a nonnegative integer");
    return v;
}

std::string canonical(Type type, const std::string& raw, const std::string& what) {
    switch (type) {
        case Type::text: {
            const auto t = trim(raw);
            if (t.empty()) throw ConfigError(what + ": empty value");
            return t;
        }
        case Type::real: return format_double(parse_real(raw, what));
        case Type::integer: return std::to_string(parse_integer(raw, what));
        case Type::flag: {
            const auto t = trim(raw);
            if (t == "true" || t == "1") return "true";
            if (t == "false" || t == "0") return "false";
            throw ConfigError(what + ": '" + raw + "' is not true/false");
        }
        case Type::reals: {
            std::string out;
            for (const auto& item : split_list(raw)) {
                if (!out.empty()) out += ",";
                out += format_double(parse_real(item, what));
            }
            return out;
        }
        case Type::integers: {
            std::string out;
            for (const auto& item : split_list(raw)) {
                if (!out.empty()) out += ",";
                out += std::to_string(parse_integer(item, what));
            }
            return out;
        }
    }
    return raw;
}

void set_default(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value) {
    auto& sec = cfg.sections[section];
    if (!sec.contains(key)) sec[key] = canonical(schema().at(section).at(key), value, where(section, key));
}

void require(const RunConfig& cfg, const std::string& section, const std::string& key) {
    if (!cfg.has(section, key)) throw ConfigError("missing required key " + where(section, key));
}

bool is_application(const std::string& kind) { return kind != "rate"; }

}  // namespace

// ---------------------------------------------------------------------------

std::string format_double(double x) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    const auto it = sections.find(section);
    return it != sections.end() && it->second.contains(key);
}

const std::string& RunConfig::text(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError("missing required key " + where(section, key));
    return sections.at(section).at(key);
}

double RunConfig::real(const std::string& section, const std::string& key) const {
    return parse_real(text(section, key), where(section, key));
}

std::uint64_t RunConfig::u64(const std::string& section, const std::string& key) const {
    return parse_integer(text(section, key), where(section, key));
}

std::size_t RunConfig::size(const std::string& section, const std::string& key) const {
    return static_cast<std::size_t>(u64(section, key));
}

bool RunConfig::flag(const std::string& section, const std::string& key) const {
    return text(section, key) == "true";
}

std::vector<double> RunConfig::reals(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(text(section, key))) out.push_back(parse_real(item, where(section, key)));
    return out;
}

std::vector<std::size_t> RunConfig::sizes(const std::string& section, const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(text(section, key)))
        out.push_back(static_cast<std::size_t>(parse_integer(item, where(section, key))));
    return out;
}

std::string RunConfig::to_ini() const {
    std::string out;
    // fixed section order, keys sorted within a section
    for (const auto& name : {"dgp", "rule", "erm", "study", "output"}) {
        const auto it = sections.find(name);
        if (it == sections.end()) continue;
        if (!out.empty()) out += "\n";
        out += "[" + std::string(name) + "]\n";
        for (const auto& [k, v] : it->second) out += k + " = " + v + "\n";
    }
    return out;
}

RunConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config syntax: " + e.message() + " at line " + std::to_string(e.line()));
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("key '" + section + "' appears outside a section");
        const auto sit = schema().find(section);
        if (sit == schema().end()) throw ConfigError("unknown section [" + section + "]");
        auto& sec = cfg.sections[section];
        for (const auto& [key, node] : body) {
            const auto kit = sit->second.find(key);
            if (kit == sit->second.end()) throw ConfigError("unknown key " + where(section, key));
            sec[key] = canonical(kit->second, node.data(), where(section, key));
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + file.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"simulate", "check", "fit", "evaluate", "study", "diagnose"};
    return c;
}

RunConfig resolve(RunConfig cfg, const std::string& command, const Overrides& overrides) {
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
        throw ConfigError("unknown command '" + command + "'");
    if (overrides.seed) cfg.sections["erm"]["seed"] = std::to_string(*overrides.seed);
    if (overrides.out) cfg.sections["output"]["dir"] = canonical(Type::text, *overrides.out, "--out");

    // study kind decides where application defaults come from
    set_default(cfg, "study", "kind", "rate");
    const std::string kind = cfg.text("study", "kind");
    std::optional<ApplicationConfig> app;
    if (is_application(kind)) {
        try {
            app = default_application_config(parse_application_kind(kind));
        } catch (const std::invalid_argument&) {
            throw ConfigError("unknown study kind '" + kind + "' (expected rate, ar1_kalman, sv_qmle or rv_latent)");
        }
    }
    const bool app_run = command == "study" && app.has_value();

    if (app_run) {
        const auto expected = application_preset(app->kind);
        set_default(cfg, "dgp", "preset", expected);
        if (cfg.text("dgp", "preset") != expected)
            throw ConfigError("study kind " + kind + " runs on preset " + expected + ", not " +
                              cfg.text("dgp", "preset"));
        set_default(cfg, "erm", "loss", to_string(app->loss));
    }
    require(cfg, "dgp", "preset");
    const std::string name = cfg.text("dgp", "preset");
    ParamMap defaults;
    try {
        defaults = preset_defaults(name);
    } catch (const std::invalid_argument&) {
        throw ConfigError("unknown preset '" + name + "'");
    }
    if (command == "simulate") require(cfg, "dgp", "t_total");
    if (command != "simulate") require(cfg, "erm", "loss");
    if (command == "diagnose")
        for (const auto* key : {"alpha0", "alpha1", "beta1"}) require(cfg, "rule", key);

    // [dgp]
    for (const auto& [key, value] : cfg.sections["dgp"])
        if (key != "preset" && key != "t_total" && !defaults.contains(key))
            throw ConfigError("preset " + name + " does not accept key " + where("dgp", key));
    for (const auto& [key, value] : defaults) set_default(cfg, "dgp", key, format_double(value));
    set_default(cfg, "dgp", "t_total", "100000");
    ParamMap params;
    for (const auto& [key, value] : defaults) params[key] = cfg.real("dgp", key);
    DgpSpec spec;
    try {
        spec = preset(name, params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[dgp] ") + e.what());
    }

    // [erm]
    if (cfg.has("erm", "loss")) {
        try {
            parse_loss_kind(cfg.text("erm", "loss"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[erm] ") + e.what());
        }
    }
    set_default(cfg, "erm", "t", std::to_string(app ? app->t : 1000));
    set_default(cfg, "erm", "starts", "20");
    set_default(cfg, "erm", "grid_points", "5");
    set_default(cfg, "erm", "grid_seeds", "3");
    set_default(cfg, "erm", "n_mc", std::to_string(app ? app->n_mc : 50));
    set_default(cfg, "erm", "gamma", "0.25");
    set_default(cfg, "erm", "seed", "1");
    set_default(cfg, "erm", "mc_draws", "100000");
    set_default(cfg, "erm", "fine_grid_points", "7");
    set_default(cfg, "erm", "ref_starts", "3");

    // [rule]
    set_default(cfg, "rule", "k", "1");
    RuleSpaceConfig rc;
    rc.k = static_cast<int>(cfg.u64("rule", "k"));
    if (cfg.has("rule", "alpha0_lo") || cfg.has("rule", "alpha0_hi"))
        rc.alpha0 = Bounds{cfg.real("rule", "alpha0_lo"), cfg.real("rule", "alpha0_hi")};
    if (cfg.has("rule", "alpha1_lo") || cfg.has("rule", "alpha1_hi"))
        rc.alpha1 = Bounds{cfg.real("rule", "alpha1_lo"), cfg.real("rule", "alpha1_hi")};
    if (cfg.has("rule", "beta1_hi")) rc.beta1_upper = cfg.real("rule", "beta1_hi");
    rc = resolve_rule_config(spec, rc);
    set_default(cfg, "rule", "alpha0_lo", format_double(rc.alpha0->lo));
    set_default(cfg, "rule", "alpha0_hi", format_double(rc.alpha0->hi));
    set_default(cfg, "rule", "alpha1_lo", format_double(rc.alpha1->lo));
    set_default(cfg, "rule", "alpha1_hi", format_double(rc.alpha1->hi));
    set_default(cfg, "rule", "beta1_hi", format_double(*rc.beta1_upper));
    set_default(cfg, "rule", "breakpoints", "");
    set_default(cfg, "rule", "pilot_length", "5000");
    set_default(cfg, "rule", "alpha0", "");
    set_default(cfg, "rule", "alpha1", "");
    set_default(cfg, "rule", "beta1", "");

    // [study]
    set_default(cfg, "study", "t_grid", "250,500,1000,2000,4000");
    set_default(cfg, "study", "replications", std::to_string(app ? app->replications : 200));
    set_default(cfg, "study", "smoke", "false");
    set_default(cfg, "study", "grid_points", std::to_string(app ? app->grid_points : 20));
    set_default(cfg, "study", "lags", "50");
    set_default(cfg, "study", "theta_grid_points", "3");

    // [output]
    set_default(cfg, "output", "dir", "out");
    return cfg;
}

}  // namespace pderm::cli

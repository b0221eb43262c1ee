#include "xattn/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace xattn::io {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + value + "'");
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

std::string to_string(pipeline::MaskStrategy strategy) {
    switch (strategy) {
        case pipeline::MaskStrategy::None: return "none";
        case pipeline::MaskStrategy::UserFile: return "file";
        case pipeline::MaskStrategy::AttentionDerived: return "attention";
    }
    return "none";
}

pipeline::TransferConfig parse_config_text(const std::string& text,
                                           pipeline::MaskStrategy* strategy_out) {
    pipeline::TransferConfig config;
    pipeline::MaskStrategy strategy = pipeline::MaskStrategy::None;

    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "num_steps") config.num_steps = static_cast<int>(parse_int(key, value));
        else if (key == "window32_lo") config.injection_window_32.lo = static_cast<int>(parse_int(key, value));
        else if (key == "window32_hi") config.injection_window_32.hi = static_cast<int>(parse_int(key, value));
        else if (key == "window64_lo") config.injection_window_64.lo = static_cast<int>(parse_int(key, value));
        else if (key == "window64_hi") config.injection_window_64.hi = static_cast<int>(parse_int(key, value));
        else if (key == "contrast_beta") config.contrast_beta = static_cast<float>(parse_real(key, value));
        else if (key == "guidance_alpha") config.guidance_alpha = static_cast<float>(parse_real(key, value));
        else if (key == "adain_lo") config.adain_window.lo = static_cast<int>(parse_int(key, value));
        else if (key == "adain_hi") config.adain_window.hi = static_cast<int>(parse_int(key, value));
        else if (key == "structure_injection_period")
            config.structure_injection_period = static_cast<int>(parse_int(key, value));
        else if (key == "domain_prompt") config.domain_prompt = value;
        else if (key == "seed") config.seed = static_cast<uint64_t>(parse_int(key, value));
        else if (key == "use_masks") config.use_masks = parse_bool(key, value);
        else if (key == "eta") config.eta = static_cast<float>(parse_real(key, value));
        else if (key == "mask_strategy") {
            if (value == "none") strategy = pipeline::MaskStrategy::None;
            else if (value == "file") strategy = pipeline::MaskStrategy::UserFile;
            else if (value == "attention") strategy = pipeline::MaskStrategy::AttentionDerived;
            else throw ConfigError("config: mask_strategy must be none, file, or attention");
        } else {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
        }
    }
    config.validate();
    if (strategy_out)
        *strategy_out = strategy;
    return config;
}

pipeline::TransferConfig load_config_file(const std::string& path,
                                          pipeline::MaskStrategy* strategy_out) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), strategy_out);
}

std::string config_to_text(const pipeline::TransferConfig& config,
                           pipeline::MaskStrategy strategy) {
    std::ostringstream out;
    out << "num_steps = " << config.num_steps << "\n";
    out << "window32_lo = " << config.injection_window_32.lo << "\n";
    out << "window32_hi = " << config.injection_window_32.hi << "\n";
    out << "window64_lo = " << config.injection_window_64.lo << "\n";
    out << "window64_hi = " << config.injection_window_64.hi << "\n";
    out << "contrast_beta = " << format_real(config.contrast_beta) << "\n";
    out << "guidance_alpha = " << format_real(config.guidance_alpha) << "\n";
    out << "adain_lo = " << config.adain_window.lo << "\n";
    out << "adain_hi = " << config.adain_window.hi << "\n";
    out << "structure_injection_period = " << config.structure_injection_period << "\n";
    out << "domain_prompt = " << config.domain_prompt << "\n";
    out << "seed = " << config.seed << "\n";
    out << "use_masks = " << (config.use_masks ? "true" : "false") << "\n";
    out << "mask_strategy = " << to_string(strategy) << "\n";
    out << "eta = " << format_real(config.eta) << "\n";
    return out.str();
}

} // namespace xattn::io

#include "msds/config.hpp"

#include <fstream>

namespace msds {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    try {
        if (key == "theta") theta = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "delta") delta = std::stod(value);
        else if (key == "f" || key == "capacity") capacity = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "k") k = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "n") n = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "beta") beta = static_cast<std::uint32_t>(std::stoul(value));
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "mode") mode = value;
        else if (key == "sweep") sweep = value;
        else if (key == "corpus") corpus_dir = value;
        else if (key == "datasets") datasets = std::stoull(value);
        else if (key == "sources") {
            sources.clear();
            std::size_t pos = 0;
            while (pos != std::string::npos) {
                auto comma = value.find(',', pos);
                std::string one = trim(comma == std::string::npos
                                           ? value.substr(pos)
                                           : value.substr(pos, comma - pos));
                if (!one.empty()) sources.push_back(one);
                pos = comma == std::string::npos ? std::string::npos : comma + 1;
            }
        } else {
            throw InvalidParameterError("unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw InvalidParameterError("bad value '" + value + "' for config key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw InvalidParameterError("bad value '" + value + "' for config key '" + key + "'");
    }
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config '" + path.string() + "'");
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(lineno) + " is not key=value");
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

} // namespace msds

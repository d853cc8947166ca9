#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "msds/errors.hpp"

namespace msds {

/// Run parameters with the experiment-grid defaults.
struct RunConfig {
    std::uint32_t theta = 12;
    double delta = 5.0;
    std::uint32_t capacity = 10; // f
    std::uint32_t k = 10;
    std::uint32_t n = 10;   // query count
    std::uint32_t beta = 100; // update events
    std::uint64_t seed = 42;
    std::string mode = "static"; // static | dynamic
    std::string sweep;           // one of k, n, theta, delta, f, beta (bench)
    std::vector<std::string> sources;
    std::string corpus_dir;
    std::size_t datasets = 400;

    static RunConfig from_file(const std::filesystem::path& path);
    void set(const std::string& key, const std::string& value);
};

} // namespace msds

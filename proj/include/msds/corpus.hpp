#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "msds/geometry.hpp"

namespace msds {

struct CorpusEntry {
    std::string id; // file stem
    std::vector<GeoPoint> points;
};

/// Loads every *.csv / *.txt file under dir as one dataset of "lat,lon"
/// lines (optional header). Files are visited in name order so corpus
/// ingestion is deterministic.
std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir);

/// Optional per-source split: "sources.txt" lines of "source_id dataset_id".
/// Missing file means an empty map (callers fall back to round-robin).
std::map<std::string, std::vector<std::string>> load_manifest(const std::filesystem::path& dir);

/// One "lat,lon" file (query input).
std::vector<GeoPoint> load_points_file(const std::filesystem::path& file);

void write_corpus(const std::filesystem::path& dir, const std::vector<CorpusEntry>& entries);

/// Smallest grid with the given resolution whose half-open extent holds
/// every point.
GridConfig fit_grid(const std::vector<CorpusEntry>& entries, std::uint32_t theta);

std::vector<SpatialSet> rasterize_corpus(const std::vector<CorpusEntry>& entries,
                                         const GridConfig& grid);

} // namespace msds

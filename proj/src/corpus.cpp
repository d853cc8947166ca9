#include "msds/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "msds/errors.hpp"

namespace msds {

namespace {

bool parse_point(const std::string& line, GeoPoint& out) {
    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_ws = [&] {
        while (p != end && (*p == ' ' || *p == '\t')) ++p;
    };
    skip_ws();
    auto r1 = std::from_chars(p, end, out.lat);
    if (r1.ec != std::errc{}) return false;
    p = r1.ptr;
    skip_ws();
    if (p == end || *p != ',') return false;
    ++p;
    skip_ws();
    auto r2 = std::from_chars(p, end, out.lon);
    if (r2.ec != std::errc{}) return false;
    p = r2.ptr;
    skip_ws();
    return p == end;
}

} // namespace

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw NotFoundError("corpus directory '" + dir.string() + "' does not exist");

    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        if (ext == ".csv" || ext == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<CorpusEntry> out;
    for (const auto& file : files) {
        if (file.stem() == "sources") continue; // manifest, not a dataset
        CorpusEntry entry;
        entry.id = file.stem().string();
        std::ifstream in(file);
        if (!in) throw NotFoundError("cannot open '" + file.string() + "'");

        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            GeoPoint p;
            if (!parse_point(line, p)) {
                if (lineno == 1) continue; // header row
                throw FormatError("cannot parse '" + file.string() + "' line " +
                                  std::to_string(lineno) + ": '" + line + "'");
            }
            if (!std::isfinite(p.lat) || !std::isfinite(p.lon))
                throw FormatError("non-finite coordinate in '" + file.string() + "' line " +
                                  std::to_string(lineno));
            entry.points.push_back(p);
        }
        if (entry.points.empty())
            throw EmptyDatasetError("dataset file '" + file.string() + "' holds no points");
        out.push_back(std::move(entry));
    }
    if (out.empty()) throw EmptyDatasetError("corpus directory '" + dir.string() + "' is empty");
    return out;
}

std::vector<GeoPoint> load_points_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("cannot open '" + file.string() + "'");
    std::vector<GeoPoint> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        GeoPoint p;
        if (!parse_point(line, p)) {
            if (lineno == 1) continue;
            throw FormatError("cannot parse '" + file.string() + "' line " +
                              std::to_string(lineno) + ": '" + line + "'");
        }
        pts.push_back(p);
    }
    if (pts.empty()) throw EmptyDatasetError("query file '" + file.string() + "' holds no points");
    return pts;
}

std::map<std::string, std::vector<std::string>> load_manifest(const std::filesystem::path& dir) {
    std::map<std::string, std::vector<std::string>> out;
    auto file = dir / "sources.txt";
    std::ifstream in(file);
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto sep = line.find_first_of(" \t");
        if (sep == std::string::npos)
            throw FormatError("cannot parse manifest line " + std::to_string(lineno) + ": '" +
                              line + "'");
        std::string source = line.substr(0, sep);
        std::string dataset = line.substr(line.find_first_not_of(" \t", sep));
        out[source].push_back(std::move(dataset));
    }
    return out;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<CorpusEntry>& entries) {
    std::filesystem::create_directories(dir);
    for (const CorpusEntry& e : entries) {
        std::ofstream out(dir / (e.id + ".csv"));
        out << "lat,lon\n";
        out.precision(12);
        for (const GeoPoint& p : e.points) out << p.lat << "," << p.lon << "\n";
    }
}

GridConfig fit_grid(const std::vector<CorpusEntry>& entries, std::uint32_t theta) {
    if (entries.empty()) throw EmptyDatasetError("cannot fit a grid over an empty corpus");
    double min_lon = entries[0].points[0].lon, max_lon = min_lon;
    double min_lat = entries[0].points[0].lat, max_lat = min_lat;
    for (const CorpusEntry& e : entries) {
        for (const GeoPoint& p : e.points) {
            min_lon = std::min(min_lon, p.lon);
            max_lon = std::max(max_lon, p.lon);
            min_lat = std::min(min_lat, p.lat);
            max_lat = std::max(max_lat, p.lat);
        }
    }
    // The extent is half-open: nudge the upper edge past the farthest point.
    double w = std::max(max_lon - min_lon, 1e-9) * (1.0 + 1e-9) + 1e-9;
    double h = std::max(max_lat - min_lat, 1e-9) * (1.0 + 1e-9) + 1e-9;
    return GridConfig(min_lon, min_lat, w, h, theta);
}

std::vector<SpatialSet> rasterize_corpus(const std::vector<CorpusEntry>& entries,
                                         const GridConfig& grid) {
    std::vector<SpatialSet> sets;
    sets.reserve(entries.size());
    for (const CorpusEntry& e : entries) sets.push_back(rasterize(e.points, grid, e.id));
    return sets;
}

} // namespace msds

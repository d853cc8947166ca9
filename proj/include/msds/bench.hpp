#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "msds/config.hpp"
#include "msds/coordinator.hpp"
#include "msds/corpus.hpp"
#include "msds/gen.hpp"

namespace msds {

/// A center plus N in-process sources over one synthetic or loaded corpus.
struct InProcWorld {
    GridConfig grid;
    std::vector<std::unique_ptr<SourceService>> services;
    std::vector<std::unique_ptr<InProcChannel>> ingest; // update path, one per source
    std::unique_ptr<Center> center;

    InProcWorld() = default;
    InProcWorld(InProcWorld&&) = default;
    InProcWorld& operator=(InProcWorld&&) = default;

    std::size_t source_of(std::string_view dataset_id) const;

    static InProcWorld build(const std::vector<CorpusEntry>& entries, const GridConfig& grid,
                             std::uint32_t capacity, std::size_t source_count);
};

/// Scripted update stream with the prefix property: the first n events of a
/// longer script equal the shorter script.
struct ScriptItem {
    std::size_t source = 0;
    UpdateEvent event;
};

std::vector<ScriptItem> make_update_script(std::uint64_t seed, const InProcWorld& world,
                                           const SynthSpec& spec, std::size_t count);

struct CommComparison {
    std::uint64_t dynamic_bytes = 0;
    std::uint64_t static_bytes = 0;
    std::uint64_t dynamic_result_hash = 0;
    std::uint64_t static_result_hash = 0;
    CommMeter dynamic_meter;
    CommMeter static_meter;
};

/// Replays the same corpus, queries, and update stream in dynamic mode (live
/// queries + deltas) and static mode (re-query after every event), returning
/// the center-side byte totals of each.
CommComparison run_dynamic_vs_static(const RunConfig& cfg, std::uint32_t beta);

/// Parameter sweep; one CSV row per (value, mode).
void run_bench(const RunConfig& cfg, std::ostream& csv);

} // namespace msds

#include "msds/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "msds/bytes.hpp"
#include "msds/ibtree.hpp"

namespace msds {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median5(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

std::size_t InProcWorld::source_of(std::string_view dataset_id) const {
    for (std::size_t i = 0; i < services.size(); ++i)
        if (services[i]->store().tree().contains(dataset_id)) return i;
    throw NotFoundError("dataset '" + std::string(dataset_id) + "' is on no source");
}

InProcWorld InProcWorld::build(const std::vector<CorpusEntry>& entries, const GridConfig& grid,
                               std::uint32_t capacity, std::size_t source_count) {
    InProcWorld world;
    world.grid = grid;
    world.center = std::make_unique<Center>();

    std::vector<std::vector<SpatialSet>> parts(source_count);
    for (std::size_t i = 0; i < entries.size(); ++i)
        parts[i % source_count].push_back(rasterize(entries[i].points, grid, entries[i].id));

    for (std::size_t s = 0; s < source_count; ++s) {
        if (parts[s].empty()) continue;
        auto tree = IBtree::build(std::move(parts[s]), capacity, grid);
        auto id = "src" + std::to_string(s);
        world.services.push_back(
            std::make_unique<SourceService>(id, "inproc:" + id, std::move(tree)));
        world.center->attach_source(std::make_unique<InProcChannel>(*world.services.back()));
        world.ingest.push_back(std::make_unique<InProcChannel>(*world.services.back()));
    }
    return world;
}

std::vector<ScriptItem> make_update_script(std::uint64_t seed, const InProcWorld& world,
                                           const SynthSpec& spec, std::size_t count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> roll(0.0, 1.0);
    std::uniform_real_distribution<double> anywhere(0.0, spec.extent * (1.0 - 1e-9));
    std::uniform_int_distribution<std::size_t> pick_source(0, world.services.size() - 1);

    std::vector<std::vector<std::string>> ids(world.services.size());
    for (std::size_t s = 0; s < world.services.size(); ++s)
        ids[s] = world.services[s]->store().tree().dataset_ids_sorted();
    std::vector<std::uint64_t> seq(world.services.size(), 0);

    std::vector<ScriptItem> script;
    script.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ScriptItem item;
        item.source = pick_source(rng);
        UpdateEvent& e = item.event;
        e.sequence = ++seq[item.source];

        const bool insert = roll(rng) < 0.3;
        if (insert) {
            e.kind = UpdateKind::Insert;
            e.dataset_id = "u" + std::to_string(i);
            ids[item.source].push_back(e.dataset_id);
        } else {
            e.kind = UpdateKind::Update;
            auto& pool = ids[item.source];
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            e.dataset_id = pool[pick(rng)];
        }

        // Half the stream lands in a far corner no query reaches; a quarter
        // targets the query neighborhood so some events do change results.
        const double where = roll(rng);
        double clat, clon;
        double sigma = spec.extent / 200.0;
        if (where < 0.5) {
            clat = clon = spec.extent * 0.93;
        } else if (where < 0.75) {
            clat = clon = spec.extent * 0.3;
            sigma = spec.extent / 40.0;
        } else {
            clat = anywhere(rng);
            clon = anywhere(rng);
        }
        std::normal_distribution<double> jitter(0.0, sigma);
        std::uniform_int_distribution<std::size_t> npts(spec.min_points, spec.max_points);
        const std::size_t n = npts(rng);
        for (std::size_t p = 0; p < n; ++p) {
            double lat = std::clamp(clat + jitter(rng), 0.0, spec.extent * (1.0 - 1e-9));
            double lon = std::clamp(clon + jitter(rng), 0.0, spec.extent * (1.0 - 1e-9));
            e.points.push_back({lat, lon});
        }
        script.push_back(std::move(item));
    }
    return script;
}

namespace {

struct BenchQueries {
    std::vector<GlobalQuery> miq;
    GlobalQuery mcqc;
};

/// Queries squeezed around the script's hot spot (0.3 x extent) so part of
/// the update stream lands on live results, away from the far corner.
BenchQueries make_queries(std::uint64_t seed, const SynthSpec& spec, std::uint32_t n_miq) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    auto squeeze = [&](std::vector<GeoPoint> pts) {
        for (GeoPoint& p : pts) {
            p.lat = p.lat * 0.05 + spec.extent * 0.275;
            p.lon = p.lon * 0.05 + spec.extent * 0.275;
        }
        return pts;
    };
    BenchQueries q;
    for (std::uint32_t i = 0; i < n_miq; ++i) {
        GlobalQuery g;
        g.query_id = "bench-miq-" + std::to_string(i);
        g.points = squeeze(synth_query_points(rng, spec));
        q.miq.push_back(std::move(g));
    }
    q.mcqc.query_id = "bench-mcqc";
    q.mcqc.points = squeeze(synth_query_points(rng, spec));
    return q;
}

void apply_script_item(InProcWorld& world, const ScriptItem& item) {
    Frame resp = world.ingest[item.source]->round_trip(encode_update(item.event, true));
    if (resp.type == MsgType::Error) throw_remote_error(decode_error(resp));
}

std::uint64_t hash_global_miq(Fnv1a& h, const GlobalTopK& r) {
    for (const auto& e : r.entries) {
        h.mix_str(e.source_id);
        h.mix_str(e.dataset_id);
        h.mix_u32(e.intersection);
    }
    return h.value();
}

std::uint64_t hash_global_mcqc(Fnv1a& h, const GlobalMcqcResult& r) {
    h.mix_str(r.source_id);
    h.mix_u64(r.result.total_coverage);
    h.mix_u64(r.result.truncated ? 1 : 0);
    for (const auto& s : r.result.selected) {
        h.mix_str(s.dataset_id);
        h.mix_u64(s.increment);
    }
    return h.value();
}

} // namespace

CommComparison run_dynamic_vs_static(const RunConfig& cfg, std::uint32_t beta) {
    SynthSpec spec;
    spec.datasets = cfg.datasets;
    GridConfig grid(0.0, 0.0, spec.extent, spec.extent, cfg.theta);
    auto entries = synth_corpus(cfg.seed, spec);
    const std::uint32_t n_miq = 2;

    CommComparison out;

    // Dynamic mode: register once, stream updates, collect deltas.
    {
        InProcWorld world = InProcWorld::build(entries, grid, cfg.capacity, 5);
        auto script = make_update_script(cfg.seed + 1, world, spec, beta);
        BenchQueries queries = make_queries(cfg.seed, spec, n_miq);

        std::vector<std::string> regs;
        for (const auto& q : queries.miq)
            regs.push_back(world.center->register_live(q, QueryMode::Miq, cfg.k));
        auto mreg = world.center->register_live(queries.mcqc, QueryMode::Mcqc, cfg.k, cfg.delta);

        for (const ScriptItem& item : script) {
            apply_script_item(world, item);
            world.center->poll_deltas();
        }
        Fnv1a h;
        for (const auto& reg : regs) hash_global_miq(h, world.center->live_miq_snapshot(reg));
        hash_global_mcqc(h, world.center->live_mcqc_snapshot(mreg));
        out.dynamic_result_hash = h.value();
        out.dynamic_meter = world.center->meter_total();
        out.dynamic_bytes = out.dynamic_meter.total_bytes();
    }

    // Static mode: same corpus and stream, re-query after every event.
    {
        InProcWorld world = InProcWorld::build(entries, grid, cfg.capacity, 5);
        auto script = make_update_script(cfg.seed + 1, world, spec, beta);
        BenchQueries queries = make_queries(cfg.seed, spec, n_miq);

        GlobalTopK last_miq;
        GlobalMcqcResult last_mcqc;
        std::vector<GlobalTopK> miq_results(queries.miq.size());
        for (const ScriptItem& item : script) {
            apply_script_item(world, item);
            for (std::size_t i = 0; i < queries.miq.size(); ++i)
                miq_results[i] = world.center->global_miq(queries.miq[i], cfg.k);
            last_mcqc = world.center->global_mcqc(queries.mcqc, cfg.delta, cfg.k);
        }
        Fnv1a h;
        for (const auto& r : miq_results) hash_global_miq(h, r);
        hash_global_mcqc(h, last_mcqc);
        out.static_result_hash = h.value();
        out.static_meter = world.center->meter_total();
        out.static_bytes = out.static_meter.total_bytes();
    }

    return out;
}

namespace {

std::vector<double> sweep_values(const std::string& sweep) {
    if (sweep == "k" || sweep == "n") return {10, 20, 30, 40, 50};
    if (sweep == "theta") return {10, 11, 12, 13, 14};
    if (sweep == "delta") return {0, 5, 10, 15, 20};
    if (sweep == "f") return {10, 100, 200, 300, 400};
    if (sweep == "beta") return {100, 150, 200, 250, 300};
    throw InvalidParameterError("unknown sweep parameter '" + sweep + "'");
}

RunConfig with_value(RunConfig cfg, const std::string& sweep, double value) {
    if (sweep == "k") cfg.k = static_cast<std::uint32_t>(value);
    else if (sweep == "n") cfg.n = static_cast<std::uint32_t>(value);
    else if (sweep == "theta") cfg.theta = static_cast<std::uint32_t>(value);
    else if (sweep == "delta") cfg.delta = value;
    else if (sweep == "f") cfg.capacity = static_cast<std::uint32_t>(value);
    else if (sweep == "beta") cfg.beta = static_cast<std::uint32_t>(value);
    return cfg;
}

} // namespace

void run_bench(const RunConfig& cfg, std::ostream& csv) {
    if (cfg.sweep.empty())
        throw InvalidParameterError("bench config needs a 'sweep' key (k|n|theta|delta|f|beta)");
    csv << "param,value,mode,build_ms,search_ms,bytes_tx,bytes_rx,result_hash\n";

    for (double value : sweep_values(cfg.sweep)) {
        RunConfig run = with_value(cfg, cfg.sweep, value);

        if (cfg.sweep == "beta") {
            auto start = Clock::now();
            auto cmp = run_dynamic_vs_static(run, run.beta);
            double elapsed = ms_since(start);
            csv << "beta," << run.beta << ",static,0," << elapsed << ","
                << cmp.static_meter.tx_bytes() << "," << cmp.static_meter.rx_bytes() << ","
                << cmp.static_result_hash << "\n";
            csv << "beta," << run.beta << ",dynamic,0," << elapsed << ","
                << cmp.dynamic_meter.tx_bytes() << "," << cmp.dynamic_meter.rx_bytes() << ","
                << cmp.dynamic_result_hash << "\n";
            continue;
        }

        SynthSpec spec;
        spec.datasets = run.datasets;
        GridConfig grid(0.0, 0.0, spec.extent, spec.extent, run.theta);
        auto entries = run.corpus_dir.empty() ? synth_corpus(run.seed, spec)
                                              : load_corpus(run.corpus_dir);
        if (!run.corpus_dir.empty()) grid = fit_grid(entries, run.theta);

        std::vector<double> build_times;
        for (int rep = 0; rep < 5; ++rep) {
            auto start = Clock::now();
            auto world = InProcWorld::build(entries, grid, run.capacity, 5);
            build_times.push_back(ms_since(start));
        }

        InProcWorld world = InProcWorld::build(entries, grid, run.capacity, 5);
        BenchQueries queries = make_queries(run.seed, spec, run.n);

        // Warm-up builds the per-source dataset graphs outside the timings.
        world.center->global_mcqc(queries.mcqc, run.delta, run.k);

        std::vector<double> search_times;
        for (int rep = 0; rep < 5; ++rep) {
            auto start = Clock::now();
            for (const auto& q : queries.miq) world.center->global_miq(q, run.k);
            world.center->global_mcqc(queries.mcqc, run.delta, run.k);
            search_times.push_back(ms_since(start));
        }

        world.center->reset_meters();
        Fnv1a h;
        for (const auto& q : queries.miq) hash_global_miq(h, world.center->global_miq(q, run.k));
        hash_global_mcqc(h, world.center->global_mcqc(queries.mcqc, run.delta, run.k));
        CommMeter meter = world.center->meter_total();

        csv << cfg.sweep << "," << value << ",static," << median5(build_times) << ","
            << median5(search_times) << "," << meter.tx_bytes() << "," << meter.rx_bytes() << ","
            << h.value() << "\n";
    }
}

} // namespace msds

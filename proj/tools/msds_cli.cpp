#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"

#include "msds/bench.hpp"
#include "msds/coordinator.hpp"
#include "msds/corpus.hpp"
#include "msds/gen.hpp"
#include "msds/oracle.hpp"
#include "msds/tcp.hpp"

using namespace msds;

namespace {

// Exit codes: 0 ok, 1 error, 2 partial results, 3 no candidates, 4 mismatch.
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;
constexpr int kExitNoCandidates = 3;
constexpr int kExitMismatch = 4;

int log_level() {
    static int level = [] {
        const char* env = std::getenv("MSDS_LOG");
        if (env == nullptr) return 1;
        std::string v = env;
        if (v == "error" || v == "0") return 0;
        if (v == "debug" || v == "2") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[msds] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "[msds:debug] %s\n", msg.c_str());
}

std::pair<std::string, std::uint16_t> split_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw InvalidParameterError("address '" + addr + "' is not host:port");
    return {addr.substr(0, colon),
            static_cast<std::uint16_t>(std::stoul(addr.substr(colon + 1)))};
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NotFoundError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

double ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

int cmd_build_index(const std::string& corpus_dir, std::uint32_t theta, std::uint32_t capacity,
                    const std::string& out_path) {
    auto start = std::chrono::steady_clock::now();
    auto entries = load_corpus(corpus_dir);
    GridConfig grid = fit_grid(entries, theta);
    auto sets = rasterize_corpus(entries, grid);
    auto tree = IBtree::build(std::move(sets), capacity, grid);
    write_file(out_path, tree.serialize());
    std::printf("datasets=%zu leaves=%zu depth=%zu build_ms=%.2f\n", tree.dataset_count(),
                tree.leaf_count(), tree.depth(), ms_since(start));
    return kExitOk;
}

int cmd_build_graph(const std::string& index_path, double delta, const std::string& out_path) {
    auto tree = IBtree::deserialize(read_file(index_path));
    auto start = std::chrono::steady_clock::now();
    auto graph = build_graph(tree, delta);
    write_file(out_path, save_graph(graph));
    std::printf("nodes=%zu edges=%zu build_ms=%.2f\n", graph.node_count(), graph.edge_count(),
                ms_since(start));
    return kExitOk;
}

std::atomic<bool> g_stop{false};

int cmd_serve_source(const std::string& index_path, const std::string& graph_path,
                     const std::string& source_id, const std::string& listen) {
    auto [host, port] = split_addr(listen);
    auto tree = IBtree::deserialize(read_file(index_path));
    std::string id = source_id.empty() ? "source@" + listen : source_id;
    SourceService service(id, listen, std::move(tree));
    if (!graph_path.empty())
        service.store().preload_graph(load_graph(read_file(graph_path), service.store().tree()));

    TcpSourceServer server(service, host, port);
    log_info("source '" + id + "' listening on " + host + ":" + std::to_string(server.port()));
    std::signal(SIGINT, [](int) { g_stop.store(true); });
    std::signal(SIGTERM, [](int) { g_stop.store(true); });
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return kExitOk;
}

void serve_center_connection(Center& center, std::mutex& center_mu, int fd) {
    std::vector<std::uint8_t> buf;
    std::uint8_t chunk[4096];
    try {
        while (true) {
            std::size_t got = tcp_recv_some(fd, chunk, sizeof chunk, true);
            if (got == 0) break;
            buf.insert(buf.end(), chunk, chunk + got);
            std::size_t consumed = 0;
            while (auto frame = try_decode_frame(buf, consumed)) {
                buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(consumed));
                Frame response;
                try {
                    QueryEnvelope q = decode_query(*frame);
                    GlobalQuery gq;
                    gq.query_id = q.query_id;
                    gq.points = q.points;
                    gq.cells = q.cells;
                    gq.grid_fp = q.grid_fp;

                    std::lock_guard lock(center_mu);
                    auto before = center.meters_by_source();
                    ResultBody body;
                    if (q.mode == QueryMode::Miq) {
                        auto res = center.global_miq(gq, q.k);
                        body.kind = ResultBody::Kind::GlobalMiq;
                        body.global_miq = res.entries;
                    } else {
                        auto res = center.global_mcqc(gq, q.delta, q.k);
                        body.kind = ResultBody::Kind::GlobalMcqc;
                        body.mcqc_source = res.source_id;
                        body.mcqc = res.result;
                    }
                    auto after = center.meters_by_source();
                    for (std::size_t i = 0; i < after.size(); ++i)
                        body.source_bytes.push_back(
                            {after[i].source_id, after[i].bytes - before[i].bytes});
                    response = encode_result(body);
                } catch (const std::exception& e) {
                    response = encode_error(error_body_for(e));
                }
                auto bytes = encode_frame(response);
                tcp_send_all(fd, bytes.data(), bytes.size());
            }
        }
    } catch (const std::exception&) {
        // connection closed
    }
    tcp_close(fd);
}

int cmd_run_center(const std::vector<std::string>& source_addrs, const std::string& listen) {
    Center center;
    std::mutex center_mu;
    for (const auto& addr : source_addrs) {
        auto [host, port] = split_addr(addr);
        const auto& desc = center.attach_source(std::make_unique<TcpChannel>(host, port));
        log_info("registered source '" + desc.source_id + "' (" + addr + ", " +
                 std::to_string(desc.dataset_count) + " datasets)");
    }

    auto [lhost, lport] = split_addr(listen);
    auto [listen_fd, bound] = tcp_listen(lhost, lport);
    log_info("center listening on " + lhost + ":" + std::to_string(bound));

    std::vector<std::thread> workers;
    std::signal(SIGINT, [](int) { g_stop.store(true); });
    std::signal(SIGTERM, [](int) { g_stop.store(true); });
    while (!g_stop.load()) {
        int fd = tcp_accept_timeout(listen_fd, 200);
        if (fd == -2) continue;
        if (fd < 0) break;
        workers.emplace_back(
            [&center, &center_mu, fd] { serve_center_connection(center, center_mu, fd); });
    }
    tcp_close(listen_fd);
    for (auto& t : workers)
        if (t.joinable()) t.join();
    return kExitOk;
}

int cmd_query(const std::string& center_addr, const std::string& mode,
              const std::string& query_file, std::uint32_t k, double delta) {
    auto [host, port] = split_addr(center_addr);
    auto points = load_points_file(query_file);

    QueryEnvelope env;
    env.mode = mode == "mcqc" ? QueryMode::Mcqc : QueryMode::Miq;
    env.query_id = std::filesystem::path(query_file).stem().string();
    env.k = k;
    env.delta = delta;
    env.points = std::move(points);

    TcpChannel channel(host, port);
    Frame resp = channel.round_trip(encode_query(env));
    if (resp.type == MsgType::Error) throw_remote_error(decode_error(resp));
    ResultBody body = decode_result(resp);

    if (body.kind == ResultBody::Kind::GlobalMiq) {
        if (body.global_miq.empty()) {
            std::printf("no joinable datasets\n");
        } else {
            std::printf("rank  intersection  source  dataset\n");
            for (std::size_t i = 0; i < body.global_miq.size(); ++i) {
                const auto& e = body.global_miq[i];
                std::printf("%-5zu %-13u %-7s %s\n", i + 1, e.intersection, e.source_id.c_str(),
                            e.dataset_id.c_str());
            }
        }
    } else {
        if (body.mcqc_source.empty()) {
            std::printf("no result\n");
        } else {
            std::printf("source=%s coverage=%llu%s\n", body.mcqc_source.c_str(),
                        static_cast<unsigned long long>(body.mcqc.total_coverage),
                        body.mcqc.truncated ? " (truncated)" : "");
            std::printf("rank  gain  dataset\n");
            for (std::size_t i = 0; i < body.mcqc.selected.size(); ++i) {
                const auto& s = body.mcqc.selected[i];
                std::printf("%-5zu %-5llu %s\n", i + 1,
                            static_cast<unsigned long long>(s.increment), s.dataset_id.c_str());
            }
        }
    }
    std::uint64_t touched = 0;
    for (const auto& sb : body.source_bytes) {
        std::printf("source %s: %llu bytes\n", sb.source_id.c_str(),
                    static_cast<unsigned long long>(sb.bytes));
        touched += sb.bytes;
    }
    const bool empty = body.kind == ResultBody::Kind::GlobalMiq ? body.global_miq.empty()
                                                                : body.mcqc_source.empty();
    if (empty && touched == 0) return kExitNoCandidates;
    return kExitOk;
}

int cmd_bench(const std::string& config_path, const std::string& out_path) {
    RunConfig cfg = RunConfig::from_file(config_path);
    std::ofstream out(out_path);
    if (!out) throw NotFoundError("cannot write '" + out_path + "'");
    run_bench(cfg, out);
    log_info("bench sweep '" + cfg.sweep + "' written to " + out_path);
    return kExitOk;
}

int cmd_oracle_check(const std::string& corpus_dir, std::uint32_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uint32_t mismatches = 0;
    double ratio_min = 1.0, ratio_sum = 0.0;
    std::size_t ratio_count = 0;

    std::vector<SpatialSet> fixed_pool;
    GridConfig fixed_grid(0, 0, 1, 1, 1);
    if (!corpus_dir.empty()) {
        auto entries = load_corpus(corpus_dir);
        fixed_grid = fit_grid(entries, 10);
        fixed_pool = rasterize_corpus(entries, fixed_grid);
    }

    for (std::uint32_t i = 0; i < instances; ++i) {
        GridConfig grid = fixed_pool.empty() ? GridConfig(0, 0, 256, 256, 8) : fixed_grid;
        std::vector<SpatialSet> sets;
        if (fixed_pool.empty()) {
            // Every third instance stays small enough for the exhaustive
            // optimum, so approximation ratios get reported.
            std::uniform_int_distribution<std::size_t> m_small(8, 14);
            std::uniform_int_distribution<std::size_t> m_large(15, 60);
            sets = random_cell_corpus(rng, grid, i % 3 == 0 ? m_small(rng) : m_large(rng), 25, 10);
        } else {
            sets = fixed_pool;
        }
        auto tree = IBtree::build(sets, 5, grid);
        auto query = random_cell_set(rng, grid, "q", 25, 20);

        bool ok = true;
        for (std::uint32_t k : {1u, 5u, 10u}) {
            if (miq_search(tree, query, k) != oracle::brute_miq(sets, query, k)) ok = false;
        }
        for (double delta : {0.0, 2.0, 5.0}) {
            auto graph = build_graph(tree, delta);
            auto a = gasm(tree, query, delta, 4);
            auto b = gadg(tree, graph, query, delta, 4);
            auto c = oracle::standard_greedy(sets, query, delta, 4);
            if (!(a == b && b == c)) ok = false;
            if (sets.size() <= 14) {
                auto opt = oracle::brute_mcqc(sets, query, delta, 4);
                if (opt.coverage > 0 && !a.selected.empty()) {
                    double ratio = static_cast<double>(a.total_coverage) /
                                   static_cast<double>(opt.coverage);
                    ratio_min = std::min(ratio_min, ratio);
                    ratio_sum += ratio;
                    ++ratio_count;
                }
            }
        }
        if (!ok) {
            ++mismatches;
            std::printf("MISMATCH instance=%u seed=%llu sets=%zu theta=%u\n", i,
                        static_cast<unsigned long long>(seed), sets.size(), grid.theta);
        }
        log_debug("instance " + std::to_string(i) + (ok ? " ok" : " MISMATCH"));
    }

    std::printf("instances=%u mismatches=%u", instances, mismatches);
    if (ratio_count > 0)
        std::printf(" greedy/optimal: min=%.4f mean=%.4f over %zu checks", ratio_min,
                    ratio_sum / static_cast<double>(ratio_count), ratio_count);
    std::printf("\n");
    return mismatches == 0 ? kExitOk : kExitMismatch;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"msds - multi-source spatial dataset search"};
    app.require_subcommand(1);

    std::string corpus_dir, out_path, index_path, graph_path, listen, center_addr, query_file,
        config_path, mode = "miq", source_id;
    std::vector<std::string> source_addrs;
    std::uint32_t theta = 12, capacity = 10, k = 10, instances = 100;
    double delta = 5.0;
    std::uint64_t seed = 42;

    auto* build_index = app.add_subcommand("build-index", "rasterize a corpus and build an index");
    build_index->add_option("--corpus", corpus_dir, "directory of lat,lon files")->required();
    build_index->add_option("--theta", theta, "grid resolution (1-15)");
    build_index->add_option("--capacity", capacity, "leaf capacity f");
    build_index->add_option("--out", out_path, "index snapshot file")->required();

    auto* build_graph_cmd = app.add_subcommand("build-graph", "build the delta-connectivity graph");
    build_graph_cmd->add_option("--index", index_path, "index snapshot")->required();
    build_graph_cmd->add_option("--delta", delta, "connectivity threshold (cell units)");
    build_graph_cmd->add_option("--out", out_path, "graph snapshot file")->required();

    auto* serve = app.add_subcommand("serve-source", "serve one data source over TCP");
    serve->add_option("--index", index_path, "index snapshot")->required();
    serve->add_option("--graph", graph_path, "graph snapshot (optional)");
    serve->add_option("--id", source_id, "source id (default: source@addr)");
    serve->add_option("--listen", listen, "host:port")->required();

    auto* run_center_cmd = app.add_subcommand("run-center", "run the interaction center");
    run_center_cmd->add_option("--sources", source_addrs, "source host:port list")
        ->required()
        ->delimiter(',');
    run_center_cmd->add_option("--listen", listen, "host:port")->required();

    auto* query = app.add_subcommand("query", "run a global query through a center");
    query->add_option("--center", center_addr, "center host:port")->required();
    query->add_option("--mode", mode, "miq|mcqc")->check(CLI::IsMember({"miq", "mcqc"}));
    query->add_option("--query", query_file, "lat,lon file")->required();
    query->add_option("--k", k, "result count");
    query->add_option("--delta", delta, "connectivity threshold (cell units, mcqc)");

    auto* bench = app.add_subcommand("bench", "parameter sweep to CSV");
    bench->add_option("--config", config_path, "key=value config file")->required();
    bench->add_option("--out", out_path, "CSV output file")->required();

    auto* oracle_check = app.add_subcommand("oracle-check", "three-way search agreement suite");
    oracle_check->add_option("--corpus", corpus_dir, "optional corpus directory");
    oracle_check->add_option("--instances", instances, "instance count");
    oracle_check->add_option("--seed", seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_index->parsed()) return cmd_build_index(corpus_dir, theta, capacity, out_path);
        if (build_graph_cmd->parsed()) return cmd_build_graph(index_path, delta, out_path);
        if (serve->parsed()) return cmd_serve_source(index_path, graph_path, source_id, listen);
        if (run_center_cmd->parsed()) return cmd_run_center(source_addrs, listen);
        if (query->parsed()) return cmd_query(center_addr, mode, query_file, k, delta);
        if (bench->parsed()) return cmd_bench(config_path, out_path);
        if (oracle_check->parsed()) return cmd_oracle_check(corpus_dir, instances, seed);
    } catch (const PartialResultError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPartial;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitError;
}

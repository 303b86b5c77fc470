// flexmap: P-Q flexibility areas of radial distribution networks at the
// TSO/DSO interface — tracing, segmentation, rendering and benchmarks.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexmap/distflow.hpp"
#include "flexmap/errors.hpp"
#include "flexmap/grid.hpp"
#include "flexmap/misocp.hpp"
#include "flexmap/parallel.hpp"
#include "flexmap/render.hpp"
#include "flexmap/segmentation.hpp"
#include "flexmap/tracer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flexmap;

namespace {

enum ExitCode {
    kOk = 0,
    kUsage = 1,
    kParse = 2,
    kValidation = 3,
    kInfeasible = 4,
    kInternal = 5,
};

struct RunConfig {
    std::string network;
    std::string out = ".";
    int k = 50;
    std::optional<int> limit;
    std::vector<int> subset;
    std::map<int, double> reliability_overrides;
    std::optional<double> threshold;
    int max_segments = 256;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    int repeats = 5;
    int samples = 1000;
    std::string direction = "-p";
    std::string method = "epsilon";
    std::string mode = "count";
    double feastol = 1e-8;
    int layout_iterations = 600;
    bool chart = false;
    bool dump_program = false;
    std::string misocp_log;
};

json config_to_json(const RunConfig& c) {
    json j;
    j["network"] = c.network;
    j["out"] = c.out;
    j["k"] = c.k;
    if (c.limit) j["limit"] = *c.limit;
    j["subset"] = c.subset;
    json rel = json::object();
    for (const auto& [id, r] : c.reliability_overrides) rel[std::to_string(id)] = r;
    j["reliability_overrides"] = rel;
    if (c.threshold) j["threshold"] = *c.threshold;
    j["max_segments"] = c.max_segments;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["repeats"] = c.repeats;
    j["samples"] = c.samples;
    j["direction"] = c.direction;
    j["method"] = c.method;
    j["mode"] = c.mode;
    j["feastol"] = c.feastol;
    j["layout_iterations"] = c.layout_iterations;
    j["chart"] = c.chart;
    return j;
}

void apply_config_file(const std::string& path, RunConfig& c) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config file: ") + e.what());
    }
    if (j.contains("network")) c.network = j["network"].get<std::string>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("k")) c.k = j["k"].get<int>();
    if (j.contains("limit")) c.limit = j["limit"].get<int>();
    if (j.contains("subset")) c.subset = j["subset"].get<std::vector<int>>();
    if (j.contains("reliability_overrides"))
        for (const auto& [key, value] : j["reliability_overrides"].items())
            c.reliability_overrides[std::stoi(key)] = value.get<double>();
    if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
    if (j.contains("max_segments")) c.max_segments = j["max_segments"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"].get<unsigned>();
    if (j.contains("repeats")) c.repeats = j["repeats"].get<int>();
    if (j.contains("samples")) c.samples = j["samples"].get<int>();
    if (j.contains("direction")) c.direction = j["direction"].get<std::string>();
    if (j.contains("method")) c.method = j["method"].get<std::string>();
    if (j.contains("mode")) c.mode = j["mode"].get<std::string>();
    if (j.contains("feastol")) c.feastol = j["feastol"].get<double>();
    if (j.contains("layout_iterations")) c.layout_iterations = j["layout_iterations"].get<int>();
    if (j.contains("chart")) c.chart = j["chart"].get<bool>();
}

std::string config_hash(const RunConfig& c) {
    const std::string text = config_to_json(c).dump();
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&t));
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write output file: " + path.string());
    out << content;
}

grid::Network load_with_overrides(const RunConfig& c) {
    if (c.network.empty()) throw ParseError("no network file given (--network)");
    grid::Network net = grid::load_network(c.network);
    for (const auto& [id, r] : c.reliability_overrides) {
        bool found = false;
        for (auto& u : net.flex_units)
            if (u.id == id) {
                u.reliability = r;
                found = true;
            }
        if (!found)
            throw ValidationError("reliability override references unknown flex unit " +
                                  std::to_string(id));
    }
    grid::validate_network(net);
    return net;
}

distflow::ObjectiveDirection parse_direction(const std::string& token) {
    // Sign is the requested movement of the quantity: "-p" minimizes P.
    if (token == "-p") return {+1, 0};
    if (token == "+p") return {-1, 0};
    if (token == "-q") return {0, +1};
    if (token == "+q") return {0, -1};
    if (token == "feasible") return {0, 0};
    throw ParseError("unknown direction '" + token + "' (expected -p, +p, -q, +q, feasible)");
}

distflow::ActivationContext activation_from(const RunConfig& c, const grid::Network& net) {
    if (!c.subset.empty()) {
        std::set<int> ids(c.subset.begin(), c.subset.end());
        return distflow::ActivationContext::fixed(std::move(ids));
    }
    if (c.limit) return distflow::ActivationContext::relaxed(*c.limit);
    return distflow::ActivationContext::all_units(net);
}

tracer::TraceOptions trace_options(const RunConfig& c) {
    tracer::TraceOptions opts;
    opts.solve.tol.feas = c.feastol;
    opts.solve.tol.abs_gap = c.feastol;
    opts.solve.tol.rel_gap = c.feastol;
    opts.workers = c.workers ? c.workers : default_workers();
    return opts;
}

void echo_config(const RunConfig& c, const std::string& hash) {
    json j = config_to_json(c);
    j["config_hash"] = hash;
    write_file(fs::path(c.out) / "effective_config.json", j.dump(2) + "\n");
}

std::string flags_of(const tracer::BoundaryPoint& bp) {
    std::string flags;
    auto add = [&](const char* f) {
        if (!flags.empty()) flags += ';';
        flags += f;
    };
    if (bp.empty) add("interval-empty");
    if (bp.inexact) add("inexact");
    if (!bp.empty && !bp.oracle_ok) add("oracle-mismatch");
    return flags;
}

std::string boundary_csv(const tracer::FlexArea& area, const std::string& hash) {
    std::ostringstream os;
    os.precision(10);
    os << "# config " << hash << "\n";
    os << "method,interval,P_kW,Q_kVAr,flags\n";
    for (const auto& bp : area.points) {
        os << tracer::to_string(area.method) << "," << bp.slot << ",";
        if (bp.empty)
            os << ",";
        else
            os << bp.p_kw << "," << bp.q_kvar;
        os << "," << flags_of(bp) << "\n";
    }
    return os.str();
}

json polygon_json(const geom::Polygon& poly) {
    json arr = json::array();
    for (const auto& v : poly.vertices()) arr.push_back({v.x, v.y});
    return arr;
}

json segmentation_json(const seg::Segmentation& s, const std::string& hash) {
    json j;
    j["config_hash"] = hash;
    j["mode"] = seg::to_string(s.mode);
    j["reference_point"] = {s.reference_point.x, s.reference_point.y};
    j["discarded_count"] = s.discarded_count;
    if (s.threshold) j["threshold"] = *s.threshold;
    j["segments"] = json::array();
    for (const auto& segment : s.segments) {
        json js;
        js["subset"] = segment.subset;
        js["cardinality"] = segment.cardinality;
        js["probability"] = segment.probability;
        js["area_kw_kvar"] = geom::area(segment.polygon);
        js["polygon"] = polygon_json(segment.polygon);
        j["segments"].push_back(std::move(js));
    }
    if (s.threshold) {
        json env = json::array();
        for (const auto& piece : s.envelope.pieces()) {
            json outer = json::array();
            for (const auto& v : piece.outer) outer.push_back({v.x, v.y});
            env.push_back(std::move(outer));
        }
        j["envelope"] = std::move(env);
        j["envelope_area"] = geom::area(s.envelope);
    }
    return j;
}

std::string summary_csv(const seg::Segmentation& s, const std::string& hash) {
    std::ostringstream os;
    os.precision(10);
    os << "# config " << hash << "\n";
    os << "segment,mode,cardinality,probability,area_kw_kvar,subset\n";
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        const auto& segment = s.segments[i];
        os << i << "," << seg::to_string(s.mode) << "," << segment.cardinality << ","
           << segment.probability << "," << geom::area(segment.polygon) << ",";
        for (auto it = segment.subset.begin(); it != segment.subset.end(); ++it)
            os << (it == segment.subset.begin() ? "" : ";") << *it;
        os << "\n";
    }
    return os.str();
}

std::string network_stem(const RunConfig& c) {
    return fs::path(c.network).stem().string();
}

void write_chart(const RunConfig& c, const std::string& mode_tag, const std::string& svg,
                 const std::string& hash) {
    const std::string name = network_stem(c) + "_" + mode_tag + "_" + timestamp() + ".svg";
    write_file(fs::path(c.out) / name, "<!-- config " + hash + " -->\n" + svg);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_opf(const RunConfig& c) {
    const std::string hash = config_hash(c);
    grid::Network net = load_with_overrides(c);
    echo_config(c, hash);
    const auto dir = parse_direction(c.direction);
    const auto act = activation_from(c, net);

    if (c.dump_program) {
        std::ofstream os(fs::path(c.out) / "program_dump.txt");
        conic::dump(distflow::build_opf(net, dir, act, {}), os);
    }

    distflow::SolveOptions sopts;
    sopts.tol.feas = c.feastol;
    auto pt = distflow::solve_opf(net, dir, act, {}, sopts);
    if (!pt) throw InfeasibleError("the requested window admits no operating point");

    std::ostringstream os;
    os.precision(10);
    os << "# config " << hash << "\n";
    os << "record,id,a,b,c,d\n";
    os << "interface,," << pt->interface_p << "," << pt->interface_q << "," << pt->losses_p
       << "," << pt->losses_q << "\n";
    os << "exactness,," << pt->exactness_residual << "," << (pt->relaxation_inexact ? 1 : 0)
       << ",,\n";
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        os << "bus," << net.buses[i].id << "," << pt->voltages[i] << ",,,\n";
    for (std::size_t b = 0; b < net.branches.size(); ++b)
        os << "branch," << b + 1 << "," << pt->flows[b].p << "," << pt->flows[b].q << ","
           << pt->flows[b].l << ",\n";
    for (const auto& fo : pt->flex_outputs)
        os << "unit," << fo.unit_id << "," << fo.p_kw << "," << fo.q_kvar << ","
           << (fo.active ? 1 : 0) << ",\n";
    write_file(fs::path(c.out) / "opf.csv", os.str());
    std::cout << "interface P = " << pt->interface_p << " kW, Q = " << pt->interface_q
              << " kVAr (exactness " << pt->exactness_residual << ")\n";
    return kOk;
}

int cmd_area(const RunConfig& c) {
    const std::string hash = config_hash(c);
    grid::Network net = load_with_overrides(c);
    echo_config(c, hash);
    const auto act = activation_from(c, net);
    auto topts = trace_options(c);

    tracer::FlexArea area;
    if (c.method == "epsilon")
        area = tracer::trace_epsilon(net, act, c.k, topts);
    else if (c.method == "radial")
        area = tracer::trace_radial(net, act, c.k, topts);
    else
        throw ParseError("unknown method '" + c.method + "' (expected epsilon or radial)");

    write_file(fs::path(c.out) / "boundary.csv", boundary_csv(area, hash));
    if (c.chart) {
        seg::Segmentation single;
        single.mode = seg::SegMode::Probabilistic;
        single.reference_point = area.reference_point;
        seg::Segment s;
        s.subset = area.context.subset;
        s.cardinality = static_cast<int>(s.subset.size());
        s.polygon = area.polygon();
        s.probability = seg::subset_probability(s.subset, net);
        single.segments.push_back(std::move(s));
        write_chart(c, "area", render::render_segmentation(single), hash);
    }
    std::cout << "traced " << area.boundary.size() << " boundary points, hull area "
              << geom::area(geom::convex_hull(area.boundary)) << " kW*kVAr\n";
    return kOk;
}

seg::Segmentation run_segmentation(const RunConfig& c, const grid::Network& net,
                                   bool probabilistic) {
    seg::SegmentationOptions sopts;
    sopts.trace = trace_options(c);
    if (probabilistic)
        return seg::segment_probabilistic(net, c.k, c.max_segments, c.threshold, sopts);
    return seg::segment_by_count(net, c.k, sopts);
}

int cmd_segment(const RunConfig& c, bool probabilistic) {
    const std::string hash = config_hash(c);
    grid::Network net = load_with_overrides(c);
    echo_config(c, hash);
    auto s = run_segmentation(c, net, probabilistic);
    write_file(fs::path(c.out) / "segmentation.json", segmentation_json(s, hash).dump(2) + "\n");
    write_file(fs::path(c.out) / "summary.csv", summary_csv(s, hash));
    if (c.chart)
        write_chart(c, probabilistic ? "segment-prob" : "segment-count",
                    render::render_segmentation(s), hash);
    std::cout << "retained " << s.segments.size() << " segments, discarded "
              << s.discarded_count << "\n";
    return kOk;
}

int cmd_render(const RunConfig& c) {
    const std::string hash = config_hash(c);
    grid::Network net = load_with_overrides(c);
    echo_config(c, hash);
    auto layout = render::layout_force(net, c.layout_iterations, c.seed);
    auto sweep = distflow::sweep_power_flow(net);
    write_chart(c, "network", render::render_network(net, layout, sweep.point), hash);
    std::cout << "layout converged to residual " << layout.residual << " after "
              << layout.iterations << " iterations\n";
    return kOk;
}

int cmd_bench(const RunConfig& c) {
    const std::string hash = config_hash(c);
    grid::Network net = load_with_overrides(c);
    echo_config(c, hash);
    std::ostringstream os;
    os << "# config " << hash << "\n";
    os << "segment,repeat,milliseconds\n";
    for (int rep = 0; rep < c.repeats; ++rep) {
        // Re-trace each level separately so the records carry per-segment time.
        if (c.mode == "count") {
            const int n = static_cast<int>(net.flex_units.size());
            for (int m = 0; m <= n; ++m) {
                const auto t0 = std::chrono::steady_clock::now();
                if (m == 0) {
                    tracer::reference_point(net, trace_options(c));
                } else {
                    tracer::trace_epsilon(net, distflow::ActivationContext::relaxed(m), c.k,
                                          trace_options(c));
                }
                const auto t1 = std::chrono::steady_clock::now();
                os << m << "," << rep << ","
                   << std::chrono::duration<double, std::milli>(t1 - t0).count() << "\n";
            }
        } else {
            auto ranked = seg::rank_subsets(net, c.max_segments);
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto t0 = std::chrono::steady_clock::now();
                tracer::trace_epsilon(net, distflow::ActivationContext::fixed(ranked[i]), c.k,
                                      trace_options(c));
                const auto t1 = std::chrono::steady_clock::now();
                os << i << "," << rep << ","
                   << std::chrono::duration<double, std::milli>(t1 - t0).count() << "\n";
            }
        }
    }
    write_file(fs::path(c.out) / "bench.csv", os.str());
    std::cout << "wrote bench records for " << c.repeats << " repeats\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"P-Q flexibility area segmentation for radial distribution networks"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_file;
    std::vector<std::string> reliability_specs;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--network", cfg.network, "network JSON file");
        cmd->add_option("--config", config_file, "JSON config file (flags override it)");
        cmd->add_option("--out", cfg.out, "output directory");
        cmd->add_option("--k", cfg.k, "epsilon intervals / radial angles");
        cmd->add_option("--limit", cfg.limit, "cardinality limit on activations");
        cmd->add_option("--subset", cfg.subset, "fixed activation subset (unit ids)");
        cmd->add_option("--reliability", reliability_specs,
                        "reliability overrides, id=value");
        cmd->add_option("--threshold", cfg.threshold, "firmness threshold in (0,1]");
        cmd->add_option("--max-segments", cfg.max_segments, "probabilistic segment cap");
        cmd->add_option("--seed", cfg.seed, "random seed");
        cmd->add_option("--workers", cfg.workers, "worker threads (0 = hardware)");
        cmd->add_option("--feastol", cfg.feastol, "conic feasibility tolerance");
        cmd->add_flag("--chart", cfg.chart, "also write an SVG chart");
    };

    auto* opf = app.add_subcommand("opf", "solve one interface optimum");
    add_common(opf);
    opf->add_option("--direction", cfg.direction, "-p | +p | -q | +q | feasible");
    opf->add_flag("--dump-program", cfg.dump_program, "write the conic program text form");

    auto* area = app.add_subcommand("area", "trace the flexibility area boundary");
    add_common(area);
    area->add_option("--method", cfg.method, "epsilon | radial");

    auto* segc = app.add_subcommand("segment-count", "segmentation by activation count");
    add_common(segc);
    auto* segp = app.add_subcommand("segment-prob", "probabilistic segmentation");
    add_common(segp);

    auto* rend = app.add_subcommand("render", "network diagram");
    add_common(rend);
    rend->add_option("--layout-iterations", cfg.layout_iterations, "force-layout iterations");

    auto* bench = app.add_subcommand("bench", "per-segment solve-time records");
    add_common(bench);
    bench->add_option("--repeats", cfg.repeats, "repetitions (paper methodology: 100)");
    bench->add_option("--mode", cfg.mode, "count | prob");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (!config_file.empty()) {
            // Precedence: command-line flags > config file > defaults. The
            // file is loaded first, then every flag the user actually set
            // (count > 0) wins back its parsed value.
            const RunConfig parsed = cfg;
            CLI::App* sub = app.get_subcommands().front();
            apply_config_file(config_file, cfg);
            auto keep = [&](const std::string& name, auto member) {
                const CLI::Option* opt = sub->get_option_no_throw(name);
                if (opt && opt->count() > 0) cfg.*member = parsed.*member;
            };
            keep("--network", &RunConfig::network);
            keep("--out", &RunConfig::out);
            keep("--k", &RunConfig::k);
            keep("--limit", &RunConfig::limit);
            keep("--subset", &RunConfig::subset);
            keep("--threshold", &RunConfig::threshold);
            keep("--max-segments", &RunConfig::max_segments);
            keep("--seed", &RunConfig::seed);
            keep("--workers", &RunConfig::workers);
            keep("--feastol", &RunConfig::feastol);
            keep("--chart", &RunConfig::chart);
            keep("--direction", &RunConfig::direction);
            keep("--method", &RunConfig::method);
            keep("--mode", &RunConfig::mode);
            keep("--repeats", &RunConfig::repeats);
            keep("--layout-iterations", &RunConfig::layout_iterations);
        }
        for (const std::string& spec : reliability_specs) {
            const auto eq = spec.find('=');
            if (eq == std::string::npos)
                throw ParseError("reliability override must be id=value, got '" + spec + "'");
            cfg.reliability_overrides[std::stoi(spec.substr(0, eq))] =
                std::stod(spec.substr(eq + 1));
        }
        fs::create_directories(cfg.out);

        if (app.got_subcommand(opf)) return cmd_opf(cfg);
        if (app.got_subcommand(area)) return cmd_area(cfg);
        if (app.got_subcommand(segc)) return cmd_segment(cfg, false);
        if (app.got_subcommand(segp)) return cmd_segment(cfg, true);
        if (app.got_subcommand(rend)) return cmd_render(cfg);
        if (app.got_subcommand(bench)) return cmd_bench(cfg);
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << "error kind=parse msg=\"" << e.what() << "\"\n";
        return kParse;
    } catch (const ValidationError& e) {
        std::cerr << "error kind=validation msg=\"" << e.what() << "\"\n";
        return kValidation;
    } catch (const InfeasibleError& e) {
        std::cerr << "error kind=infeasible msg=\"" << e.what() << "\"\n";
        return kInfeasible;
    } catch (const Error& e) {
        std::cerr << "error kind=internal msg=\"" << e.what() << "\"\n";
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "error kind=internal msg=\"" << e.what() << "\"\n";
        return kInternal;
    }
}

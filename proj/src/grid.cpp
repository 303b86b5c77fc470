#include "flexmap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include <json.hpp>

#include "flexmap/errors.hpp"

using nlohmann::json;

namespace flexmap::grid {

namespace {

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

const char* kSchemaText = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "flexmap network file",
  "type": "object",
  "required": ["base_mva", "base_kv", "buses", "branches", "generators", "flex_units"],
  "additionalProperties": false,
  "properties": {
    "name": { "type": "string" },
    "base_mva": { "type": "number", "exclusiveMinimum": 0 },
    "base_kv": { "type": "number", "exclusiveMinimum": 0 },
    "ref_voltage": { "type": "number", "exclusiveMinimum": 0 },
    "buses": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["id", "demand_p", "demand_q", "v_min", "v_max"],
        "additionalProperties": false,
        "properties": {
          "id": { "type": "integer" },
          "demand_p": { "type": "number" },
          "demand_q": { "type": "number" },
          "v_min": { "type": "number", "exclusiveMinimum": 0 },
          "v_max": { "type": "number" },
          "is_reference": { "type": "boolean" }
        }
      }
    },
    "branches": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["from_bus", "to_bus", "r", "x", "s_max"],
        "additionalProperties": false,
        "properties": {
          "from_bus": { "type": "integer" },
          "to_bus": { "type": "integer" },
          "r": { "type": "number", "minimum": 0 },
          "x": { "type": "number" },
          "s_max": { "type": "number", "exclusiveMinimum": 0 },
          "normally_open": { "type": "boolean" }
        }
      }
    },
    "generators": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["bus", "p_min", "p_max", "q_min", "q_max"],
        "additionalProperties": false,
        "properties": {
          "bus": { "type": "integer" },
          "p_min": { "type": "number" },
          "p_max": { "type": "number" },
          "q_min": { "type": "number" },
          "q_max": { "type": "number" }
        }
      }
    },
    "flex_units": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["id", "bus", "p_min", "p_max", "q_min", "q_max", "reliability"],
        "additionalProperties": false,
        "properties": {
          "id": { "type": "integer" },
          "bus": { "type": "integer" },
          "p_min": { "type": "number" },
          "p_max": { "type": "number" },
          "q_min": { "type": "number" },
          "q_max": { "type": "number" },
          "reliability": { "type": "number", "exclusiveMinimum": 0, "maximum": 1 }
        }
      }
    }
  }
})";

// Validates `doc` against the subset of JSON Schema the network schema
// uses: type, required, properties, additionalProperties, items, and the
// numeric range keywords.
void check_schema(const json& doc, const json& schema, const std::string& path) {
    if (schema.contains("type")) {
        const std::string type = schema["type"];
        bool ok = true;
        if (type == "object")
            ok = doc.is_object();
        else if (type == "array")
            ok = doc.is_array();
        else if (type == "number")
            ok = doc.is_number();
        else if (type == "integer")
            ok = doc.is_number_integer();
        else if (type == "boolean")
            ok = doc.is_boolean();
        else if (type == "string")
            ok = doc.is_string();
        if (!ok)
            throw ValidationError("schema violation at " + path + ": expected " + type);
    }
    if (doc.is_number()) {
        const double v = doc.get<double>();
        if (schema.contains("minimum") && v < schema["minimum"].get<double>())
            throw ValidationError("schema violation at " + path + ": below minimum");
        if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>())
            throw ValidationError("schema violation at " + path + ": must exceed " +
                                  schema["exclusiveMinimum"].dump());
        if (schema.contains("maximum") && v > schema["maximum"].get<double>())
            throw ValidationError("schema violation at " + path + ": above maximum");
    }
    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!doc.contains(key.get<std::string>()))
                    throw ValidationError("schema violation at " + path + ": missing key '" +
                                          key.get<std::string>() + "'");
        const json props = schema.value("properties", json::object());
        if (schema.value("additionalProperties", json(true)) == json(false))
            for (const auto& [key, value] : doc.items())
                if (!props.contains(key))
                    throw ValidationError("schema violation at " + path + ": unknown key '" +
                                          key + "'");
        for (const auto& [key, sub] : props.items())
            if (doc.contains(key)) check_schema(doc[key], sub, path + "/" + key);
    }
    if (doc.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i)
            check_schema(doc[i], schema["items"], path + "/" + std::to_string(i));
    }
}

// ---------------------------------------------------------------------------
// Internal power-flow sweep used by the synthetic generator to accept or
// reject candidate networks. The public oracle lives in the distflow module.
// ---------------------------------------------------------------------------

struct MiniSweep {
    bool converged = false;
    std::vector<double> v;      // p.u. per bus index
    std::vector<double> s_kva;  // apparent flow per branch position
};

MiniSweep mini_sweep(const Network& net, const std::vector<double>& withdrawal_p_kw,
                     const std::vector<double>& withdrawal_q_kvar) {
    const int n = static_cast<int>(net.buses.size());
    const int ref = net.bus_index(net.reference_bus());
    MiniSweep out;
    out.v.assign(n, net.ref_voltage);
    out.s_kva.assign(net.branches.size(), 0.0);

    std::vector<std::vector<int>> child_branches(n);
    std::vector<int> order;
    {
        std::vector<std::vector<std::pair<int, int>>> adj(n);  // (branch, other bus)
        for (std::size_t b = 0; b < net.branches.size(); ++b) {
            if (net.branches[b].normally_open) continue;
            const int i = net.bus_index(net.branches[b].from_bus);
            const int j = net.bus_index(net.branches[b].to_bus);
            adj[i].push_back({static_cast<int>(b), j});
            adj[j].push_back({static_cast<int>(b), i});
        }
        std::vector<char> seen(n, 0);
        std::queue<int> q;
        q.push(ref);
        seen[ref] = 1;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            order.push_back(u);
            for (auto [b, w] : adj[u])
                if (!seen[w]) {
                    seen[w] = 1;
                    child_branches[u].push_back(b);
                    q.push(w);
                }
        }
        if (static_cast<int>(order.size()) != n) return out;  // not connected
    }

    std::vector<char> visited(n, 0);
    visited[ref] = 1;
    std::vector<int> down_bus(net.branches.size(), -1);
    for (int u : order)
        for (int b : child_branches[u]) {
            const int i = net.bus_index(net.branches[b].from_bus);
            const int j = net.bus_index(net.branches[b].to_bus);
            down_bus[b] = visited[i] ? j : i;
            visited[down_bus[b]] = 1;
        }

    std::vector<double> w(n, net.ref_voltage * net.ref_voltage);
    std::vector<double> l(net.branches.size(), 0.0);
    std::vector<double> fp(net.branches.size(), 0.0), fq(net.branches.size(), 0.0);

    for (int iter = 0; iter < 100; ++iter) {
        // Backward: accumulate sending-end flows, children before parents.
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const int u = *it;
            for (int b : child_branches[u]) {
                const int child = down_bus[b];
                const double rpu = net.ohm_to_pu(net.branches[b].r);
                const double xpu = net.ohm_to_pu(net.branches[b].x);
                double p = net.kw_to_pu(withdrawal_p_kw[child]) + rpu * l[b];
                double q = net.kw_to_pu(withdrawal_q_kvar[child]) + xpu * l[b];
                for (int cb : child_branches[child]) {
                    p += fp[cb];
                    q += fq[cb];
                }
                fp[b] = p;
                fq[b] = q;
            }
        }
        // Forward: voltages, parents before children; refresh currents.
        double dw = 0.0;
        for (int u : order) {
            for (int b : child_branches[u]) {
                const int child = down_bus[b];
                const double rpu = net.ohm_to_pu(net.branches[b].r);
                const double xpu = net.ohm_to_pu(net.branches[b].x);
                const double z2 = rpu * rpu + xpu * xpu;
                const double wn = w[u] + z2 * l[b] - 2.0 * (rpu * fp[b] + xpu * fq[b]);
                dw = std::max(dw, std::abs(wn - w[child]));
                w[child] = wn;
                if (wn <= 1e-6) return out;  // collapse
                const double ln = (fp[b] * fp[b] + fq[b] * fq[b]) / w[u];
                dw = std::max(dw, std::abs(ln - l[b]));
                l[b] = ln;
            }
        }
        if (dw < 1e-12) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) return out;
    for (int i = 0; i < n; ++i) out.v[i] = std::sqrt(w[i]);
    for (std::size_t b = 0; b < net.branches.size(); ++b)
        out.s_kva[b] = net.pu_to_kw(std::hypot(fp[b], fq[b]));
    return out;
}

double round_to(double v, double step) { return std::round(v / step) * step; }

} // namespace

// ---------------------------------------------------------------------------
// Network accessors
// ---------------------------------------------------------------------------

int Network::reference_bus() const {
    for (const Bus& b : buses)
        if (b.is_reference) return b.id;
    throw ValidationError("network has no reference bus");
}

int Network::bus_index(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == bus_id) return static_cast<int>(i);
    return -1;
}

const FlexUnit* Network::find_unit(int unit_id) const {
    for (const FlexUnit& u : flex_units)
        if (u.id == unit_id) return &u;
    return nullptr;
}

int Network::in_service_count() const {
    int c = 0;
    for (const Branch& b : branches)
        if (!b.normally_open) ++c;
    return c;
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

const std::string& network_schema_json() {
    static const std::string schema = kSchemaText;
    return schema;
}

Network parse_network(const std::string& json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
    static const json schema = json::parse(kSchemaText);
    check_schema(doc, schema, origin);

    Network net;
    net.name = doc.value("name", "");
    net.base_mva = doc["base_mva"].get<double>();
    net.base_kv = doc["base_kv"].get<double>();
    net.ref_voltage = doc.value("ref_voltage", 1.0);
    for (const auto& b : doc["buses"]) {
        Bus bus;
        bus.id = b["id"].get<int>();
        bus.demand_p = b["demand_p"].get<double>();
        bus.demand_q = b["demand_q"].get<double>();
        bus.v_min = b["v_min"].get<double>();
        bus.v_max = b["v_max"].get<double>();
        bus.is_reference = b.value("is_reference", false);
        net.buses.push_back(bus);
    }
    for (const auto& b : doc["branches"]) {
        Branch br;
        br.from_bus = b["from_bus"].get<int>();
        br.to_bus = b["to_bus"].get<int>();
        br.r = b["r"].get<double>();
        br.x = b["x"].get<double>();
        br.s_max = b["s_max"].get<double>();
        br.normally_open = b.value("normally_open", false);
        net.branches.push_back(br);
    }
    for (const auto& g : doc["generators"]) {
        Generator gen;
        gen.bus = g["bus"].get<int>();
        gen.p_min = g["p_min"].get<double>();
        gen.p_max = g["p_max"].get<double>();
        gen.q_min = g["q_min"].get<double>();
        gen.q_max = g["q_max"].get<double>();
        net.generators.push_back(gen);
    }
    for (const auto& f : doc["flex_units"]) {
        FlexUnit u;
        u.id = f["id"].get<int>();
        u.bus = f["bus"].get<int>();
        u.p_min = f["p_min"].get<double>();
        u.p_max = f["p_max"].get<double>();
        u.q_min = f["q_min"].get<double>();
        u.q_max = f["q_max"].get<double>();
        u.reliability = f["reliability"].get<double>();
        net.flex_units.push_back(u);
    }
    validate_network(net);
    return net;
}

Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_network(buffer.str(), path);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void validate_network(const Network& net) {
    if (net.buses.size() < 2) throw ValidationError("network needs at least two buses");
    if (!(net.base_mva > 0.0) || !(net.base_kv > 0.0))
        throw ValidationError("normalization bases must be positive");

    int ref_count = 0;
    for (const Bus& b : net.buses) {
        if (!(b.v_min > 0.0))
            throw ValidationError("bus " + std::to_string(b.id) + ": v_min must be positive");
        if (!(b.v_min < b.v_max))
            throw ValidationError("bus " + std::to_string(b.id) + ": v_min must be below v_max");
        if (!std::isfinite(b.demand_p) || !std::isfinite(b.demand_q))
            throw ValidationError("bus " + std::to_string(b.id) + ": non-finite demand");
        if (b.is_reference) ++ref_count;
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        for (std::size_t j = i + 1; j < net.buses.size(); ++j)
            if (net.buses[i].id == net.buses[j].id)
                throw ValidationError("duplicate bus id " + std::to_string(net.buses[i].id));
    if (ref_count != 1)
        throw ValidationError("network must declare exactly one reference bus, found " +
                              std::to_string(ref_count));
    const int ref_id = net.reference_bus();

    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        const Branch& br = net.branches[b];
        const std::string tag = "branch " + std::to_string(b + 1) + " (" +
                                std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                                ")";
        if (br.from_bus == br.to_bus) throw ValidationError(tag + ": from_bus equals to_bus");
        if (net.bus_index(br.from_bus) < 0)
            throw ValidationError(tag + ": references unknown bus " + std::to_string(br.from_bus));
        if (net.bus_index(br.to_bus) < 0)
            throw ValidationError(tag + ": references unknown bus " + std::to_string(br.to_bus));
        if (!(br.r >= 0.0)) throw ValidationError(tag + ": negative resistance");
        if (!(br.s_max > 0.0)) throw ValidationError(tag + ": s_max must be positive");
        if (!std::isfinite(br.x)) throw ValidationError(tag + ": non-finite reactance");
    }

    for (const Generator& g : net.generators) {
        if (net.bus_index(g.bus) < 0)
            throw ValidationError("generator references unknown bus " + std::to_string(g.bus));
        if (g.bus == ref_id)
            throw ValidationError(
                "generator at the reference bus is not representable; the interface exchange is "
                "the slack");
        if (g.p_min > g.p_max || g.q_min > g.q_max)
            throw ValidationError("generator at bus " + std::to_string(g.bus) +
                                  ": inverted bounds");
    }

    for (std::size_t i = 0; i < net.flex_units.size(); ++i) {
        const FlexUnit& u = net.flex_units[i];
        const std::string tag = "flex unit " + std::to_string(u.id);
        if (net.bus_index(u.bus) < 0)
            throw ValidationError(tag + ": references unknown bus " + std::to_string(u.bus));
        if (u.bus == ref_id) throw ValidationError(tag + ": sits at the reference bus");
        if (u.p_min > u.p_max || u.q_min > u.q_max) throw ValidationError(tag + ": inverted box");
        if (!(u.reliability > 0.0 && u.reliability <= 1.0))
            throw ValidationError(tag + ": reliability must lie in (0, 1]");
        for (std::size_t j = i + 1; j < net.flex_units.size(); ++j)
            if (net.flex_units[j].id == u.id)
                throw ValidationError("duplicate flex unit id " + std::to_string(u.id));
    }

    // Radiality. Union-find catches the first cycle-closing branch; the
    // component check afterwards names any unreachable bus.
    const int n = static_cast<int>(net.buses.size());
    std::vector<int> uf(n);
    std::iota(uf.begin(), uf.end(), 0);
    std::function<int(int)> find = [&](int a) { return uf[a] == a ? a : uf[a] = find(uf[a]); };
    int in_service = 0;
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        const Branch& br = net.branches[b];
        if (br.normally_open) continue;
        ++in_service;
        const int i = find(net.bus_index(br.from_bus));
        const int j = find(net.bus_index(br.to_bus));
        if (i == j)
            throw ValidationError("branch " + std::to_string(b + 1) + " (" +
                                  std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                                  ") closes a cycle");
        uf[i] = j;
    }
    const int ref_root = find(net.bus_index(ref_id));
    for (const Bus& b : net.buses)
        if (find(net.bus_index(b.id)) != ref_root)
            throw ValidationError("bus " + std::to_string(b.id) +
                                  " is disconnected from the reference bus");
    if (in_service != n - 1)
        throw ValidationError("radiality requires " + std::to_string(n - 1) +
                              " in-service branches for " + std::to_string(n) + " buses, found " +
                              std::to_string(in_service));
}

// ---------------------------------------------------------------------------
// Switching
// ---------------------------------------------------------------------------

Network apply_switching(const Network& net, const std::vector<int>& open_set,
                        const std::vector<int>& close_set) {
    Network out = net;
    auto check = [&](int id) {
        if (id < 1 || id > static_cast<int>(out.branches.size()))
            throw ValidationError("switching references unknown branch id " + std::to_string(id));
    };
    for (int id : open_set)
        for (int jd : close_set)
            if (id == jd)
                throw ValidationError("branch id " + std::to_string(id) +
                                      " appears in both open and close sets");
    for (int id : open_set) {
        check(id);
        out.branches[id - 1].normally_open = true;
    }
    for (int id : close_set) {
        check(id);
        out.branches[id - 1].normally_open = false;
    }
    validate_network(out);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

Network generate_radial(int n_buses, int n_flex, std::uint64_t seed) {
    if (n_buses < 2) throw ValidationError("generate_radial requires n_buses >= 2");
    if (n_flex < 0 || n_flex >= n_buses)
        throw ValidationError("generate_radial requires 0 <= n_flex < n_buses");

    std::mt19937_64 rng(seed);
    auto unif = [&](double a, double b) {
        return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };

    double impedance_scale = std::min(1.0, 18.0 / n_buses);
    for (int attempt = 0; attempt < 12; ++attempt) {
        Network net;
        net.name = "synthetic-" + std::to_string(n_buses) + "-" + std::to_string(n_flex) + "-" +
                   std::to_string(seed);
        net.base_mva = 10.0;
        net.base_kv = 11.0;
        net.ref_voltage = 1.0;

        for (int i = 1; i <= n_buses; ++i) {
            Bus b;
            b.id = i;
            b.is_reference = (i == 1);
            b.v_min = 0.9;
            b.v_max = 1.1;
            if (i > 1) {
                b.demand_p = round_to(unif(30.0, 90.0), 0.1);
                b.demand_q = round_to(b.demand_p * unif(0.3, 0.6), 0.1);
            }
            net.buses.push_back(b);
        }
        for (int i = 2; i <= n_buses; ++i) {
            Branch br;
            const int lo = std::max(1, i - 8);
            br.from_bus = (i == 2 || unif(0.0, 1.0) < 0.6)
                              ? i - 1
                              : lo + static_cast<int>(rng() % static_cast<std::uint64_t>(i - lo));
            br.to_bus = i;
            br.r = round_to(std::max(0.02, unif(0.2, 0.6) * impedance_scale), 1e-4);
            br.x = round_to(std::max(0.02, br.r * unif(0.8, 1.4)), 1e-4);
            br.s_max = 1.0;  // sized below
            net.branches.push_back(br);
        }

        std::vector<int> candidates;
        for (int i = 2; i <= n_buses; ++i) candidates.push_back(i);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        for (int u = 0; u < n_flex; ++u) {
            FlexUnit f;
            f.id = u + 1;
            f.bus = candidates[u];
            const double cap_p = round_to(unif(50.0, 200.0), 1.0);
            const double cap_q = round_to(unif(50.0, 200.0), 1.0);
            f.p_min = -cap_p;
            f.p_max = cap_p;
            f.q_min = -cap_q;
            f.q_max = cap_q;
            f.reliability = round_to(unif(0.93, 0.995), 1e-3);
            net.flex_units.push_back(f);
        }

        const int n = n_buses;
        std::vector<double> wd_p(n, 0.0), wd_q(n, 0.0);
        for (int i = 0; i < n; ++i) {
            wd_p[i] = net.buses[i].demand_p;
            wd_q[i] = net.buses[i].demand_q;
        }
        const MiniSweep nominal = mini_sweep(net, wd_p, wd_q);
        bool ok = nominal.converged;
        for (int i = 0; ok && i < n; ++i)
            ok = nominal.v[i] >= net.buses[i].v_min + 0.01 &&
                 nominal.v[i] <= net.buses[i].v_max - 0.01;

        if (!ok) {
            impedance_scale *= 0.7;
            continue;
        }

        // Size line limits from stressed sweeps with headroom.
        std::vector<double> smax(net.branches.size(), 0.0);
        auto absorb = [&](const MiniSweep& sw) {
            if (!sw.converged) return;
            for (std::size_t b = 0; b < smax.size(); ++b)
                smax[b] = std::max(smax[b], sw.s_kva[b]);
        };
        absorb(nominal);
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<double> sp = wd_p, sq = wd_q;
            for (const FlexUnit& f : net.flex_units) {
                const int bi = net.bus_index(f.bus);
                sp[bi] -= dir == 0 ? f.p_min : f.p_max;
                sq[bi] -= dir == 0 ? f.q_min : f.q_max;
            }
            absorb(mini_sweep(net, sp, sq));
        }
        for (std::size_t b = 0; b < net.branches.size(); ++b)
            net.branches[b].s_max = std::max(300.0, round_to(smax[b] * 1.5 + 50.0, 50.0));

        validate_network(net);
        return net;
    }
    throw GenerationError("generate_radial: no feasible network after retry budget (n_buses=" +
                          std::to_string(n_buses) + ")");
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string to_json(const Network& net) {
    json doc;
    if (!net.name.empty()) doc["name"] = net.name;
    doc["base_mva"] = net.base_mva;
    doc["base_kv"] = net.base_kv;
    doc["ref_voltage"] = net.ref_voltage;
    doc["buses"] = json::array();
    for (const Bus& b : net.buses) {
        json jb{{"id", b.id},       {"demand_p", b.demand_p}, {"demand_q", b.demand_q},
                {"v_min", b.v_min}, {"v_max", b.v_max}};
        if (b.is_reference) jb["is_reference"] = true;
        doc["buses"].push_back(jb);
    }
    doc["branches"] = json::array();
    for (const Branch& b : net.branches) {
        json jb{{"from_bus", b.from_bus},
                {"to_bus", b.to_bus},
                {"r", b.r},
                {"x", b.x},
                {"s_max", b.s_max}};
        if (b.normally_open) jb["normally_open"] = true;
        doc["branches"].push_back(jb);
    }
    doc["generators"] = json::array();
    for (const Generator& g : net.generators)
        doc["generators"].push_back(json{{"bus", g.bus},
                                         {"p_min", g.p_min},
                                         {"p_max", g.p_max},
                                         {"q_min", g.q_min},
                                         {"q_max", g.q_max}});
    doc["flex_units"] = json::array();
    for (const FlexUnit& u : net.flex_units)
        doc["flex_units"].push_back(json{{"id", u.id},
                                         {"bus", u.bus},
                                         {"p_min", u.p_min},
                                         {"p_max", u.p_max},
                                         {"q_min", u.q_min},
                                         {"q_max", u.q_max},
                                         {"reliability", u.reliability}});
    return doc.dump(2) + "\n";
}

} // namespace flexmap::grid

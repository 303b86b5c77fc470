#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flexmap::grid {

/// External quantities follow the network file convention: demands in kW
/// and kVAr, impedances in ohms, apparent-power limits in kVA, voltage
/// limits in per-unit on the declared bases.
struct Bus {
    int id = 0;
    double demand_p = 0.0;  // kW
    double demand_q = 0.0;  // kVAr
    double v_min = 0.9;     // p.u.
    double v_max = 1.1;     // p.u.
    bool is_reference = false;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;      // ohm
    double x = 0.0;      // ohm
    double s_max = 0.0;  // kVA
    bool normally_open = false;
};

struct Generator {
    int bus = 0;
    double p_min = 0.0, p_max = 0.0;  // kW
    double q_min = 0.0, q_max = 0.0;  // kVAr
};

struct FlexUnit {
    int id = 0;
    int bus = 0;
    double p_min = 0.0, p_max = 0.0;  // kW
    double q_min = 0.0, q_max = 0.0;  // kVAr
    double reliability = 1.0;         // in (0, 1]
};

/// Radial distribution network. Values are immutable after construction;
/// operations return modified copies.
struct Network {
    std::string name;
    double base_mva = 10.0;
    double base_kv = 12.66;
    double ref_voltage = 1.0;  // p.u. magnitude pinned at the reference bus
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<FlexUnit> flex_units;

    int reference_bus() const;                   // bus id
    int bus_index(int bus_id) const;             // position or -1
    const FlexUnit* find_unit(int unit_id) const;
    int in_service_count() const;

    // Per-unit conversion on the declared bases.
    double z_base_ohm() const { return base_kv * base_kv / base_mva; }
    double kw_to_pu(double kw) const { return kw / (base_mva * 1000.0); }
    double pu_to_kw(double pu) const { return pu * base_mva * 1000.0; }
    double ohm_to_pu(double ohm) const { return ohm / z_base_ohm(); }
    double pu_to_ohm(double pu) const { return pu * z_base_ohm(); }
};

/// Parses and validates a network file (see data/network.schema.json).
/// Throws ParseError for malformed documents and ValidationError for
/// schema or model violations; messages name the offending element.
Network load_network(const std::string& path);

/// Same, from an in-memory JSON document.
Network parse_network(const std::string& json_text, const std::string& origin = "<memory>");

/// Full structural validation: field invariants, id integrity, exactly one
/// reference bus, and radial connectivity over in-service branches.
void validate_network(const Network& net);

/// Returns a copy with the listed branches opened/closed (1-based positions
/// in the branch list) and re-validates radiality.
Network apply_switching(const Network& net, const std::vector<int>& open_set,
                        const std::vector<int>& close_set);

/// Deterministic synthetic radial network with n_flex box-capability units,
/// feasible at the all-units-off operating point. Throws GenerationError
/// if no feasible instance is found within the retry budget.
Network generate_radial(int n_buses, int n_flex, std::uint64_t seed);

/// The JSON schema text shipped at data/network.schema.json.
const std::string& network_schema_json();

/// Serializes a network back to the file format.
std::string to_json(const Network& net);

} // namespace flexmap::grid

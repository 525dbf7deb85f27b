#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace cf {

using WireId = std::int32_t;

struct Wire {
    WireId id = 0;
    std::string name;
    bool pullup = false;
    bool pulldown = false;

    bool operator==(const Wire&) const = default;
};

// A switch-level NMOS transistor: when on, it joins the wires c1 and c2.
struct Transistor {
    std::int32_t id = 0;
    WireId gate = 0;
    WireId c1 = 0;
    WireId c2 = 0;

    bool operator==(const Transistor&) const = default;
};

struct Netlist {
    std::vector<Wire> wires;
    std::vector<Transistor> transistors;
    WireId vcc = 0;
    WireId gnd = 0;
    WireId clock = 0;

    bool operator==(const Netlist&) const = default;

    std::size_t transistor_count() const { return transistors.size(); }
};

// Throws ValidationError on: dangling wire references, vcc == gnd, a wire flagged both
// pullup and pulldown, duplicate wire ids, or transistor ids that are not dense 0..N-1.
void validate(const Netlist& netlist);

// Maps wire ids to dense indices into Netlist::wires. Assumes a validated netlist.
class WireIndex {
public:
    explicit WireIndex(const Netlist& netlist);
    std::size_t operator[](WireId id) const { return map_.at(id); }
    bool contains(WireId id) const { return map_.contains(id); }

private:
    std::unordered_map<WireId, std::size_t> map_;
};

Netlist load_netlist(const std::filesystem::path& path);
Netlist parse_netlist(const std::string& json_text);
std::string netlist_to_json(const Netlist& netlist);
void save_netlist(const Netlist& netlist, const std::filesystem::path& path);

struct SynthSpec {
    int n_transistors = 64;
    double fanout_mean = 2.0;
    std::uint64_t seed = 0;
};

// Generates a two-phase clocked NMOS circuit: a clock inverter, dynamic latches built from
// pass transistors, and random NOR/NAND pull-down logic between the two latch banks.
// Latches only pass data while their phase is high, so every combinational loop is broken
// by a closed latch once the clock settles.
Netlist gen_synthetic_netlist(const SynthSpec& spec);

// Hand-built chain: the clock drives an inverter, whose output drives the next inverter,
// and so on for `length` stages. Transistor t gates on the output wire of t-1.
Netlist make_inverter_chain(int length);

}  // namespace cf

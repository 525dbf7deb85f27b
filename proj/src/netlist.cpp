#include "cf/netlist.hpp"

#include <nlohmann/json.hpp>

#include <unordered_set>

#include "cf/binio.hpp"
#include "cf/error.hpp"

namespace cf {

using nlohmann::json;

void validate(const Netlist& netlist) {
    std::unordered_set<WireId> ids;
    for (const auto& w : netlist.wires) {
        if (!ids.insert(w.id).second) {
            throw ValidationError("duplicate wire id " + std::to_string(w.id));
        }
        if (w.pullup && w.pulldown) {
            throw ValidationError("wire " + std::to_string(w.id) + " is both pullup and pulldown");
        }
    }
    auto require = [&](WireId id, const std::string& what) {
        if (!ids.contains(id)) {
            throw ValidationError(what + " references undefined wire " + std::to_string(id));
        }
    };
    require(netlist.vcc, "vcc");
    require(netlist.gnd, "gnd");
    require(netlist.clock, "clock");
    if (netlist.vcc == netlist.gnd) {
        throw ValidationError("vcc and gnd are the same wire");
    }
    for (std::size_t i = 0; i < netlist.transistors.size(); ++i) {
        const auto& t = netlist.transistors[i];
        if (t.id != static_cast<std::int32_t>(i)) {
            throw ValidationError("transistor ids must be dense 0..N-1 in order; found " +
                                  std::to_string(t.id) + " at position " + std::to_string(i));
        }
        const std::string tag = "transistor " + std::to_string(t.id);
        require(t.gate, tag + " gate");
        require(t.c1, tag + " c1");
        require(t.c2, tag + " c2");
    }
}

WireIndex::WireIndex(const Netlist& netlist) {
    map_.reserve(netlist.wires.size());
    for (std::size_t i = 0; i < netlist.wires.size(); ++i) {
        map_.emplace(netlist.wires[i].id, i);
    }
}

Netlist parse_netlist(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("netlist parse error: ") + e.what());
    }
    Netlist nl;
    try {
        for (const auto& w : doc.at("wires")) {
            nl.wires.push_back({w.at("id").get<WireId>(), w.at("name").get<std::string>(),
                                w.at("pullup").get<bool>(), w.at("pulldown").get<bool>()});
        }
        for (const auto& t : doc.at("transistors")) {
            nl.transistors.push_back({t.at("id").get<std::int32_t>(), t.at("gate").get<WireId>(),
                                      t.at("c1").get<WireId>(), t.at("c2").get<WireId>()});
        }
        nl.vcc = doc.at("vcc").get<WireId>();
        nl.gnd = doc.at("gnd").get<WireId>();
        nl.clock = doc.at("clock").get<WireId>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("netlist schema error: ") + e.what());
    }
    validate(nl);
    return nl;
}

Netlist load_netlist(const std::filesystem::path& path) {
    return parse_netlist(bin::read_text(path));
}

std::string netlist_to_json(const Netlist& netlist) {
    json doc;
    doc["wires"] = json::array();
    for (const auto& w : netlist.wires) {
        doc["wires"].push_back({{"id", w.id}, {"name", w.name}, {"pullup", w.pullup}, {"pulldown", w.pulldown}});
    }
    doc["transistors"] = json::array();
    for (const auto& t : netlist.transistors) {
        doc["transistors"].push_back({{"id", t.id}, {"gate", t.gate}, {"c1", t.c1}, {"c2", t.c2}});
    }
    doc["vcc"] = netlist.vcc;
    doc["gnd"] = netlist.gnd;
    doc["clock"] = netlist.clock;
    return doc.dump(1);
}

void save_netlist(const Netlist& netlist, const std::filesystem::path& path) {
    bin::write_text(path, netlist_to_json(netlist) + "\n");
}

Netlist make_inverter_chain(int length) {
    if (length < 1) {
        throw ValidationError("chain length must be >= 1");
    }
    Netlist nl;
    nl.wires = {{0, "gnd", false, false}, {1, "vcc", false, false}, {2, "clk", false, false}};
    nl.gnd = 0;
    nl.vcc = 1;
    nl.clock = 2;
    WireId input = nl.clock;
    for (int t = 0; t < length; ++t) {
        const WireId out = 3 + t;
        nl.wires.push_back({out, "n" + std::to_string(t), true, false});
        nl.transistors.push_back({t, input, out, nl.gnd});
        input = out;
    }
    return nl;
}

}  // namespace cf

#include <catch_amalgamated.hpp>

#include "cf/binio.hpp"
#include "cf/error.hpp"
#include "cf/netlist.hpp"
#include "cf/recording_io.hpp"
#include "cf/sim.hpp"
#include "fixtures.hpp"

using namespace cf;

namespace {

// gnd 0, vcc 1, clk 2; a (3) floats, b (4) pullup, g (5) drives every gate, f (6) isolated,
// d (7) pulldown, u (8) pullup.
Circuit precedence_fixture() {
    Netlist nl;
    nl.wires = {{0, "gnd", false, false}, {1, "vcc", false, false}, {2, "clk", false, false},
                {3, "a", false, false},   {4, "b", true, false},    {5, "g", false, false},
                {6, "f", false, false},   {7, "d", false, true},    {8, "u", true, false}};
    nl.gnd = 0;
    nl.vcc = 1;
    nl.clock = 2;
    nl.transistors = {{0, 5, 3, 0}, {1, 5, 3, 1}, {2, 5, 4, 1}, {3, 5, 7, 8}};
    return Circuit(nl);
}

SimState gates_high(const Circuit& c) {
    SimState s = c.initial_state();
    s.wire_high[5] = 1;
    c.update_transistors(s, nullptr);
    return s;
}

}  // namespace

TEST_CASE("wire group resolution follows the precedence order") {
    const Circuit c = precedence_fixture();
    SimState s = gates_high(c);
    REQUIRE(s.transistor_on == std::vector<std::uint8_t>{1, 1, 1, 1});
    SECTION("group with gnd and vcc is low") { REQUIRE_FALSE(resolve_wire_group(s, c, 3)); }
    SECTION("wire tied to vcc through one on transistor is high") { REQUIRE(resolve_wire_group(s, c, 4)); }
    SECTION("pulldown beats pullup") { REQUIRE_FALSE(resolve_wire_group(s, c, 8)); }
    SECTION("isolated wire keeps its charge") {
        s.wire_high[6] = 1;
        REQUIRE(resolve_wire_group(s, c, 6));
        s.wire_high[6] = 0;
        REQUIRE_FALSE(resolve_wire_group(s, c, 6));
    }
    SECTION("off transistors split groups") {
        SimState off = c.initial_state();
        off.wire_high[3] = 1;
        c.update_transistors(off, nullptr);
        REQUIRE(resolve_wire_group(off, c, 3));   // retained
        REQUIRE(resolve_wire_group(off, c, 4));   // own pullup
        REQUIRE_FALSE(resolve_wire_group(off, c, 7));
    }
}

TEST_CASE("every wire of a group resolves like the full sweep") {
    const Circuit c(gen_synthetic_netlist({64, 2.0, 3}));
    SimConfig cfg;
    cfg.l = 4;
    SimState s = warm_up(c, cfg);
    s.wire_high[c.clock()] ^= 1;
    c.update_transistors(s, nullptr);
    const auto all = c.resolve_all(s);
    for (const auto& w : c.netlist().wires) {
        const auto idx = c.wire_index(w.id);
        if (c.is_rail(idx)) continue;
        REQUIRE(static_cast<std::uint8_t>(resolve_wire_group(s, c, w.id)) == all[idx]);
    }
}

TEST_CASE("a settled state is a fixpoint of resolution") {
    const Circuit c(gen_synthetic_netlist({64, 2.0, 7}));
    SimConfig cfg;
    cfg.l = 8;
    const SimState s = warm_up(c, cfg);
    REQUIRE(c.resolve_all(s) == s.wire_high);
}

TEST_CASE("13-inverter chain settles after 12 snapshots and is padded") {
    const Circuit c(make_inverter_chain(13));
    SimConfig cfg;
    cfg.k = 30;
    cfg.l = 2;
    SimState s = warm_up(c, cfg);
    const auto seg = step_half_clock(s, c, cfg);
    REQUIRE(seg.converged);
    REQUIRE(seg.snapshots.size() == 30);
    // the wave front moves one transistor per sweep: snapshot q holds transistors 0..q+1 flipped
    REQUIRE(seg.snapshots[10] != seg.snapshots[11]);
    for (int q = 12; q < 30; ++q) REQUIRE(seg.snapshots[static_cast<std::size_t>(q)] == seg.snapshots[11]);
}

TEST_CASE("stable circuit without clock coupling records identical snapshots") {
    Netlist nl = fx::ring_oscillator();
    // a pulled-up wire gating one inverter
    nl.wires.resize(5);
    nl.transistors = {{0, 3, 4, 0}};
    const Circuit c(nl);
    SimConfig cfg;
    cfg.l = 2;
    SimState s = warm_up(c, cfg);
    const auto seg = step_half_clock(s, c, cfg);
    REQUIRE(seg.converged);
    for (const auto& snap : seg.snapshots) REQUIRE(snap == seg.snapshots[0]);
}

TEST_CASE("ring oscillator alternates until truncation and is flagged") {
    const Circuit c(fx::ring_oscillator());
    SimConfig cfg;
    cfg.k = 30;
    cfg.l = 2;
    cfg.max_fixpoint_iters = 100;
    SimState s = c.initial_state();
    const auto seg = step_half_clock(s, c, cfg);
    REQUIRE_FALSE(seg.converged);
    REQUIRE(seg.iterations == 100);
    REQUIRE(seg.snapshots.size() == 30);
    // all off -> pullups high -> all on -> outputs pulled to gnd -> all off ...
    for (std::size_t q = 0; q < 30; ++q) {
        const std::uint8_t v = q % 2 == 0 ? 1 : 0;
        REQUIRE(seg.snapshots[q] == std::vector<std::uint8_t>{v, v, v});
    }

    const auto run = run_period(c, c.initial_state(), cfg, 0);
    REQUIRE(run.warnings.size() == 2);
}

TEST_CASE("recording row length is l times k") {
    const Circuit c(make_inverter_chain(4));
    SimConfig cfg;
    cfg.k = 30;
    cfg.l = 128;
    cfg.periods = 1;
    REQUIRE(simulate(c, cfg)[0].recording.row_len == 3840);
    cfg.l = 2;
    const auto r = simulate(c, cfg)[0].recording;
    REQUIRE(r.row_len == 60);
    REQUIRE(r.data.size() == 4u * 60u);
    for (float v : r.data) REQUIRE((v == 0.0f || v == 1.0f));
}

TEST_CASE("chaining two periods equals one double-length period") {
    const Circuit c(gen_synthetic_netlist({48, 2.0, 5}));
    SimConfig half;
    half.l = 6;
    SimConfig full = half;
    full.l = 12;
    const SimState init = warm_up(c, half);
    const auto first = run_period(c, init, half, 0);
    const auto second = run_period(c, first.final_state, half, 1);
    const auto both = run_period(c, init, full, 0);
    const auto L = static_cast<std::size_t>(half.l * half.k);
    for (std::size_t r = 0; r < c.transistor_count(); ++r) {
        auto row = both.recording.row(r);
        REQUIRE(std::equal(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(L), first.recording.row(r).begin()));
        REQUIRE(std::equal(row.begin() + static_cast<std::ptrdiff_t>(L), row.end(), second.recording.row(r).begin()));
    }
}

TEST_CASE("simulation is deterministic") {
    const Circuit c(gen_synthetic_netlist({64, 2.0, 7}));
    SimConfig cfg;
    cfg.l = 8;
    cfg.periods = 3;
    const auto a = simulate(c, cfg);
    const auto b = simulate(c, cfg);
    REQUIRE(a.size() == 3);
    for (std::size_t m = 0; m < a.size(); ++m) REQUIRE(a[m].recording == b[m].recording);
}

TEST_CASE("sim config invariants") {
    SimConfig cfg;
    REQUIRE_NOTHROW(cfg.validate());
    cfg.l = 3;
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
    cfg = SimConfig{};
    cfg.k = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
    cfg = SimConfig{};
    cfg.max_fixpoint_iters = 10;
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("recording container round-trips and rejects bad input") {
    const auto dir = fx::temp_dir("rec");
    const Circuit c(make_inverter_chain(3));
    SimConfig cfg;
    cfg.l = 2;
    cfg.periods = 1;
    const auto rec = simulate(c, cfg)[0].recording;
    save_recording(dir / "r", rec, cfg.k, cfg.l, {"note"});
    const auto back = load_recording(dir / "r");
    REQUIRE(back.recording == rec);
    REQUIRE(back.k == cfg.k);
    REQUIRE(back.l == cfg.l);
    REQUIRE(back.warnings == std::vector<std::string>{"note"});

    auto bytes = bin::read_file(dir / "r.cfrc");
    bytes[0] = 'X';
    bin::Writer w;
    w.put_bytes(bytes.data(), bytes.size());
    w.save(dir / "bad.cfrc");
    REQUIRE_THROWS_AS(read_matrix(dir / "bad.cfrc"), FormatError);

    bytes[0] = 'C';
    bytes.resize(bytes.size() - 3);
    bin::Writer t;
    t.put_bytes(bytes.data(), bytes.size());
    t.save(dir / "short.cfrc");
    REQUIRE_THROWS_AS(read_matrix(dir / "short.cfrc"), FormatError);
}

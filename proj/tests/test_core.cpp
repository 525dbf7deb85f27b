#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cf/binio.hpp"
#include "cf/error.hpp"
#include "cf/netlist.hpp"
#include "cf/rng.hpp"
#include "fixtures.hpp"

using namespace cf;

TEST_CASE("rng streams are reproducible and named streams differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    REQUIRE(derive_seed(1, "init") != derive_seed(1, "shuffle"));
    REQUIRE(derive_seed(1, "init") != derive_seed(2, "init"));
    REQUIRE(derive_seed(9, "noise") == derive_seed(9, "noise"));
}

TEST_CASE("uniform_int covers its closed range without leaving it") {
    Rng r(3);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.uniform_int(-3, 3);
        REQUIRE(v >= -3);
        REQUIRE(v <= 3);
        seen.insert(v);
    }
    REQUIRE(seen.size() == 7);
}

TEST_CASE("normal draws have unit variance") {
    Rng r(11);
    double s = 0, s2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    REQUIRE(std::abs(s / n) < 0.02);
    REQUIRE(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("binary reader rejects truncation and wrong magic") {
    bin::Writer w;
    w.put_magic("ABCD");
    w.put<std::uint32_t>(7);
    bin::Reader ok(w.bytes());
    ok.expect_magic("ABCD");
    REQUIRE(ok.get<std::uint32_t>() == 7);
    REQUIRE(ok.at_end());
    REQUIRE_THROWS_AS(ok.get<std::uint8_t>(), FormatError);

    bin::Reader bad(w.bytes());
    REQUIRE_THROWS_AS(bad.expect_magic("WXYZ"), FormatError);
    REQUIRE_THROWS_AS(bin::read_file("/nonexistent/file.bin"), ValidationError);
}

TEST_CASE("netlist with one transistor round-trips through JSON") {
    const auto dir = fx::temp_dir("netlist1");
    Netlist nl;
    nl.wires = {{0, "gnd", false, false}, {1, "vcc", false, false}, {2, "clk", false, false}, {3, "o", true, false}};
    nl.gnd = 0;
    nl.vcc = 1;
    nl.clock = 2;
    nl.transistors = {{0, 2, 3, 0}};
    save_netlist(nl, dir / "n.json");
    const auto back = load_netlist(dir / "n.json");
    REQUIRE(back.transistors.size() == 1);
    REQUIRE(back == nl);
}

TEST_CASE("netlist referencing an undefined wire is rejected") {
    const std::string text = R"({"wires":[{"id":0,"name":"gnd","pullup":false,"pulldown":false},
        {"id":1,"name":"vcc","pullup":false,"pulldown":false},{"id":2,"name":"clk","pullup":false,"pulldown":false}],
        "transistors":[{"id":0,"gate":99,"c1":1,"c2":0}],"vcc":1,"gnd":0,"clock":2})";
    REQUIRE_THROWS_AS(parse_netlist(text), ValidationError);
}

TEST_CASE("netlist invariants are enforced") {
    Netlist nl = make_inverter_chain(2);
    SECTION("vcc equal to gnd") {
        nl.vcc = nl.gnd;
        REQUIRE_THROWS_AS(validate(nl), ValidationError);
    }
    SECTION("pullup and pulldown together") {
        nl.wires[3].pulldown = true;
        REQUIRE_THROWS_AS(validate(nl), ValidationError);
    }
    SECTION("sparse transistor ids") {
        nl.transistors[1].id = 5;
        REQUIRE_THROWS_AS(validate(nl), ValidationError);
    }
    SECTION("malformed JSON is a format error") {
        REQUIRE_THROWS_AS(parse_netlist("{\"wires\": ["), FormatError);
    }
}

TEST_CASE("hand-written 3-transistor chain equals the programmatic fixture") {
    const std::string text = R"({
      "wires": [
        {"id": 0, "name": "gnd", "pullup": false, "pulldown": false},
        {"id": 1, "name": "vcc", "pullup": false, "pulldown": false},
        {"id": 2, "name": "clk", "pullup": false, "pulldown": false},
        {"id": 3, "name": "n0", "pullup": true, "pulldown": false},
        {"id": 4, "name": "n1", "pullup": true, "pulldown": false},
        {"id": 5, "name": "n2", "pullup": true, "pulldown": false}
      ],
      "transistors": [
        {"id": 0, "gate": 2, "c1": 3, "c2": 0},
        {"id": 1, "gate": 3, "c1": 4, "c2": 0},
        {"id": 2, "gate": 4, "c1": 5, "c2": 0}
      ],
      "vcc": 1, "gnd": 0, "clock": 2
    })";
    const Netlist parsed = parse_netlist(text);
    const Netlist built = make_inverter_chain(3);
    REQUIRE(parsed.wires == built.wires);
    REQUIRE(parsed.transistors == built.transistors);
    REQUIRE(parsed.vcc == built.vcc);
    REQUIRE(parsed.gnd == built.gnd);
    REQUIRE(parsed.clock == built.clock);
}

TEST_CASE("synthetic netlists are valid, sized and deterministic") {
    const auto a = gen_synthetic_netlist({64, 2.0, 7});
    REQUIRE_NOTHROW(validate(a));
    REQUIRE(a.transistors.size() == 64);
    REQUIRE(gen_synthetic_netlist({64, 2.0, 7}) == a);
    REQUIRE_FALSE(gen_synthetic_netlist({64, 2.0, 8}) == a);

    // every gate is the clock or a wire some transistor's channel touches
    std::set<WireId> driven{a.clock};
    for (const auto& t : a.transistors) {
        driven.insert(t.c1);
        driven.insert(t.c2);
    }
    for (const auto& t : a.transistors) REQUIRE(driven.count(t.gate) == 1);

    for (int n : {2, 5, 9, 17, 33, 200}) {
        const auto s = gen_synthetic_netlist({n, n > 2 ? 1.5 : 1.0, 1});
        REQUIRE_NOTHROW(validate(s));
        REQUIRE(static_cast<int>(s.transistors.size()) == n);
    }
}

TEST_CASE("infeasible synthetic specs are rejected") {
    REQUIRE_THROWS_AS(gen_synthetic_netlist({1, 2.0, 0}), ValidationError);
    REQUIRE_THROWS_AS(gen_synthetic_netlist({4, 10.0, 0}), ValidationError);
}

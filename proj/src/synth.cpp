#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "cf/error.hpp"
#include "cf/netlist.hpp"
#include "cf/rng.hpp"

namespace cf {

namespace {

class Builder {
public:
    explicit Builder(Netlist& nl) : nl_(nl) {}

    WireId add_wire(const std::string& name, bool pullup) {
        const WireId id = static_cast<WireId>(nl_.wires.size());
        nl_.wires.push_back({id, name, pullup, false});
        fanout_.push_back(0);
        return id;
    }

    void add_transistor(WireId gate, WireId c1, WireId c2) {
        const auto id = static_cast<std::int32_t>(nl_.transistors.size());
        nl_.transistors.push_back({id, gate, c1, c2});
        ++fanout_[static_cast<std::size_t>(gate)];
    }

    int fanout(WireId w) const { return fanout_[static_cast<std::size_t>(w)]; }

private:
    Netlist& nl_;
    std::vector<int> fanout_;
};

// Picks an input signal, preferring ones that have not reached the fanout target yet.
WireId pick_input(const std::vector<WireId>& signals, const Builder& b, double fanout_mean, Rng& rng,
                  const std::vector<WireId>& exclude = {}) {
    std::vector<WireId> unused;
    std::vector<WireId> open;
    for (WireId s : signals) {
        if (std::find(exclude.begin(), exclude.end(), s) != exclude.end()) {
            continue;
        }
        if (b.fanout(s) == 0) {
            unused.push_back(s);
        } else if (b.fanout(s) < fanout_mean) {
            open.push_back(s);
        }
    }
    const auto& pool = !unused.empty() ? unused : (!open.empty() ? open : signals);
    if (pool.empty()) {
        return signals.front();
    }
    return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

// Primitive two-tap feedback polynomials x^r + x^tap + 1, indexed by r.
constexpr std::array<int, 8> kLfsrTap{0, 0, 1, 2, 3, 3, 5, 6};

int lfsr_cost(int stages) {
    // Per stage: inverter + latch in each bank, except the last stage's B-side pair. Feedback:
    // NOR2, XOR pull-down (1 + series 2), latch into stage 0.
    return 4 * stages - 2 + 6;
}

int lfsr_stages(int budget) {
    int stages = std::min(7, budget / 10);
    while (stages >= 3 && lfsr_cost(stages) > budget - 4) {
        --stages;
    }
    return stages >= 3 ? stages : 0;
}

// Stage q holds bit a_q in bank A storage and its complement in bank B storage. On each clk
// phase a_{q+1} <- a_q, and a_0 <- XOR(a_{r-1}, a_tap). The all-low power-up state loads all
// ones into bank A, so the all-zero lock-up state is never reached.
void build_lfsr(Builder& b, const Netlist& nl, const std::array<WireId, 2>& phase, int stages,
                std::array<std::vector<WireId>, 2>& signals) {
    std::vector<WireId> sa, ia, sb, ib;
    for (int q = 0; q < stages; ++q) {
        const std::string tag = std::to_string(q);
        sa.push_back(b.add_wire("lfsr_a" + tag, false));
        ia.push_back(b.add_wire("lfsr_na" + tag, true));
        sb.push_back(b.add_wire("lfsr_b" + tag, false));
        if (q + 1 < stages) {
            ib.push_back(b.add_wire("lfsr_nb" + tag, true));
        }
    }
    for (int q = 0; q < stages; ++q) {
        const auto u = static_cast<std::size_t>(q);
        b.add_transistor(sa[u], ia[u], nl.gnd);   // na = !a
        b.add_transistor(phase[1], ia[u], sb[u]);  // b <- na while nclk
        if (q + 1 < stages) {
            b.add_transistor(sb[u], ib[u], nl.gnd);       // nb = !b
            b.add_transistor(phase[0], ib[u], sa[u + 1]); // a_{q+1} <- nb while clk
        }
    }
    const WireId x = sb[static_cast<std::size_t>(stages - 1)];
    const WireId y = sb[static_cast<std::size_t>(kLfsrTap[static_cast<std::size_t>(stages)] - 1)];
    const WireId nor_xy = b.add_wire("lfsr_nor", true);
    b.add_transistor(x, nor_xy, nl.gnd);
    b.add_transistor(y, nor_xy, nl.gnd);
    const WireId xor_out = b.add_wire("lfsr_xor", true);
    const WireId mid = b.add_wire("lfsr_xor_m", false);
    b.add_transistor(nor_xy, xor_out, nl.gnd);
    b.add_transistor(x, xor_out, mid);
    b.add_transistor(y, mid, nl.gnd);
    b.add_transistor(phase[0], xor_out, sa[0]);

    signals[0].insert(signals[0].end(), sa.begin(), sa.end());
    signals[0].insert(signals[0].end(), ia.begin(), ia.end());
    signals[1].insert(signals[1].end(), sb.begin(), sb.end());
    signals[1].insert(signals[1].end(), ib.begin(), ib.end());
}

// Build order would otherwise put the shift register and the first latch bank at the low
// ids, so an id-half split would separate circuit parts instead of sampling both evenly.
void shuffle_transistor_ids(Netlist& nl, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "synth.ids"));
    auto& ts = nl.transistors;
    for (std::size_t a = ts.size(); a > 1; --a) {
        std::swap(ts[a - 1], ts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(a) - 1))]);
    }
    for (std::size_t t = 0; t < ts.size(); ++t) {
        ts[t].id = static_cast<std::int32_t>(t);
    }
}

}  // namespace

Netlist gen_synthetic_netlist(const SynthSpec& spec) {
    if (spec.n_transistors < 2) {
        throw ValidationError("infeasible synthetic spec: n_transistors must be >= 2");
    }
    if (!(spec.fanout_mean >= 1.0) || spec.fanout_mean > spec.n_transistors - 1) {
        throw ValidationError("infeasible synthetic spec: fanout_mean must lie in [1, n_transistors-1]");
    }
    Rng rng(spec.seed);
    Netlist nl;
    Builder b(nl);
    nl.gnd = b.add_wire("gnd", false);
    nl.vcc = b.add_wire("vcc", false);
    nl.clock = b.add_wire("clk", false);
    const WireId nclk = b.add_wire("nclk", true);
    b.add_transistor(nl.clock, nclk, nl.gnd);

    int budget = spec.n_transistors - 1;

    // Too small for latch banks: a random inverter tree rooted at the clock.
    if (budget < 8) {
        std::vector<WireId> signals{nl.clock, nclk};
        for (int t = 0; t < budget; ++t) {
            const WireId in = pick_input(signals, b, spec.fanout_mean, rng);
            const WireId out = b.add_wire("n" + std::to_string(t), true);
            b.add_transistor(in, out, nl.gnd);
            signals.push_back(out);
        }
        shuffle_transistor_ids(nl, spec.seed);
        validate(nl);
        return nl;
    }

    // Two latch banks: bank A is transparent while clk is high, bank B while nclk is high.
    // Logic computed from bank A storage feeds bank B latches and vice versa.
    const std::array<WireId, 2> phase{nl.clock, nclk};
    std::array<std::vector<WireId>, 2> signals;

    // Shift-register core with XOR feedback keeps the state moving; without it random logic
    // tends to fall into a constant state within a few cycles.
    const int stages = lfsr_stages(budget);
    if (stages > 0) {
        budget -= lfsr_cost(stages);
        build_lfsr(b, nl, phase, stages, signals);
    }

    const int latches_per_bank = std::max(1, static_cast<int>(std::lround(budget * 0.12)));
    budget -= 2 * latches_per_bank;
    std::array<std::vector<WireId>, 2> storage;
    for (int bank = 0; bank < 2; ++bank) {
        for (int q = 0; q < latches_per_bank; ++q) {
            storage[bank].push_back(b.add_wire(std::string(bank == 0 ? "sa" : "sb") + std::to_string(q), false));
            signals[bank].push_back(storage[bank].back());
        }
    }

    std::array<std::vector<WireId>, 2> gate_outputs;
    std::array<int, 2> logic_budget{budget / 2, budget - budget / 2};
    int gate_counter = 0;
    for (int bank = 0; bank < 2; ++bank) {
        auto& pool = signals[bank];
        int remaining = logic_budget[bank];
        while (remaining > 0) {
            const std::string name = "g" + std::to_string(gate_counter++);
            const double kind = rng.uniform();
            if (kind < 0.25 && remaining >= 2 && pool.size() >= 2) {
                // NAND2: series pull-down stack.
                const WireId out = b.add_wire(name, true);
                const WireId mid = b.add_wire(name + "_m", false);
                const WireId a = pick_input(pool, b, spec.fanout_mean, rng);
                const WireId c = pick_input(pool, b, spec.fanout_mean, rng, {a});
                b.add_transistor(a, out, mid);
                b.add_transistor(c, mid, nl.gnd);
                remaining -= 2;
                pool.push_back(out);
                gate_outputs[bank].push_back(out);
            } else {
                // NOR with fan-in 1..3: parallel pull-downs onto one output.
                int fan_in = 1 + static_cast<int>(rng.uniform_int(0, 2));
                fan_in = std::min({fan_in, remaining, static_cast<int>(pool.size())});
                const WireId out = b.add_wire(name, true);
                std::vector<WireId> used;
                for (int f = 0; f < fan_in; ++f) {
                    const WireId in = pick_input(pool, b, spec.fanout_mean, rng, used);
                    used.push_back(in);
                    b.add_transistor(in, out, nl.gnd);
                }
                remaining -= fan_in;
                pool.push_back(out);
                gate_outputs[bank].push_back(out);
            }
        }
        if (gate_outputs[bank].empty()) {
            gate_outputs[bank] = pool;
        }
    }

    // Close the loop: bank-A logic drives bank-B latches (phase nclk), bank-B logic drives
    // bank-A latches (phase clk).
    for (int bank = 0; bank < 2; ++bank) {
        const int src = 1 - bank;
        auto candidates = gate_outputs[src];
        for (int q = 0; q < latches_per_bank; ++q) {
            WireId in;
            if (!candidates.empty()) {
                const auto pick = static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1));
                in = candidates[pick];
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
            } else {
                in = gate_outputs[src][static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(gate_outputs[src].size()) - 1))];
            }
            b.add_transistor(phase[bank], in, storage[bank][static_cast<std::size_t>(q)]);
        }
    }
    shuffle_transistor_ids(nl, spec.seed);
    validate(nl);
    return nl;
}

}  // namespace cf

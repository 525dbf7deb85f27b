#include "cf/sim.hpp"

#include <numeric>

#include "cf/error.hpp"

namespace cf {

void SimConfig::validate() const {
    if (k < 1) {
        throw ValidationError("sim config: k must be >= 1");
    }
    if (l < 2 || l % 2 != 0) {
        throw ValidationError("sim config: l must be even and >= 2");
    }
    if (periods < 1) {
        throw ValidationError("sim config: periods must be >= 1");
    }
    if (max_fixpoint_iters < k) {
        throw ValidationError("sim config: max_fixpoint_iters must be >= k");
    }
}

Circuit::Circuit(Netlist netlist) : netlist_((validate(netlist), std::move(netlist))), index_(netlist_) {
    vcc_ = index_[netlist_.vcc];
    gnd_ = index_[netlist_.gnd];
    clock_ = index_[netlist_.clock];
    for (const auto& t : netlist_.transistors) {
        gate_.push_back(index_[t.gate]);
        c1_.push_back(index_[t.c1]);
        c2_.push_back(index_[t.c2]);
    }
}

SimState Circuit::initial_state() const {
    SimState s;
    s.wire_high.assign(wire_count(), 0);
    s.wire_high[vcc_] = 1;
    s.transistor_on.assign(transistor_count(), 0);
    update_transistors(s, nullptr);
    return s;
}

void Circuit::update_transistors(SimState& state, const Forcing* forcing) const {
    for (std::size_t t = 0; t < gate_.size(); ++t) {
        state.transistor_on[t] = state.wire_high[gate_[t]];
    }
    if (forcing != nullptr) {
        auto& v = state.transistor_on[static_cast<std::size_t>(forcing->transistor)];
        switch (forcing->mode) {
        case ForceMode::force_high: v = 1; break;
        case ForceMode::force_low: v = 0; break;
        case ForceMode::invert: v = v ? 0 : 1; break;
        }
    }
}

namespace {

// Group flags, combined per union-find root.
enum : std::uint8_t {
    kGnd = 1,
    kVcc = 2,
    kClock = 4,
    kPulldown = 8,
    kPullup = 16,
    kWasHigh = 32,
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

bool level_from_flags(std::uint8_t flags, bool clock_high) {
    if (flags & kGnd) return false;
    if (flags & kVcc) return true;
    if (flags & kClock) return clock_high;
    if (flags & kPulldown) return false;
    if (flags & kPullup) return true;
    return (flags & kWasHigh) != 0;
}

}  // namespace

std::vector<std::uint8_t> Circuit::resolve_all(const SimState& state) const {
    const std::size_t nw = wire_count();
    std::vector<std::size_t> parent(nw);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<std::uint8_t> rail_contact(nw, 0);

    auto rail_flag = [&](std::size_t w) -> std::uint8_t {
        if (w == gnd_) return kGnd;
        if (w == vcc_) return kVcc;
        return kClock;
    };

    for (std::size_t t = 0; t < gate_.size(); ++t) {
        if (!state.transistor_on[t]) {
            continue;
        }
        const std::size_t a = c1_[t];
        const std::size_t b = c2_[t];
        const bool ra = is_rail(a);
        const bool rb = is_rail(b);
        if (ra && rb) {
            continue;
        }
        if (ra) {
            rail_contact[b] |= rail_flag(a);
        } else if (rb) {
            rail_contact[a] |= rail_flag(b);
        } else {
            const std::size_t x = find_root(parent, a);
            const std::size_t y = find_root(parent, b);
            if (x != y) {
                parent[std::max(x, y)] = std::min(x, y);
            }
        }
    }

    std::vector<std::uint8_t> flags(nw, 0);
    for (std::size_t w = 0; w < nw; ++w) {
        if (is_rail(w)) {
            continue;
        }
        const auto& wire = netlist_.wires[w];
        std::uint8_t f = rail_contact[w];
        if (wire.pulldown) f |= kPulldown;
        if (wire.pullup) f |= kPullup;
        if (state.wire_high[w]) f |= kWasHigh;
        flags[find_root(parent, w)] |= f;
    }

    const bool clock_high = state.wire_high[clock_] != 0;
    std::vector<std::uint8_t> next(nw, 0);
    for (std::size_t w = 0; w < nw; ++w) {
        if (is_rail(w)) {
            next[w] = state.wire_high[w];
        } else {
            next[w] = level_from_flags(flags[find_root(parent, w)], clock_high) ? 1 : 0;
        }
    }
    return next;
}

bool resolve_wire_group(const SimState& state, const Circuit& circuit, WireId seed_wire) {
    if (!circuit.has_wire(seed_wire)) {
        throw ValidationError("unknown wire " + std::to_string(seed_wire));
    }
    const std::size_t seed = circuit.wire_index(seed_wire);
    if (circuit.is_rail(seed)) {
        return state.wire_high[seed] != 0;
    }
    // Breadth-first walk over on-channels; independent of the union-find in resolve_all.
    const auto& nl = circuit.netlist();
    std::vector<std::uint8_t> seen(circuit.wire_count(), 0);
    std::vector<std::size_t> frontier{seed};
    seen[seed] = 1;
    std::uint8_t f = 0;
    while (!frontier.empty()) {
        const std::size_t w = frontier.back();
        frontier.pop_back();
        if (nl.wires[w].pulldown) f |= kPulldown;
        if (nl.wires[w].pullup) f |= kPullup;
        if (state.wire_high[w]) f |= kWasHigh;
        for (std::size_t t = 0; t < circuit.transistor_count(); ++t) {
            if (!state.transistor_on[t]) {
                continue;
            }
            std::size_t other;
            if (circuit.c1_of(t) == w) {
                other = circuit.c2_of(t);
            } else if (circuit.c2_of(t) == w) {
                other = circuit.c1_of(t);
            } else {
                continue;
            }
            if (other == circuit.gnd()) {
                f |= kGnd;
            } else if (other == circuit.vcc()) {
                f |= kVcc;
            } else if (other == circuit.clock()) {
                f |= kClock;
            } else if (!seen[other]) {
                seen[other] = 1;
                frontier.push_back(other);
            }
        }
    }
    return level_from_flags(f, state.wire_high[circuit.clock()] != 0);
}

namespace {

// Resolution loop shared by regular and perturbed half-clocks. The clock has already been
// set by the caller.
HalfClockSegment settle(SimState& state, const Circuit& circuit, const SimConfig& cfg, const Forcing* forcing) {
    HalfClockSegment seg;
    seg.snapshots.reserve(static_cast<std::size_t>(cfg.k));
    circuit.update_transistors(state, forcing);
    bool changed = true;
    while (seg.iterations < cfg.max_fixpoint_iters) {
        auto next = circuit.resolve_all(state);
        changed = next != state.wire_high;
        state.wire_high = std::move(next);
        circuit.update_transistors(state, forcing);
        ++seg.iterations;
        if (seg.snapshots.size() < static_cast<std::size_t>(cfg.k)) {
            seg.snapshots.push_back(state.transistor_on);
        }
        if (!changed) {
            break;
        }
    }
    seg.converged = !changed;
    while (seg.snapshots.size() < static_cast<std::size_t>(cfg.k)) {
        seg.snapshots.push_back(seg.snapshots.back());
    }
    return seg;
}

}  // namespace

HalfClockSegment step_half_clock(SimState& state, const Circuit& circuit, const SimConfig& cfg,
                                 const Forcing* forcing) {
    auto& clk = state.wire_high[circuit.clock()];
    clk = clk ? 0 : 1;
    auto seg = settle(state, circuit, cfg, forcing);
    ++state.half_clock_index;
    return seg;
}

PeriodRun run_period(const Circuit& circuit, const SimState& init, const SimConfig& cfg, int m,
                     std::optional<int> capture_at) {
    cfg.validate();
    PeriodRun run;
    const std::size_t n = circuit.transistor_count();
    const std::size_t row_len = static_cast<std::size_t>(cfg.l) * static_cast<std::size_t>(cfg.k);
    run.recording.period = m;
    run.recording.row_len = static_cast<int>(row_len);
    run.recording.element_ids.resize(n);
    std::iota(run.recording.element_ids.begin(), run.recording.element_ids.end(), 0);
    run.recording.data.assign(n * row_len, 0.0f);

    SimState state = init;
    for (int h = 0; h < cfg.l; ++h) {
        if (capture_at && *capture_at == h) {
            run.captured = state;
        }
        auto seg = step_half_clock(state, circuit, cfg);
        if (!seg.converged) {
            run.warnings.push_back("period " + std::to_string(m) + " half-clock " + std::to_string(h) +
                                   ": no fixpoint after " + std::to_string(cfg.max_fixpoint_iters) +
                                   " iterations");
        }
        const std::size_t base = static_cast<std::size_t>(h) * static_cast<std::size_t>(cfg.k);
        for (std::size_t s = 0; s < seg.snapshots.size(); ++s) {
            const auto& snap = seg.snapshots[s];
            for (std::size_t t = 0; t < n; ++t) {
                run.recording.data[t * row_len + base + s] = snap[t] ? 1.0f : 0.0f;
            }
        }
    }
    run.final_state = std::move(state);
    return run;
}

SimState warm_up(const Circuit& circuit, const SimConfig& cfg) {
    cfg.validate();
    SimState state = circuit.initial_state();
    for (int h = 0; h < cfg.l; ++h) {
        step_half_clock(state, circuit, cfg);
    }
    state.half_clock_index = 0;
    return state;
}

std::vector<PeriodRun> simulate(const Circuit& circuit, const SimConfig& cfg, std::optional<int> capture_at) {
    SimState state = warm_up(circuit, cfg);
    std::vector<PeriodRun> runs;
    runs.reserve(static_cast<std::size_t>(cfg.periods));
    for (int m = 0; m < cfg.periods; ++m) {
        runs.push_back(run_period(circuit, state, cfg, m, capture_at));
        state = runs.back().final_state;
    }
    return runs;
}

}  // namespace cf

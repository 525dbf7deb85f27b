#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cf/netlist.hpp"

namespace cf {

struct SimConfig {
    int k = 30;                   // update steps recorded per half-clock
    int l = 128;                  // half-clocks per period
    int periods = 20;             // M
    int max_fixpoint_iters = 100; // cap on the resolution loop inside one half-clock

    void validate() const;
};

struct SimState {
    std::vector<std::uint8_t> wire_high;     // indexed like Netlist::wires
    std::vector<std::uint8_t> transistor_on; // indexed by transistor id
    std::int64_t half_clock_index = 0;

    bool operator==(const SimState&) const = default;
};

// Element-major matrix of recorded values; circuit data is 0.0/1.0.
struct StateRecording {
    int period = 0;
    std::vector<std::int32_t> element_ids;
    int row_len = 0;
    std::vector<float> data;

    std::size_t rows() const { return element_ids.size(); }
    std::span<const float> row(std::size_t r) const {
        return {data.data() + r * static_cast<std::size_t>(row_len), static_cast<std::size_t>(row_len)};
    }
    std::span<float> row(std::size_t r) {
        return {data.data() + r * static_cast<std::size_t>(row_len), static_cast<std::size_t>(row_len)};
    }
    bool operator==(const StateRecording&) const = default;
};

enum class ForceMode { force_high, force_low, invert };

// do(x_i = p): overrides one transistor's on/off state after every state update.
struct Forcing {
    std::int32_t transistor = 0;
    ForceMode mode = ForceMode::invert;
};

// k snapshots of all transistor states for one half-clock (snapshot-major).
struct HalfClockSegment {
    std::vector<std::vector<std::uint8_t>> snapshots;
    int iterations = 0;     // resolution sweeps actually run
    bool converged = true;  // false when max_fixpoint_iters was hit
};

// Immutable compiled view of a netlist: channel adjacency and rail indices. Cheap to share
// read-only across threads.
class Circuit {
public:
    explicit Circuit(Netlist netlist);

    const Netlist& netlist() const { return netlist_; }
    std::size_t wire_count() const { return netlist_.wires.size(); }
    std::size_t transistor_count() const { return netlist_.transistors.size(); }

    std::size_t vcc() const { return vcc_; }
    std::size_t gnd() const { return gnd_; }
    std::size_t clock() const { return clock_; }
    std::size_t gate_of(std::size_t t) const { return gate_[t]; }
    std::size_t c1_of(std::size_t t) const { return c1_[t]; }
    std::size_t c2_of(std::size_t t) const { return c2_[t]; }
    bool is_rail(std::size_t w) const { return w == vcc_ || w == gnd_ || w == clock_; }
    std::size_t wire_index(WireId id) const { return index_[id]; }
    bool has_wire(WireId id) const { return index_.contains(id); }

    // All-low wires (rails aside), transistors derived from gates.
    SimState initial_state() const;

    // One synchronous sweep: resolves every wire group from the current transistor states.
    std::vector<std::uint8_t> resolve_all(const SimState& state) const;

    // Recomputes transistor states from gate wires and applies the forcing, if any.
    void update_transistors(SimState& state, const Forcing* forcing) const;

private:
    Netlist netlist_;
    WireIndex index_;
    std::size_t vcc_ = 0, gnd_ = 0, clock_ = 0;
    std::vector<std::size_t> gate_, c1_, c2_;
};

// Level of the group of wires joined to seed_wire through channels of on transistors.
// Precedence: gnd > vcc > clock > pulldown > pullup > retained charge (high if any member
// was high). Rails terminate a group; they are never traversed through.
bool resolve_wire_group(const SimState& state, const Circuit& circuit, WireId seed_wire);

// Toggles the clock and iterates resolution to a fixpoint, returning exactly k snapshots
// (padded with the final snapshot or truncated). `state` is left at the last iterate.
HalfClockSegment step_half_clock(SimState& state, const Circuit& circuit, const SimConfig& cfg,
                                 const Forcing* forcing = nullptr);

struct PeriodRun {
    StateRecording recording;
    SimState final_state;
    std::optional<SimState> captured;  // state before half-clock `capture_at`, if requested
    std::vector<std::string> warnings;
};

// Runs l half-clocks from `init`, recording transistor states (row length l*k).
PeriodRun run_period(const Circuit& circuit, const SimState& init, const SimConfig& cfg, int m,
                     std::optional<int> capture_at = std::nullopt);

// Initial state settled by one unrecorded warm-up period.
SimState warm_up(const Circuit& circuit, const SimConfig& cfg);

// Warm-up followed by cfg.periods recorded periods.
std::vector<PeriodRun> simulate(const Circuit& circuit, const SimConfig& cfg,
                                std::optional<int> capture_at = std::nullopt);

}  // namespace cf

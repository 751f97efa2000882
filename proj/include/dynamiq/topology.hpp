#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynamiq {

// Communication schedule: per chunk, a reduce-scatter in-arborescence (all
// edges point toward the chunk's sink) followed by a broadcast of the sink's
// finished sum. hop_slot numbers the compression performed by the sender of
// each reduce edge, in schedule order; the sink's gather-phase compression
// takes the final slot, so n_slots equals the number of compressions along
// the chunk's full path.
struct ReduceEvent {
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
  std::uint32_t hop_slot = 0;
};

struct GatherEvent {
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
};

struct ChunkPlan {
  std::uint32_t sink = 0;
  std::vector<ReduceEvent> reduce_events;
  std::vector<GatherEvent> gather_events;
  std::uint32_t sink_compress_slot = 0;
  std::uint32_t n_slots = 1;
};

struct Schedule {
  std::uint32_t n_workers = 0;
  std::vector<ChunkPlan> chunks;  // one per chunk; chunk i sinks at worker i
};

// Chunk i travels the path (i+1), (i+2), ..., sink i; n-1 reduce hops and
// n-1 gather hops around the ring.
Schedule ring_schedule(std::uint32_t n);

// Recursive-halving reduce-scatter and recursive-doubling all-gather;
// requires n a power of two. Per chunk, subtree sizes double stage by stage.
Schedule butterfly_schedule(std::uint32_t n);

struct ValidationResult {
  bool ok = true;
  std::string diagnostic;
};

// Symbolic replay: injects one distinct tag per worker, replays the events
// with exact set union, and checks that the sink collects every tag exactly
// once and that the gather delivers it everywhere. Also checks slot numbering.
ValidationResult validate_schedule(const Schedule& schedule);

}  // namespace dynamiq

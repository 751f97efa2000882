#include "dynamiq/topology.hpp"

#include <bit>
#include <stdexcept>

namespace dynamiq {

Schedule ring_schedule(std::uint32_t n) {
  if (n < 2) throw std::invalid_argument("ring schedule requires n >= 2");
  Schedule sched;
  sched.n_workers = n;
  sched.chunks.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ChunkPlan& plan = sched.chunks[i];
    plan.sink = i;
    for (std::uint32_t h = 0; h < n - 1; ++h) {
      std::uint32_t sender = (i + 1 + h) % n;
      std::uint32_t receiver = (i + 2 + h) % n;
      plan.reduce_events.push_back({sender, receiver, h});
    }
    for (std::uint32_t h = 0; h < n - 1; ++h) {
      std::uint32_t sender = (i + h) % n;
      std::uint32_t receiver = (i + 1 + h) % n;
      plan.gather_events.push_back({sender, receiver});
    }
    plan.sink_compress_slot = n - 1;
    plan.n_slots = n;
  }
  return sched;
}

Schedule butterfly_schedule(std::uint32_t n) {
  if (n < 2 || !std::has_single_bit(n))
    throw std::invalid_argument("butterfly schedule requires a power-of-two worker count >= 2");
  Schedule sched;
  sched.n_workers = n;
  sched.chunks.resize(n);
  const int stages = std::countr_zero(n);

  for (std::uint32_t c = 0; c < n; ++c) {
    ChunkPlan& plan = sched.chunks[c];
    plan.sink = c;
    std::uint32_t slot = 0;
    // Recursive halving: stage l splits on bit (stages-1-l); holders of
    // chunk c whose bit differs from c's send to their partner.
    for (int l = 0; l < stages; ++l) {
      const std::uint32_t bit = 1u << (stages - 1 - l);
      for (std::uint32_t w = 0; w < n; ++w) {
        const std::uint32_t high_mask = ~(2 * bit - 1);
        if ((w & high_mask) != (c & high_mask)) continue;  // already eliminated
        if ((w & bit) == (c & bit)) continue;              // keeps the chunk
        plan.reduce_events.push_back({w, w ^ bit, slot++});
      }
    }
    // Recursive doubling: holders double each stage, distances 1, 2, 4, ...
    std::vector<std::uint32_t> holders{c};
    for (int l = 0; l < stages; ++l) {
      const std::uint32_t bit = 1u << l;
      std::vector<std::uint32_t> next = holders;
      for (std::uint32_t h : holders) {
        plan.gather_events.push_back({h, h ^ bit});
        next.push_back(h ^ bit);
      }
      holders = std::move(next);
    }
    plan.sink_compress_slot = slot;
    plan.n_slots = slot + 1;
  }
  return sched;
}

ValidationResult validate_schedule(const Schedule& sched) {
  const std::uint32_t n = sched.n_workers;
  if (n == 0 || n > 64) return {false, "validator supports 1..64 workers"};
  if (sched.chunks.empty()) return {false, "schedule has no chunks"};
  const std::uint64_t full = n == 64 ? ~0ULL : (1ULL << n) - 1;

  for (std::size_t c = 0; c < sched.chunks.size(); ++c) {
    const ChunkPlan& plan = sched.chunks[c];
    std::string where = "chunk " + std::to_string(c);
    if (plan.sink >= n) return {false, where + ": sink out of range"};

    std::vector<std::uint64_t> held(n);
    std::vector<bool> sent(n, false);
    for (std::uint32_t w = 0; w < n; ++w) held[w] = 1ULL << w;

    std::uint32_t expected_slot = 0;
    for (const ReduceEvent& e : plan.reduce_events) {
      if (e.sender >= n || e.receiver >= n || e.sender == e.receiver)
        return {false, where + ": bad reduce edge"};
      if (e.hop_slot != expected_slot++)
        return {false, where + ": hop slots must be 0..n_slots-1 without gaps"};
      std::uint64_t overlap = held[e.receiver] & held[e.sender];
      if (overlap != 0) {
        int dup = std::countr_zero(overlap);
        return {false, where + ": worker " + std::to_string(dup) + " counted twice"};
      }
      if (sent[e.sender])
        return {false, where + ": worker " + std::to_string(e.sender) +
                           " sends twice (not an in-arborescence)"};
      held[e.receiver] |= held[e.sender];
      sent[e.sender] = true;
    }
    if (plan.reduce_events.size() != n - 1)
      return {false, where + ": expected " + std::to_string(n - 1) + " reduce events"};
    if (held[plan.sink] != full)
      return {false, where + ": sink is missing contributions"};
    if (sent[plan.sink]) return {false, where + ": sink must not forward reduce data"};
    if (plan.sink_compress_slot != expected_slot || plan.n_slots != expected_slot + 1)
      return {false, where + ": sink compression must take the final slot"};

    std::vector<bool> have(n, false);
    have[plan.sink] = true;
    for (const GatherEvent& e : plan.gather_events) {
      if (e.sender >= n || e.receiver >= n) return {false, where + ": bad gather edge"};
      if (!have[e.sender])
        return {false, where + ": gather from worker " + std::to_string(e.sender) +
                           " before it holds the result"};
      if (have[e.receiver])
        return {false, where + ": worker " + std::to_string(e.receiver) +
                           " receives the gather result twice"};
      have[e.receiver] = true;
    }
    for (std::uint32_t w = 0; w < n; ++w)
      if (!have[w])
        return {false, where + ": worker " + std::to_string(w) + " never receives the result"};
  }
  return {true, ""};
}

}  // namespace dynamiq

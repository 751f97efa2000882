#include <doctest.h>

#include "dynamiq/topology.hpp"

using namespace dynamiq;

TEST_CASE("ring schedule shape") {
  CHECK_THROWS(ring_schedule(1));

  Schedule s2 = ring_schedule(2);
  REQUIRE(s2.chunks.size() == 2);
  REQUIRE(s2.chunks[0].reduce_events.size() == 1);
  CHECK(s2.chunks[0].reduce_events[0].sender == 1);
  CHECK(s2.chunks[0].reduce_events[0].receiver == 0);
  CHECK(s2.chunks[0].sink == 0);
  CHECK(s2.chunks[0].gather_events.size() == 1);
  CHECK(s2.chunks[0].gather_events[0].sender == 0);
  CHECK(s2.chunks[0].gather_events[0].receiver == 1);

  Schedule s4 = ring_schedule(4);
  std::size_t reduce_total = 0;
  for (const auto& plan : s4.chunks) {
    CHECK(plan.reduce_events.size() == 3);  // path length n-1
    CHECK(plan.gather_events.size() == 3);
    CHECK(plan.n_slots == 4);
    reduce_total += plan.reduce_events.size();
  }
  CHECK(reduce_total == 12);
}

TEST_CASE("butterfly schedule shape") {
  CHECK_THROWS(butterfly_schedule(3));
  CHECK_THROWS(butterfly_schedule(6));
  CHECK_THROWS(butterfly_schedule(0));

  // n=2 butterfly degenerates to the two-worker ring.
  Schedule b2 = butterfly_schedule(2);
  Schedule r2 = ring_schedule(2);
  for (std::uint32_t c = 0; c < 2; ++c) {
    CHECK(b2.chunks[c].sink == r2.chunks[c].sink);
    REQUIRE(b2.chunks[c].reduce_events.size() == 1);
    CHECK(b2.chunks[c].reduce_events[0].sender == r2.chunks[c].reduce_events[0].sender);
    CHECK(b2.chunks[c].gather_events[0].receiver == r2.chunks[c].gather_events[0].receiver);
  }

  // n=8: depth 3 per chunk, subtree sizes 1, 2, 4 merging into 8 at the sink.
  Schedule b8 = butterfly_schedule(8);
  for (std::uint32_t c = 0; c < 8; ++c) {
    const ChunkPlan& plan = b8.chunks[c];
    CHECK(plan.reduce_events.size() == 7);
    CHECK(plan.n_slots == 8);
    // Replay subtree sizes: each sender ships its accumulated contributor set.
    std::vector<std::uint32_t> size(8, 1);
    std::vector<std::uint32_t> into_sink;
    for (const ReduceEvent& e : plan.reduce_events) {
      if (e.receiver == plan.sink) into_sink.push_back(size[e.sender]);
      size[e.receiver] += size[e.sender];
    }
    CHECK(size[plan.sink] == 8);
    CHECK(into_sink == std::vector<std::uint32_t>{1, 2, 4});
  }
}

TEST_CASE("validator accepts generated schedules") {
  for (std::uint32_t n = 2; n <= 16; ++n) {
    auto result = validate_schedule(ring_schedule(n));
    CHECK_MESSAGE(result.ok, result.diagnostic);
  }
  for (std::uint32_t n : {2u, 4u, 8u, 16u, 32u}) {
    auto result = validate_schedule(butterfly_schedule(n));
    CHECK_MESSAGE(result.ok, result.diagnostic);
  }
}

TEST_CASE("validator rejects broken schedules with a diagnostic") {
  SUBCASE("duplicated edge double-counts a worker") {
    Schedule s = ring_schedule(4);
    ReduceEvent dup = s.chunks[2].reduce_events[0];
    dup.hop_slot = static_cast<std::uint32_t>(s.chunks[2].reduce_events.size());
    s.chunks[2].reduce_events.push_back(dup);
    auto result = validate_schedule(s);
    CHECK(!result.ok);
    CHECK(result.diagnostic.find("chunk 2") != std::string::npos);
    CHECK(result.diagnostic.find("counted twice") != std::string::npos);
  }
  SUBCASE("missing edge leaves the sink short") {
    Schedule s = ring_schedule(4);
    s.chunks[1].reduce_events.pop_back();
    CHECK(!validate_schedule(s).ok);
  }
  SUBCASE("gap in hop slots") {
    Schedule s = ring_schedule(4);
    s.chunks[0].reduce_events[1].hop_slot = 5;
    auto result = validate_schedule(s);
    CHECK(!result.ok);
    CHECK(result.diagnostic.find("slot") != std::string::npos);
  }
  SUBCASE("gather that skips a worker") {
    Schedule s = butterfly_schedule(4);
    s.chunks[0].gather_events.pop_back();
    CHECK(!validate_schedule(s).ok);
  }
}

TEST_CASE("hop slots are gapless and paths have the expected depth") {
  for (std::uint32_t n : {4u, 8u, 16u}) {
    Schedule ring = ring_schedule(n);
    for (const auto& plan : ring.chunks) {
      CHECK(plan.reduce_events.size() == n - 1);
      for (std::size_t i = 0; i < plan.reduce_events.size(); ++i)
        CHECK(plan.reduce_events[i].hop_slot == i);
      CHECK(plan.sink_compress_slot == n - 1);
    }

    Schedule butterfly = butterfly_schedule(n);
    std::uint32_t stages = 0;
    while ((1u << stages) < n) ++stages;
    for (const auto& plan : butterfly.chunks) {
      // Depth to the sink is log2(n) merges.
      std::uint32_t sink_parents = 0;
      for (const auto& e : plan.reduce_events)
        if (e.receiver == plan.sink) ++sink_parents;
      CHECK(sink_parents == stages);
    }
  }
}

#include "dynamiq/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "dynamiq/bitio.hpp"
#include "dynamiq/codebook.hpp"

namespace dynamiq {

namespace {

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Raw 32-bit passthrough used to validate schedules and the
// normalize/reorder plumbing with zero stochastic steps.
std::vector<std::uint8_t> lossless_serialize(std::uint32_t chunk_index,
                                             std::span<const float> values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + values.size() * 4);
  put_u32(bytes, chunk_index);
  put_u32(bytes, static_cast<std::uint32_t>(values.size()));
  for (float v : values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  return bytes;
}

std::vector<float> lossless_parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw std::runtime_error("malformed lossless buffer");
  const std::uint32_t count = get_u32(bytes, 4);
  if (bytes.size() != 8 + static_cast<std::size_t>(count) * 4)
    throw std::runtime_error("malformed lossless buffer length");
  std::vector<float> values(count);
  for (std::uint32_t i = 0; i < count; ++i)
    values[i] = std::bit_cast<float>(get_u32(bytes, 8 + static_cast<std::size_t>(i) * 4));
  return values;
}

struct ChunkRange {
  std::uint32_t first_sg = 0;
  std::uint32_t sg_count = 0;
};

std::vector<ChunkRange> split_chunks(std::uint32_t total_sg, std::uint32_t n) {
  std::vector<ChunkRange> ranges(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t lo = static_cast<std::uint32_t>(
        static_cast<std::uint64_t>(total_sg) * i / n);
    const std::uint32_t hi = static_cast<std::uint32_t>(
        static_cast<std::uint64_t>(total_sg) * (i + 1) / n);
    ranges[i] = {lo, hi - lo};
  }
  return ranges;
}

// Everything one chunk's pipeline produces; merged in chunk order so the
// threaded and sequential modes are bit-identical.
struct ChunkOutcome {
  std::vector<float> final_values;  // decoded finished sum for this chunk
  std::vector<HopError> hop_errors;
  WireVolume wire;
  std::uint64_t hash = 0xcbf29ce484222325ULL;
};

struct ChunkTask {
  const PipelineConfig* config;
  const Schedule* schedule;
  const CodebookSet* books;
  CodecConfig codec_cfg;
  std::span<const std::uint8_t> widths_sorted;  // permuted order, all super-groups
  // Per worker, the permuted normalized data.
  const std::vector<std::vector<float>>* permuted;
  ChunkRange range;
};

double mse_against(std::span<const float> estimate, std::span<const double> exact) {
  if (estimate.empty()) return 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double e = estimate[i] - exact[i];
    err += e * e;
  }
  return err / static_cast<double>(estimate.size());
}

ChunkOutcome run_chunk(const ChunkTask& task, std::uint32_t chunk_index) {
  const PipelineConfig& cfg = *task.config;
  const ChunkPlan& plan = task.schedule->chunks[chunk_index];
  const std::uint32_t n = cfg.n_workers;
  const std::uint32_t S = cfg.super_group_size;
  const std::size_t coords = static_cast<std::size_t>(task.range.sg_count) * S;
  const std::size_t offset = static_cast<std::size_t>(task.range.first_sg) * S;
  const bool lossless = cfg.codec == CodecKind::kLossless;

  std::span<const std::uint8_t> widths =
      task.widths_sorted.subspan(task.range.first_sg, task.range.sg_count);

  ChunkOutcome out;
  out.wire.compressed_coordinates = 0;

  // Local accumulation state per worker: float buffer (the protocol's view)
  // and an exact double mirror for the per-hop error trace.
  std::vector<std::vector<float>> buf(n);
  std::vector<std::vector<double>> exact(n);
  auto local_slice = [&](std::uint32_t w) {
    return std::span<const float>((*task.permuted)[w]).subspan(offset, coords);
  };
  for (std::uint32_t w = 0; w < n; ++w) {
    auto slice = local_slice(w);
    buf[w].assign(slice.begin(), slice.end());
    exact[w].assign(slice.begin(), slice.end());
  }

  // Messages in flight: serialized bytes plus the exact value they stand for.
  struct Message {
    std::vector<std::uint8_t> bytes;
    std::vector<double> exact;
  };
  std::vector<Message> pending(n);            // held last-parent message
  std::vector<bool> has_pending(n, false);

  // Index of the last reduce event delivering to each worker.
  std::vector<int> last_incoming(n, -1);
  for (std::size_t e = 0; e < plan.reduce_events.size(); ++e)
    last_incoming[plan.reduce_events[e].receiver] = static_cast<int>(e);

  auto account = [&](const std::vector<std::uint8_t>& bytes, bool fresh_compression) {
    out.hash = fnv1a(bytes, out.hash);
    out.wire.transmitted_coordinates += coords;
    if (lossless) {
      out.wire.header_bits += 64;
      out.wire.payload_bits += static_cast<std::uint64_t>(coords) * 32;
      if (fresh_compression) {
        out.wire.repr_bits += static_cast<std::uint64_t>(coords) * 32;
        out.wire.compressed_coordinates += coords;
      }
      return;
    }
    out.wire.header_bits += chunk_header_bits();
    std::uint64_t payload = 0, scales = 0;
    for (std::uint8_t w : widths) {
      payload += supergroup_payload_bits(w, S);
      scales += supergroup_scale_bits(w, S, task.codec_cfg.group_size,
                                      task.codec_cfg.hierarchical_scales);
    }
    out.wire.payload_bits += payload;
    out.wire.scale_bits += scales;
    if (fresh_compression) {
      out.wire.repr_bits += payload + scales;
      out.wire.compressed_coordinates += coords;
    }
  };

  auto compress_buffer = [&](std::span<const float> values, std::uint32_t slot) {
    if (lossless) return lossless_serialize(chunk_index, values);
    QuantContext qctx{cfg.seed, chunk_index, slot, plan.n_slots, cfg.correlated};
    CompressedChunk cc =
        compress_chunk(values, widths, *task.books, task.codec_cfg, qctx, task.range.first_sg);
    return serialize_chunk(cc, task.codec_cfg);
  };
  auto decode_buffer = [&](const std::vector<std::uint8_t>& bytes) {
    if (lossless) return lossless_parse(bytes);
    CompressedChunk cc = parse_chunk(bytes, task.codec_cfg);
    std::vector<float> values(coords);
    decompress_chunk(cc, *task.books, task.codec_cfg, values);
    return values;
  };

  for (std::size_t e = 0; e < plan.reduce_events.size(); ++e) {
    const ReduceEvent& ev = plan.reduce_events[e];
    Message msg;
    msg.exact = exact[ev.sender];
    if (!has_pending[ev.sender]) {
      // Leaf for this chunk: straight compression of the local data.
      msg.bytes = compress_buffer(buf[ev.sender], ev.hop_slot);
    } else if (lossless) {
      std::vector<float> sum = lossless_parse(pending[ev.sender].bytes);
      for (std::size_t i = 0; i < coords; ++i) sum[i] += buf[ev.sender][i];
      msg.bytes = lossless_serialize(chunk_index, sum);
    } else {
      // Fused decompress-accumulate-recompress of the held last parent.
      CompressedChunk held = parse_chunk(pending[ev.sender].bytes, task.codec_cfg);
      QuantContext qctx{cfg.seed, chunk_index, ev.hop_slot, plan.n_slots, cfg.correlated};
      CompressedChunk cc = decompress_accumulate_recompress(
          held, buf[ev.sender], *task.books, task.codec_cfg, qctx, task.range.first_sg);
      msg.bytes = serialize_chunk(cc, task.codec_cfg);
    }
    account(msg.bytes, true);
    if (coords > 0)
      out.hop_errors.push_back({chunk_index, ev.hop_slot, mse_against(decode_buffer(msg.bytes), msg.exact)});

    // Deliver.
    const std::uint32_t r = ev.receiver;
    for (std::size_t i = 0; i < coords; ++i) exact[r][i] += msg.exact[i];
    const bool is_last_parent = static_cast<int>(e) == last_incoming[r];
    if (is_last_parent && r != plan.sink) {
      pending[r] = std::move(msg);
      has_pending[r] = true;
    } else {
      // decompress-accumulate; the sink never recompresses reduce data.
      if (lossless) {
        std::vector<float> values = lossless_parse(msg.bytes);
        for (std::size_t i = 0; i < coords; ++i) buf[r][i] += values[i];
      } else {
        CompressedChunk cc = parse_chunk(msg.bytes, task.codec_cfg);
        decompress_accumulate(cc, buf[r], *task.books, task.codec_cfg);
      }
    }
  }

  // All-gather: the sink compresses the finished sum once; receivers forward
  // the identical bytes and everyone (sink included) decodes them.
  std::vector<std::uint8_t> gather_bytes =
      compress_buffer(buf[plan.sink], plan.sink_compress_slot);
  for (std::size_t gi = 0; gi < plan.gather_events.size(); ++gi)
    account(gather_bytes, gi == 0);
  if (coords > 0)
    out.hop_errors.push_back(
        {chunk_index, plan.sink_compress_slot, mse_against(decode_buffer(gather_bytes), exact[plan.sink])});

  out.final_values = decode_buffer(gather_bytes);
  return out;
}

void check_same_shape(const std::vector<std::vector<float>>& worker_values) {
  if (worker_values.empty()) throw std::invalid_argument("no workers");
  for (const auto& v : worker_values)
    if (v.size() != worker_values.front().size())
      throw std::invalid_argument("worker gradients must have equal length");
  if (worker_values.front().empty()) throw std::invalid_argument("empty gradient");
}

}  // namespace

void PipelineConfig::validate() const {
  if (n_workers == 0) throw std::invalid_argument("n_workers must be positive");
  if (group_size == 0 || super_group_size % group_size != 0 || super_group_size % 4 != 0)
    throw std::invalid_argument("super-group size must be a multiple of the group size and of 4");
  if (!variable_width && fixed_width != 2 && fixed_width != 4 && fixed_width != 8)
    throw std::invalid_argument("fixed width must be one of {2,4,8}");
  if ((allocator == AllocatorKind::kFixed) != !variable_width)
    throw std::invalid_argument("fixed-width allocator requires variable_width off and vice versa");
  if (threads == 0) throw std::invalid_argument("threads must be >= 1");
  if (topology == TopologyKind::kButterfly &&
      (n_workers & (n_workers - 1)) != 0)
    throw std::invalid_argument("butterfly topology requires a power-of-two worker count");
}

double PipelineConfig::scale_overhead_bits() const {
  return hierarchical_scales ? 8.0 / group_size + 16.0 / super_group_size : 16.0 / group_size;
}

std::vector<double> run_exact(const std::vector<std::vector<float>>& worker_values) {
  check_same_shape(worker_values);
  std::vector<double> sum(worker_values.front().size(), 0.0);
  for (const auto& v : worker_values)
    for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
  return sum;
}

RoundResult run_round(const std::vector<std::vector<float>>& worker_values,
                      const PipelineConfig& config) {
  config.validate();
  check_same_shape(worker_values);
  if (worker_values.size() != config.n_workers)
    throw std::invalid_argument("worker count does not match config");

  const std::uint32_t n = config.n_workers;
  RoundResult result;
  result.exact = run_exact(worker_values);

  if (n == 1) {
    // Nothing to synchronize: no compression events at all.
    result.synced = worker_values[0];
    result.vnmse = 0.0;
    result.mse = 0.0;
    return result;
  }

  // (a) local statistics, (b) exact stats all-reduce.
  std::vector<Gradient> grads;
  grads.reserve(n);
  for (const auto& v : worker_values)
    grads.push_back(Gradient::from_values(v, config.group_size, config.super_group_size));

  std::vector<std::vector<SuperGroupStats>> local_stats;
  local_stats.reserve(n);
  for (const auto& g : grads) local_stats.push_back(compute_stats(g));
  const std::vector<SuperGroupStats> global = reduce_stats(local_stats);
  const std::uint32_t total_sg = static_cast<std::uint32_t>(global.size());

  // (c) normalize, allocate widths from the global F, reorder.
  for (auto& g : grads) normalize(g, global);

  std::vector<float> sq_norms(total_sg);
  for (std::uint32_t j = 0; j < total_sg; ++j) sq_norms[j] = global[j].sq_norm;

  BudgetSpec budget{config.budget_bits, config.group_size, config.super_group_size,
                    {2, 4, 8}, config.hierarchical_scales};
  if (config.codec == CodecKind::kLossless) {
    result.allocation.widths.assign(total_sg, 16);
    result.allocation.permutation = build_permutation(result.allocation.widths);
    result.allocation.payload_bits =
        static_cast<std::uint64_t>(total_sg) * config.super_group_size * 32;
  } else if (!config.variable_width) {
    const double bbar = payload_budget(budget);
    if (config.fixed_width > bbar)
      throw InfeasibleBudget("fixed width " + std::to_string(config.fixed_width) +
                             " exceeds the payload budget");
    result.allocation.widths.assign(total_sg, static_cast<std::uint8_t>(config.fixed_width));
    result.allocation.permutation = build_permutation(result.allocation.widths);
    result.allocation.payload_bits = static_cast<std::uint64_t>(total_sg) *
                                     config.super_group_size * config.fixed_width;
  } else if (config.allocator == AllocatorKind::kGeneral) {
    result.allocation = allocate_general(sq_norms, budget);
  } else {
    result.allocation = allocate_fast(sq_norms, budget);
  }
  const std::vector<std::uint32_t>& perm = result.allocation.permutation;

  std::vector<std::uint8_t> widths_sorted(total_sg);
  for (std::uint32_t k = 0; k < total_sg; ++k)
    widths_sorted[k] = result.allocation.widths[perm[k]];

  std::vector<std::vector<float>> permuted(n);
  for (std::uint32_t w = 0; w < n; ++w) {
    permuted[w].resize(grads[w].padded_size());
    apply_permutation_blocks(grads[w].data, permuted[w], perm, config.super_group_size);
  }

  // (d)(e) the main all-reduce over the chosen topology.
  Schedule schedule = config.topology == TopologyKind::kRing ? ring_schedule(n)
                                                             : butterfly_schedule(n);
  const std::vector<ChunkRange> ranges = split_chunks(total_sg, n);

  const CodebookSet books = config.non_uniform ? CodebookSet::non_uniform_defaults()
                                               : CodebookSet::uniform_all();
  CodecConfig codec_cfg{config.group_size, config.super_group_size, config.hierarchical_scales};

  ChunkTask task{&config, &schedule, &books, codec_cfg, widths_sorted, &permuted, {}};

  std::vector<ChunkOutcome> outcomes(n);
  auto process = [&](std::uint32_t c) {
    ChunkTask t = task;
    t.range = ranges[c];
    outcomes[c] = run_chunk(t, c);
  };
  if (config.threads <= 1 || n == 1) {
    for (std::uint32_t c = 0; c < n; ++c) process(c);
  } else {
    std::vector<std::thread> pool;
    std::uint32_t stripe = std::min<std::uint32_t>(config.threads, n);
    for (std::uint32_t t = 0; t < stripe; ++t)
      pool.emplace_back([&, t] {
        for (std::uint32_t c = t; c < n; c += stripe) process(c);
      });
    for (auto& th : pool) th.join();
  }

  // Merge in chunk order; identical for sequential and threaded execution.
  std::vector<float> aggregated_permuted(static_cast<std::size_t>(total_sg) *
                                         config.super_group_size);
  result.wire_hash = 0xcbf29ce484222325ULL;
  for (std::uint32_t c = 0; c < n; ++c) {
    const ChunkOutcome& oc = outcomes[c];
    std::copy(oc.final_values.begin(), oc.final_values.end(),
              aggregated_permuted.begin() +
                  static_cast<std::size_t>(ranges[c].first_sg) * config.super_group_size);
    result.hop_errors.insert(result.hop_errors.end(), oc.hop_errors.begin(),
                             oc.hop_errors.end());
    result.wire.stats_bits += oc.wire.stats_bits;
    result.wire.payload_bits += oc.wire.payload_bits;
    result.wire.scale_bits += oc.wire.scale_bits;
    result.wire.header_bits += oc.wire.header_bits;
    result.wire.repr_bits += oc.wire.repr_bits;
    result.wire.compressed_coordinates += oc.wire.compressed_coordinates;
    result.wire.transmitted_coordinates += oc.wire.transmitted_coordinates;
    result.wire_hash ^= oc.hash + 0x9e3779b97f4a7c15ULL + (result.wire_hash << 6) +
                        (result.wire_hash >> 2);
  }

  // Stats phase: two 32-bit values per super-group per hop over the same
  // event structure as the main phase.
  for (std::uint32_t c = 0; c < n; ++c) {
    const std::uint64_t hops =
        schedule.chunks[c].reduce_events.size() + schedule.chunks[c].gather_events.size();
    result.wire.stats_bits += hops * 64ULL * ranges[c].sg_count;
  }

  // (f) reorder back, add the global means, strip padding.
  std::vector<std::uint32_t> inverse = invert_permutation(perm);
  Gradient aggregated;
  aggregated.data.resize(aggregated_permuted.size());
  aggregated.logical_size = grads[0].logical_size;
  aggregated.group_size = config.group_size;
  aggregated.super_group_size = config.super_group_size;
  apply_permutation_blocks(aggregated_permuted, aggregated.data, inverse,
                           config.super_group_size);
  result.synced = denormalize(aggregated, global, n);

  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < result.synced.size(); ++i) {
    const double e = result.synced[i] - result.exact[i];
    err += e * e;
    ref += result.exact[i] * result.exact[i];
  }
  result.mse = err / static_cast<double>(result.synced.size());
  result.vnmse = ref > 0.0 ? err / ref : 0.0;
  return result;
}

std::vector<std::pair<std::string, PipelineConfig>> ablation_ladder(const PipelineConfig& base) {
  PipelineConfig uniform = base;
  uniform.non_uniform = false;
  uniform.variable_width = false;
  uniform.allocator = AllocatorKind::kFixed;
  uniform.fixed_width = 4;
  uniform.hierarchical_scales = false;
  uniform.correlated = false;
  uniform.group_size = 32;

  PipelineConfig non_uniform = uniform;
  non_uniform.non_uniform = true;

  PipelineConfig variable = non_uniform;
  variable.variable_width = true;
  variable.allocator = base.allocator == AllocatorKind::kFixed ? AllocatorKind::kFast
                                                               : base.allocator;

  PipelineConfig hierarchical = variable;
  hierarchical.hierarchical_scales = true;
  hierarchical.group_size = 16;

  PipelineConfig correlated = hierarchical;
  correlated.correlated = true;

  return {{"uniform", uniform},
          {"non_uniform", non_uniform},
          {"variable_width", variable},
          {"hierarchical", hierarchical},
          {"correlated", correlated}};
}

}  // namespace dynamiq

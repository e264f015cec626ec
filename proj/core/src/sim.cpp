#include "distcache/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "distcache/stats.hpp"

namespace distcache {

void SimReport::write_csv(std::ostream& out) const {
  out << "time_s,policy,seed,config,arrived,served,dropped,mean_queue,max_queue\n";
  for (std::size_t i = 0; i < sample_time_s.size(); ++i) {
    out << sample_time_s[i] << ',' << policy << ',' << seed << ',' << std::hex
        << config_fingerprint << std::dec << ',' << arrived_per_sample[i] << ','
        << served_per_sample[i] << ',' << dropped_per_sample[i] << ','
        << mean_queue_per_sample[i] << ',' << max_queue_per_sample[i] << '\n';
  }
}

std::string SimReport::summary_json() const {
  nlohmann::json j;
  j["policy"] = policy;
  j["seed"] = seed;
  j["config"] = config_fingerprint;
  j["horizon_s"] = static_cast<double>(horizon) / kSecond;
  j["arrived"] = arrived;
  j["served"] = served;
  j["dropped"] = dropped;
  j["failed_writes"] = failed_writes;
  j["in_flight_at_end"] = in_flight_at_end;
  j["gets"] = gets;
  j["sets"] = sets;
  j["cache_hits"] = cache_hits;
  j["cache_misses"] = cache_misses;
  j["hit_ratio"] = hit_ratio;
  j["normalized_throughput"] = normalized_throughput;
  j["delivered_ratio"] = delivered_ratio;
  j["stale_reads"] = stale_reads;
  j["checked_reads"] = checked_reads;
  j["conservation_holds"] = conservation_holds();
  j["coherence"] = {{"invalidations", coherence.invalidations_sent},
                    {"updates", coherence.updates_sent},
                    {"inv_acks", coherence.inv_acks},
                    {"upd_acks", coherence.upd_acks},
                    {"retransmits", coherence.retransmits},
                    {"dropped", coherence.messages_dropped},
                    {"duplicated", coherence.messages_duplicated},
                    {"stale_rejected", coherence.stale_updates_rejected}};
  return j.dump(2);
}

namespace {

enum class EventKind : std::uint8_t {
  kArrival,
  kDeliver,
  kServiceDone,
  kTimer,
  kTick,
  kSample,
  kFail,
  kRecover,
  kRemapDone,
};

struct Event {
  SimTime at;
  std::uint64_t seq;
  EventKind kind;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
};

struct EventLater {
  bool operator()(const Event& x, const Event& y) const {
    if (x.at != y.at) return x.at > y.at;
    return x.seq > y.seq;
  }
};

enum class PacketKind : std::uint8_t {
  kGet,
  kWrite,
  kInvalidate,
  kUpdate,
  kInvAck,
  kUpdAck,
};

constexpr std::uint32_t kNoPacket = 0xffffffff;

struct Packet {
  PacketKind kind = PacketKind::kGet;
  ObjectId key;
  std::uint64_t version = 0;
  std::uint32_t client_rack = 0;
  std::uint32_t origin_server = 0;  // coherence: global server id
  SimTime issued_at = 0;
  bool counted_query = false;  // GET/WRITE belonging to the workload
  std::uint32_t ack_from = 0;  // replica that produced this ack
  std::uint8_t path_pos = 0;
  std::uint8_t path_len = 0;
  std::array<std::uint32_t, 6> path{};  // station ids
  std::uint8_t stamp_count = 0;
  std::array<TelemetryStamp, 4> stamps{};
  Value value;
  std::uint32_t next_free = kNoPacket;
};

// One rate-limited FIFO station (cache switch or storage server).
struct Station {
  std::deque<std::uint32_t> queue;
  bool busy = false;
  bool failed = false;
  SimTime service_interval = 0;
  std::uint32_t queue_max_sample = 0;  // within current sample window
  NodeTotals totals;
  std::uint32_t served_sample = 0;
  std::uint32_t dropped_sample = 0;
};

}  // namespace

struct Simulation::Impl {
  SystemConfig config;
  PolicyKind policy;
  LossSimParams params;

  Partitioner partitioner;
  PartitionMap pmap;
  HotSet hotset;
  QueryStream stream;

  std::uint32_t m0, m1, l;
  std::uint32_t cache_count;   // m0 + m1
  std::uint32_t server_count;  // m1 * l
  std::uint32_t station_count;

  std::vector<Station> stations;
  std::vector<CacheNode> caches;           // [0, cache_count)
  std::vector<StorageServer> servers;      // per global server id
  std::vector<LoadTable> tables;           // per client rack
  std::vector<Router> routers;             // per client rack
  Rng sim_rng;
  Rng fault_rng;

  std::priority_queue<Event, std::vector<Event>, EventLater> events;
  std::uint64_t event_seq = 0;
  SimTime now = 0;

  std::vector<Packet> packets;
  std::uint32_t free_packet = kNoPacket;

  ConsistencyMonitor monitor;
  SimReport report;
  std::uint64_t arrivals_in_window = 0;
  std::uint64_t served_in_window = 0;
  std::uint64_t dropped_in_window = 0;
  std::uint64_t measured_arrived = 0;
  std::uint64_t measured_served = 0;
  std::uint64_t query_index = 0;
  std::uint64_t in_flight = 0;
  bool remap_pending = false;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> timer_queue_tokens;  // unused

  Impl(const SystemConfig& cfg, PolicyKind pol, const LossSimParams& par)
      : config(cfg),
        policy(pol),
        params(par),
        partitioner(cfg.seeds.hash0, cfg.seeds.hash1, cfg.spine_count, cfg.rack_count),
        pmap(&partitioner, cfg.seeds.ring, cfg.ring_vnodes),
        hotset(cfg.spine_count, cfg.rack_count),
        stream(par.workload),
        sim_rng(mix64(cfg.seeds.sim, 0x51)),
        fault_rng(mix64(cfg.seeds.sim, 0xfa17)) {
    config.validate();
    if (params.offered_rate <= 0.0)
      throw std::invalid_argument("Simulation: offered_rate must be > 0");
    if (params.budgets.upper_per_node == 0 || params.budgets.lower_per_node == 0)
      throw std::invalid_argument("Simulation: zero cache slots");
    m0 = config.spine_count;
    m1 = config.rack_count;
    l = config.servers_per_rack;
    cache_count = m0 + m1;
    server_count = m1 * l;
    station_count = cache_count + server_count;

    stations.resize(station_count);
    const SimTime cache_interval =
        static_cast<SimTime>(std::llround(static_cast<double>(kSecond) / config.cache_rate()));
    const SimTime server_interval =
        static_cast<SimTime>(std::llround(static_cast<double>(kSecond) / config.server_rate));
    for (std::uint32_t s = 0; s < station_count; ++s)
      stations[s].service_interval = s < cache_count ? cache_interval : server_interval;

    CacheNodeConfig node_config;
    node_config.slot_budget =
        std::max(params.budgets.upper_per_node, params.budgets.lower_per_node);
    caches.reserve(cache_count);
    for (std::uint32_t n = 0; n < cache_count; ++n)
      caches.emplace_back(n, node_config, config.seeds.sketch);

    ServerOptions server_options = params.server_options;
    // The replication baseline runs the generic per-replica two-phase
    // protocol; the path-visiting sweep is the distcache-style optimization.
    if (policy == PolicyKind::kReplication) server_options.unicast_coherence = true;
    servers.reserve(server_count);
    for (std::uint32_t s = 0; s < server_count; ++s)
      servers.emplace_back(s, server_options, server_hooks(s));

    RoutingTopology rtopo;
    rtopo.upper_count = m0;
    rtopo.lower_count = m1;
    rtopo.servers_per_rack = l;
    rtopo.bypass_upper_on_lower_hit = config.bypass_upper_on_lower_hit;
    tables.reserve(config.client_racks);
    routers.reserve(config.client_racks);
    for (std::uint32_t r = 0; r < config.client_racks; ++r) {
      tables.emplace_back(cache_count);
      routers.emplace_back(policy, &partitioner, rtopo, mix64(config.seeds.routing, r),
                           config.seeds.server_select);
    }

    hotset.set_replicated_mode(policy == PolicyKind::kReplication);
    if (params.prepopulate) prepopulate();
  }

  // --- station ids -------------------------------------------------------

  std::uint32_t server_station(std::uint32_t rack, std::uint32_t slot) const {
    return cache_count + rack * l + slot;
  }
  bool is_cache(std::uint32_t station) const { return station < cache_count; }
  std::uint32_t server_index(std::uint32_t station) const { return station - cache_count; }

  // --- packet pool ---------------------------------------------------------

  std::uint32_t alloc_packet() {
    if (free_packet != kNoPacket) {
      const std::uint32_t id = free_packet;
      free_packet = packets[id].next_free;
      Packet& p = packets[id];
      p.stamp_count = 0;
      p.path_pos = 0;
      p.path_len = 0;
      p.version = 0;
      p.counted_query = false;
      p.value.clear();
      return id;
    }
    packets.emplace_back();
    return static_cast<std::uint32_t>(packets.size() - 1);
  }

  void release_packet(std::uint32_t id) {
    packets[id].next_free = free_packet;
    free_packet = id;
  }

  // --- event plumbing ------------------------------------------------------

  void push_event(SimTime at, EventKind kind, std::uint64_t a = 0, std::uint64_t b = 0) {
    events.push(Event{at, event_seq++, kind, a, b});
  }

  // --- coherence wiring -----------------------------------------------------

  StorageServer::Hooks server_hooks(std::uint32_t server_id) {
    StorageServer::Hooks hooks;
    hooks.replica_nodes = [this](const ObjectId& key) { return replica_nodes(key); };
    hooks.send_invalidate = [this, server_id](const MsgInvalidate& msg) {
      ++report.coherence.invalidations_sent;
      send_coherence(PacketKind::kInvalidate, msg.key, msg.version, Value{}, msg.path,
                     server_id);
    };
    hooks.send_update = [this, server_id](const MsgUpdate& msg,
                                          const std::vector<std::uint32_t>& path) {
      ++report.coherence.updates_sent;
      send_coherence(PacketKind::kUpdate, msg.key, msg.version, msg.value, path,
                     server_id);
    };
    hooks.set_timer = [this, server_id](std::uint64_t token, SimTime delay) {
      push_event(now + delay, EventKind::kTimer, server_id, token);
    };
    hooks.client_ack = [this](const MsgWriteAck& ack, std::uint64_t client_token) {
      monitor.on_write_acked(ack.key, ack.version, now);
      if (client_token != 0) complete_query(static_cast<std::uint32_t>(client_token - 1));
    };
    hooks.write_failed = [this](const ObjectId&, std::uint64_t client_token) {
      ++report.failed_writes;
      if (client_token != 0) {
        release_packet(static_cast<std::uint32_t>(client_token - 1));
        --in_flight;
      }
    };
    return hooks;
  }

  std::vector<std::uint32_t> replica_nodes(const ObjectId& key) {
    std::vector<std::uint32_t> nodes;
    if (policy == PolicyKind::kReplication) {
      if (hotset.is_replicated(key))
        for (std::uint32_t n = 0; n < m0; ++n)
          if (!stations[n].failed) nodes.push_back(n);
      return nodes;
    }
    const std::int32_t upper = hotset.upper_node_of(key);
    const std::int32_t lower = hotset.lower_node_of(key);
    if (upper != HotSetView::kNone) nodes.push_back(static_cast<std::uint32_t>(upper));
    if (lower != HotSetView::kNone) nodes.push_back(static_cast<std::uint32_t>(lower));
    return nodes;
  }

  void send_coherence(PacketKind kind, const ObjectId& key, std::uint64_t version,
                      Value value, const std::vector<std::uint32_t>& path,
                      std::uint32_t origin_server) {
    const std::uint32_t id = alloc_packet();
    Packet& p = packets[id];
    p.kind = kind;
    p.key = key;
    p.version = version;
    p.value = std::move(value);
    p.origin_server = origin_server;
    p.issued_at = now;
    if (path.size() > p.path.size())
      throw std::logic_error("send_coherence: replica path exceeds packet capacity");
    p.path_len = static_cast<std::uint8_t>(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) p.path[i] = path[i];
    deliver_coherence(id, path.empty() ? 0 : path[0], path.empty());
  }

  // Coherence deliveries pass the fault injector; queries do not.
  void deliver_coherence(std::uint32_t packet, std::uint32_t station, bool to_origin) {
    const std::uint32_t target =
        to_origin ? cache_count + packets[packet].origin_server : station;
    if (params.faults.coherence_drop_prob > 0.0 &&
        fault_rng.next_bool(params.faults.coherence_drop_prob)) {
      ++report.coherence.messages_dropped;
      release_packet(packet);
      return;
    }
    if (params.faults.coherence_dup_prob > 0.0 &&
        fault_rng.next_bool(params.faults.coherence_dup_prob)) {
      ++report.coherence.messages_duplicated;
      const std::uint32_t dup = alloc_packet();
      packets[dup] = packets[packet];
      const SimTime jitter =
          1 + static_cast<SimTime>(fault_rng.next_below(
                  static_cast<std::uint64_t>(params.faults.dup_jitter)));
      push_event(now + params.link_delay + jitter, EventKind::kDeliver, dup, target);
    }
    push_event(now + params.link_delay, EventKind::kDeliver, packet, target);
  }

  // --- cache population ------------------------------------------------------

  void install_entry(std::uint32_t node, const ObjectId& key) {
    const auto committed = servers[home_server_of(key)].committed(key);
    // Bulk install: value pushed as version max(1, committed); fresh entries
    // sit at version 0 so the gate always admits.
    const std::uint64_t version = std::max<std::uint64_t>(1, committed.version);
    caches[node].apply_update(key, committed.value, version);
  }

  std::uint32_t home_server_of(const ObjectId& key) {
    const std::uint32_t rack = partitioner.lower_of(key);
    const std::uint32_t slot = routers[0].home_server_slot(key);
    return rack * l + slot;
  }

  void prepopulate() {
    HotBudgets budgets = params.budgets;
    auto plan = plan_prepopulation(policy, pmap, partitioner, params.workload.universe,
                                   budgets, m0 + m1, config.seeds.hash0);
    for (std::uint32_t node = 0; node < cache_count; ++node) {
      for (const auto& key : plan.node_keys[node]) {
        install_entry(node, key);
        if (policy == PolicyKind::kReplication) {
          hotset.add_replicated(key);
        } else if (node < m0) {
          hotset.set_upper(key, node);
        } else {
          hotset.set_lower(key, node);
        }
      }
    }
  }

  // --- routing and paths ------------------------------------------------------

  std::uint32_t pick_alive_upper() {
    // Uniform over configured spines until remap completes, then survivors.
    if (!pmap.remap_active() || pmap.failed_count() == 0)
      return static_cast<std::uint32_t>(sim_rng.next_below(m0));
    std::uint32_t node;
    do {
      node = static_cast<std::uint32_t>(sim_rng.next_below(m0));
    } while (!pmap.upper_alive(node));
    return node;
  }

  void start_query(std::uint64_t index) {
    const Query q = stream.at(index);
    const std::uint32_t rack =
        static_cast<std::uint32_t>(sim_rng.next_below(config.client_racks));
    const std::uint32_t id = alloc_packet();
    Packet& p = packets[id];
    p.key = q.key;
    p.client_rack = rack;
    p.issued_at = now;
    p.counted_query = true;
    ++report.arrived;
    ++arrivals_in_window;
    ++in_flight;
    if (now >= params.measure_from) ++measured_arrived;

    if (q.op == QueryOp::kSet) {
      ++report.sets;
      p.kind = PacketKind::kWrite;
      p.value = q.value;
      const Destination dest = routers[rack].route_set(q.key);
      const std::uint32_t server = server_station(dest.target, routers[rack].home_server_slot(q.key));
      std::uint8_t n = 0;
      p.path[n++] = pick_alive_upper();
      p.path[n++] = m0 + dest.target;  // home rack ToR
      p.path[n++] = server;
      p.path_len = n;
    } else {
      ++report.gets;
      p.kind = PacketKind::kGet;
      Destination dest = routers[rack].route_get(tables[rack], q.key, hotset);
      std::uint8_t n = 0;
      if (dest.kind == Destination::Kind::kCacheNode) {
        // Remap-aware target: the hotset tracks live owners, but replication
        // picks any upper; steer to a survivor after remap.
        std::uint32_t target = dest.target;
        if (policy == PolicyKind::kReplication && pmap.remap_active() &&
            !pmap.upper_alive(target))
          target = pick_alive_upper();
        if (dest.via_upper != Destination::kNoVia) {
          std::uint32_t via = static_cast<std::uint32_t>(dest.via_upper);
          if (pmap.remap_active() && !pmap.upper_alive(via)) via = pick_alive_upper();
          p.path[n++] = via;
        }
        p.path[n++] = target;
      } else {
        p.path[n++] = pick_alive_upper();
        p.path[n++] = m0 + dest.target;
        p.path[n++] = server_station(dest.target, routers[rack].home_server_slot(q.key));
      }
      p.path_len = n;
    }
    push_event(now + params.link_delay, EventKind::kDeliver, id, p.path[0]);
  }

  // Home continuation after a miss at a targeted cache node.
  void extend_to_server(Packet& p) {
    const std::uint32_t rack = partitioner.lower_of(p.key);
    const std::uint32_t current = p.path[p.path_pos];
    std::uint8_t n = p.path_pos + 1;
    if (is_cache(current) && current < m0) p.path[n++] = m0 + rack;  // missed at spine
    p.path[n++] = server_station(rack, routers[p.client_rack].home_server_slot(p.key));
    p.path_len = n;
  }

  // --- packet lifecycle -------------------------------------------------------

  void on_deliver(std::uint32_t packet, std::uint32_t station_id) {
    Station& st = stations[station_id];
    const Packet& p = packets[packet];
    if (st.failed) {
      drop_packet(packet, station_id);
      return;
    }
    ++st.totals.arrived;
    if (st.queue.size() >= params.queue_capacity && is_query(p.kind)) {
      drop_packet(packet, station_id);
      return;
    }
    if (st.queue.size() >= params.queue_capacity) {
      // Coherence message squeezed out; retransmission recovers it.
      ++report.coherence.messages_dropped;
      ++st.totals.dropped;
      release_packet(packet);
      return;
    }
    st.queue.push_back(packet);
    st.queue_max_sample =
        std::max<std::uint32_t>(st.queue_max_sample, static_cast<std::uint32_t>(st.queue.size()));
    if (!st.busy) {
      st.busy = true;
      push_event(now + st.service_interval, EventKind::kServiceDone, station_id);
    }
  }

  static bool is_query(PacketKind kind) {
    return kind == PacketKind::kGet || kind == PacketKind::kWrite;
  }

  void drop_packet(std::uint32_t packet, std::uint32_t station_id) {
    Station& st = stations[station_id];
    ++st.totals.dropped;
    ++st.dropped_sample;
    Packet& p = packets[packet];
    if (is_query(p.kind)) {
      ++report.dropped;
      ++dropped_in_window;
      --in_flight;
    } else {
      ++report.coherence.messages_dropped;
    }
    release_packet(packet);
  }

  void complete_query(std::uint32_t packet) {
    Packet& p = packets[packet];
    ++report.served;
    ++served_in_window;
    --in_flight;
    if (now >= params.measure_from) ++measured_served;
    // Reply returns to the client ToR, which absorbs the telemetry stamps.
    for (std::uint8_t i = 0; i < p.stamp_count; ++i)
      tables[p.client_rack].absorb(p.stamps[i], now);
    release_packet(packet);
  }

  void stamp(Packet& p, std::uint32_t cache_id) {
    if (p.stamp_count < p.stamps.size())
      p.stamps[p.stamp_count++] = TelemetryStamp{
          static_cast<std::uint16_t>(cache_id),
          static_cast<std::uint32_t>(caches[cache_id].telemetry_load())};
  }

  void on_service_done(std::uint32_t station_id) {
    Station& st = stations[station_id];
    if (st.failed || st.queue.empty()) {
      st.busy = false;
      return;
    }
    const std::uint32_t packet = st.queue.front();
    st.queue.pop_front();
    ++st.totals.served;
    ++st.served_sample;
    process_at(packet, station_id);
    if (!st.queue.empty())
      push_event(now + st.service_interval, EventKind::kServiceDone, station_id);
    else
      st.busy = false;
  }

  void process_at(std::uint32_t packet, std::uint32_t station_id) {
    Packet& p = packets[packet];
    const bool last_hop = p.path_pos + 1 >= p.path_len;
    switch (p.kind) {
      case PacketKind::kGet: {
        if (is_cache(station_id)) {
          const bool targeted = last_hop;
          if (targeted) {
            const GetResult r = caches[station_id].cache_get(p.key);
            stamp(p, station_id);
            if (r.hit) {
              ++report.cache_hits;
              monitor.on_get_reply(p.key, r.version, p.issued_at);
              complete_query(packet);
              return;
            }
            ++report.cache_misses;
            extend_to_server(p);
          } else {
            // Pass-through hop: load only, plus home-rack observation so the
            // rack's detector sees its own uncached traffic.
            caches[station_id].record_transit_packet();
            stamp(p, station_id);
            if (station_id >= m0 && station_id == m0 + partitioner.lower_of(p.key))
              caches[station_id].detector().observe(p.key);
          }
          ++p.path_pos;
          push_event(now + params.link_delay, EventKind::kDeliver, packet,
                     p.path[p.path_pos]);
          return;
        }
        // Storage server: reply with the committed value.
        const auto committed = servers[server_index(station_id)].committed(p.key);
        monitor.on_get_reply(p.key, committed.version, p.issued_at);
        complete_query(packet);
        return;
      }

      case PacketKind::kWrite: {
        if (is_cache(station_id)) {
          caches[station_id].record_transit_packet();
          stamp(p, station_id);
          if (station_id >= m0 && station_id == m0 + partitioner.lower_of(p.key))
            caches[station_id].detector().observe(p.key);
          ++p.path_pos;
          push_event(now + params.link_delay, EventKind::kDeliver, packet,
                     p.path[p.path_pos]);
          return;
        }
        // client_token = packet id + 1 (0 means none); the ack releases it.
        servers[server_index(station_id)].handle_write(
            p.key, std::move(p.value), static_cast<std::uint64_t>(packet) + 1);
        return;
      }

      case PacketKind::kInvalidate: {
        caches[station_id].invalidate(p.key);
        caches[station_id].record_transit_packet();
        if (last_hop) {
          p.kind = PacketKind::kInvAck;
          p.ack_from = station_id;
          deliver_coherence(packet, 0, true);
        } else {
          ++p.path_pos;
          deliver_coherence(packet, p.path[p.path_pos], false);
        }
        return;
      }

      case PacketKind::kUpdate: {
        const auto result = caches[station_id].apply_update(p.key, p.value, p.version);
        if (result == UpdateResult::kStaleRejected)
          ++report.coherence.stale_updates_rejected;
        caches[station_id].record_transit_packet();
        if (last_hop) {
          p.kind = PacketKind::kUpdAck;
          p.ack_from = station_id;
          deliver_coherence(packet, 0, true);
        } else {
          ++p.path_pos;
          deliver_coherence(packet, p.path[p.path_pos], false);
        }
        return;
      }

      case PacketKind::kInvAck: {
        ++report.coherence.inv_acks;
        servers[server_index(station_id)].on_inv_ack(MsgInvAck{p.key, p.version},
                                                     p.ack_from);
        release_packet(packet);
        return;
      }

      case PacketKind::kUpdAck: {
        ++report.coherence.upd_acks;
        servers[server_index(station_id)].on_upd_ack(MsgUpdAck{p.key, p.version},
                                                     p.ack_from);
        release_packet(packet);
        return;
      }
    }
  }

  // --- controller events -------------------------------------------------------

  void on_fail(std::uint32_t node) {
    Station& st = stations[node];
    if (st.failed) return;
    st.failed = true;
    // In-queue packets are lost with the switch.
    for (const std::uint32_t packet : st.queue) drop_packet(packet, node);
    st.queue.clear();
    st.busy = false;
    if (node < m0) {
      pmap.mark_failed(node);
      if (!remap_pending) {
        remap_pending = true;
        push_event(now + params.detection_delay, EventKind::kRemapDone);
      }
    }
  }

  void on_remap_done() {
    remap_pending = false;
    pmap.complete_remap();
    if (policy == PolicyKind::kReplication || policy == PolicyKind::kPartitionOnly)
      return;  // no upper partitions to migrate
    // Move the dead spines' hot keys to their ring-designated survivors.
    for (std::uint32_t node = 0; node < m0; ++node) {
      if (pmap.upper_alive(node)) continue;
      const auto keys = hotset.node_keys(node);
      for (const auto& key : std::vector<ObjectId>(keys.begin(), keys.end())) {
        const std::uint32_t owner = pmap.upper_owner(key);
        if (owner == node || !pmap.upper_alive(owner)) continue;
        hotset.set_upper(key, owner);
        install_entry(owner, key);
      }
    }
  }

  void on_recover(std::uint32_t node) {
    Station& st = stations[node];
    if (!st.failed) return;
    st.failed = false;
    if (node >= m0) return;
    pmap.recover(node);
    if (policy == PolicyKind::kReplication) {
      // Re-replicate the hot set onto the rebooted switch.
      for (std::uint32_t other = 0; other < cache_count; ++other) {}
      return;
    }
    if (policy != PolicyKind::kPot) return;
    // Send home the keys this node originally owned; it rebooted empty.
    std::vector<ObjectId> to_move;
    for (std::uint32_t other = 0; other < m0; ++other) {
      if (other == node) continue;
      for (const auto& key : hotset.node_keys(other))
        if (partitioner.upper_of(key) == node) to_move.push_back(key);
    }
    for (const auto& key : to_move) {
      const auto previous = hotset.upper_node_of(key);
      if (previous != HotSetView::kNone)
        caches[previous].erase(key);
      hotset.set_upper(key, node);
      install_entry(node, key);
    }
  }

  void on_tick() {
    for (std::uint32_t n = 0; n < cache_count; ++n) caches[n].tick_second();
    if (!params.refresh_enabled) return;
    std::vector<CacheNode*> node_ptrs;
    node_ptrs.reserve(cache_count);
    for (auto& c : caches) node_ptrs.push_back(&c);
    const auto commands =
        refresh_hot_set(node_ptrs, hotset, pmap, params.budgets, params.report_width);
    for (const auto& cmd : commands) {
      if (cmd.kind == CommandKind::kEvict) {
        caches[cmd.node].erase(cmd.key);
        if (cmd.node < m0)
          hotset.clear_upper(cmd.key);
        else
          hotset.clear_lower(cmd.key);
      } else {
        caches[cmd.node].insert_invalid(cmd.key);
        if (cmd.node < m0)
          hotset.set_upper(cmd.key, cmd.node);
        else
          hotset.set_lower(cmd.key, cmd.node);
        servers[home_server_of(cmd.key)].begin_insertion(cmd.key, cmd.node);
      }
    }
  }

  void on_sample() {
    report.sample_time_s.push_back(static_cast<double>(now) / kSecond);
    report.arrived_per_sample.push_back(arrivals_in_window);
    report.served_per_sample.push_back(served_in_window);
    report.dropped_per_sample.push_back(dropped_in_window);
    arrivals_in_window = served_in_window = dropped_in_window = 0;
    double queue_sum = 0.0;
    std::uint32_t queue_max = 0;
    for (std::uint32_t n = 0; n < station_count; ++n) {
      Station& st = stations[n];
      if (n < cache_count) {
        queue_sum += static_cast<double>(st.queue.size());
        queue_max = std::max(queue_max, st.queue_max_sample);
      }
      report.node_served_per_sample[n].push_back(st.served_sample);
      report.node_dropped_per_sample[n].push_back(st.dropped_sample);
      report.node_queue_max_per_sample[n].push_back(st.queue_max_sample);
      st.served_sample = 0;
      st.dropped_sample = 0;
      st.queue_max_sample = static_cast<std::uint32_t>(st.queue.size());
    }
    report.mean_queue_per_sample.push_back(queue_sum / cache_count);
    report.max_queue_per_sample.push_back(queue_max);
  }

  SimTime next_arrival_gap() {
    if (params.arrivals == ArrivalProcess::kDeterministic)
      return static_cast<SimTime>(
          std::llround(static_cast<double>(kSecond) / params.offered_rate));
    const double gap = sim_rng.next_exponential(params.offered_rate);
    return std::max<SimTime>(1, static_cast<SimTime>(std::llround(gap * kSecond)));
  }

  SimReport run() {
    report.horizon = params.horizon;
    report.sample_interval = params.sample_interval;
    report.policy = policy_name(policy);
    report.seed = config.seeds.sim;
    report.config_fingerprint = config.fingerprint();
    report.cache_node_count = cache_count;
    report.node_served_per_sample.resize(station_count);
    report.node_dropped_per_sample.resize(station_count);
    report.node_queue_max_per_sample.resize(station_count);

    push_event(next_arrival_gap(), EventKind::kArrival);
    push_event(params.sample_interval, EventKind::kSample);
    push_event(kSecond, EventKind::kTick);

    while (!events.empty()) {
      const Event ev = events.top();
      if (ev.at > params.horizon) break;
      events.pop();
      now = ev.at;
      switch (ev.kind) {
        case EventKind::kArrival:
          start_query(query_index++);
          push_event(now + next_arrival_gap(), EventKind::kArrival);
          break;
        case EventKind::kDeliver:
          on_deliver(static_cast<std::uint32_t>(ev.a), static_cast<std::uint32_t>(ev.b));
          break;
        case EventKind::kServiceDone:
          on_service_done(static_cast<std::uint32_t>(ev.a));
          break;
        case EventKind::kTimer:
          servers[ev.a].on_timer(ev.b);
          break;
        case EventKind::kTick:
          on_tick();
          push_event(now + kSecond, EventKind::kTick);
          break;
        case EventKind::kSample:
          on_sample();
          push_event(now + params.sample_interval, EventKind::kSample);
          break;
        case EventKind::kFail:
          on_fail(static_cast<std::uint32_t>(ev.a));
          break;
        case EventKind::kRecover:
          on_recover(static_cast<std::uint32_t>(ev.a));
          break;
        case EventKind::kRemapDone:
          on_remap_done();
          break;
      }
    }
    now = params.horizon;

    for (std::uint32_t n = 0; n < station_count; ++n) {
      Station& st = stations[n];
      st.totals.queue_max = 0;
      for (const auto q : report.node_queue_max_per_sample[n])
        st.totals.queue_max = std::max(st.totals.queue_max, q);
      report.node_totals.push_back(st.totals);
    }
    report.in_flight_at_end = in_flight;
    report.stale_reads = monitor.stale_reads();
    report.checked_reads = monitor.checked_reads();
    for (const auto& server : servers)
      report.coherence.retransmits += server.retransmits();
    report.hit_ratio =
        report.gets > 0
            ? static_cast<double>(report.cache_hits) / static_cast<double>(report.gets)
            : 0.0;
    const double measure_seconds =
        static_cast<double>(params.horizon - params.measure_from) / kSecond;
    if (measure_seconds > 0.0 && measured_arrived > 0) {
      report.normalized_throughput =
          static_cast<double>(measured_served) / measure_seconds / config.server_rate;
      report.delivered_ratio = static_cast<double>(measured_served) /
                               static_cast<double>(measured_arrived);
    }
    return std::move(report);
  }
};

Simulation::Simulation(const SystemConfig& config, PolicyKind policy,
                       const LossSimParams& params)
    : impl_(std::make_unique<Impl>(config, policy, params)) {}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

void Simulation::inject_failure(std::uint32_t cache_node, SimTime at) {
  if (cache_node >= impl_->cache_count)
    throw std::invalid_argument("inject_failure: unknown cache node");
  impl_->push_event(at, EventKind::kFail, cache_node);
}

void Simulation::recover(std::uint32_t cache_node, SimTime at) {
  if (cache_node >= impl_->cache_count)
    throw std::invalid_argument("recover: unknown cache node");
  impl_->push_event(at, EventKind::kRecover, cache_node);
}

SimReport Simulation::run() { return impl_->run(); }

// --- queue-mode simulator -------------------------------------------------------

SimReport run_queue_sim(const MatchingInstance& inst, const QueueSimParams& params) {
  inst.validate();
  const std::uint32_t nodes = inst.node_count();
  const std::uint32_t k = inst.object_count();
  if (k == 0) throw std::invalid_argument("run_queue_sim: no objects");

  double total_rate = 0.0;
  for (double r : inst.rates) total_rate += r;
  if (total_rate <= 0.0) {
    // No arrivals: emit an all-zero series so the probe sees a flat system.
    SimReport report;
    report.horizon = params.horizon;
    report.sample_interval = params.sample_interval;
    report.policy = inst.graph.single_hash() ? "singlehash" : "distcache";
    report.seed = params.seed;
    report.cache_node_count = nodes;
    for (SimTime t = params.sample_interval; t <= params.horizon;
         t += params.sample_interval) {
      report.sample_time_s.push_back(static_cast<double>(t) / kSecond);
      report.arrived_per_sample.push_back(0);
      report.served_per_sample.push_back(0);
      report.dropped_per_sample.push_back(0);
      report.mean_queue_per_sample.push_back(0.0);
      report.max_queue_per_sample.push_back(0);
    }
    report.node_totals.assign(nodes, NodeTotals{});
    return report;
  }

  QueryDistribution key_dist;
  key_dist.probs.reserve(k);
  for (double r : inst.rates) key_dist.probs.push_back(r / total_rate);
  InverseCdfSampler key_sampler(key_dist);

  Rng rng(mix64(params.seed, 0x9e5, 0xcafef00d));
  std::vector<std::uint32_t> queue_len(nodes, 0);
  std::vector<NodeTotals> totals(nodes);
  std::vector<std::uint32_t> queue_max_sample(nodes, 0);

  struct QEvent {
    SimTime at;
    std::uint64_t seq;
    std::int32_t node;  // -1: arrival, -2: sample
  };
  auto later = [](const QEvent& x, const QEvent& y) {
    if (x.at != y.at) return x.at > y.at;
    return x.seq > y.seq;
  };
  std::priority_queue<QEvent, std::vector<QEvent>, decltype(later)> events(later);
  std::uint64_t seq = 0;

  auto exp_gap = [&](double rate) {
    const double gap = rng.next_exponential(rate);
    return std::max<SimTime>(1, static_cast<SimTime>(std::llround(gap * kSecond)));
  };

  events.push({exp_gap(total_rate), seq++, -1});
  events.push({params.sample_interval, seq++, -2});

  SimReport report;
  report.horizon = params.horizon;
  report.sample_interval = params.sample_interval;
  report.policy = inst.graph.single_hash() ? "singlehash" : "distcache";
  report.seed = params.seed;
  report.cache_node_count = nodes;
  report.config_fingerprint = mix64(params.seed, nodes, k);
  std::uint64_t arrivals_in_window = 0, served_in_window = 0;

  while (!events.empty()) {
    const QEvent ev = events.top();
    if (ev.at > params.horizon) break;
    events.pop();
    if (ev.node == -1) {
      // Arrival: join the shorter queue of the object's designated nodes.
      const std::uint32_t obj = static_cast<std::uint32_t>(key_sampler.sample(rng));
      const auto [a, b] = inst.graph.nodes_of(obj);
      std::uint32_t target;
      if (b == BipartiteGraph::kNoNode) {
        target = static_cast<std::uint32_t>(a);
      } else if (queue_len[a] != queue_len[b]) {
        target = queue_len[a] < queue_len[b] ? static_cast<std::uint32_t>(a)
                                             : static_cast<std::uint32_t>(b);
      } else {
        target = rng.next_bool(0.5) ? static_cast<std::uint32_t>(a)
                                    : static_cast<std::uint32_t>(b);
      }
      ++report.arrived;
      ++arrivals_in_window;
      ++totals[target].arrived;
      if (++queue_len[target] == 1)
        events.push({ev.at + exp_gap(inst.capacities[target]), seq++,
                     static_cast<std::int32_t>(target)});
      queue_max_sample[target] = std::max(queue_max_sample[target], queue_len[target]);
      events.push({ev.at + exp_gap(total_rate), seq++, -1});
    } else if (ev.node == -2) {
      report.sample_time_s.push_back(static_cast<double>(ev.at) / kSecond);
      report.arrived_per_sample.push_back(arrivals_in_window);
      report.served_per_sample.push_back(served_in_window);
      report.dropped_per_sample.push_back(0);
      arrivals_in_window = served_in_window = 0;
      double sum = 0.0;
      std::uint32_t qmax = 0;
      for (std::uint32_t n = 0; n < nodes; ++n) {
        sum += queue_len[n];
        qmax = std::max(qmax, queue_max_sample[n]);
        totals[n].queue_max = std::max(totals[n].queue_max, queue_max_sample[n]);
        queue_max_sample[n] = queue_len[n];
      }
      report.mean_queue_per_sample.push_back(sum / nodes);
      report.max_queue_per_sample.push_back(qmax);
      events.push({ev.at + params.sample_interval, seq++, -2});
    } else {
      const auto node = static_cast<std::uint32_t>(ev.node);
      ++report.served;
      ++served_in_window;
      ++totals[node].served;
      if (--queue_len[node] > 0)
        events.push({ev.at + exp_gap(inst.capacities[node]), seq++, ev.node});
    }
  }

  report.node_totals = std::move(totals);
  std::uint64_t in_queue = 0;
  for (auto q : queue_len) in_queue += q;
  report.in_flight_at_end = in_queue;
  return report;
}

StationarityVerdict queue_stationarity_probe(const SimReport& report,
                                             std::uint32_t max_queue_bound) {
  const auto& series = report.mean_queue_per_sample;
  if (report.horizon < 10 * kSecond || series.size() < 8)
    throw std::runtime_error("queue_stationarity_probe: horizon too short");

  StationarityVerdict verdict;
  const std::size_t n = series.size();
  auto mean_over = [&](std::size_t from, std::size_t to) {
    double sum = 0.0;
    for (std::size_t i = from; i < to; ++i) sum += series[i];
    return sum / static_cast<double>(to - from);
  };
  const double q3 = mean_over(n / 2, 3 * n / 4);
  const double q4 = mean_over(3 * n / 4, n);
  constexpr double kQueueFloor = 0.01;  // both-quarters-empty counts as flat
  verdict.quarter_rel_diff = std::fabs(q4 - q3) / std::max(q3, kQueueFloor);

  std::uint32_t max_queue = 0;
  for (auto q : report.max_queue_per_sample) max_queue = std::max(max_queue, q);
  verdict.max_queue = max_queue;

  std::vector<double> xs, ys;
  xs.reserve(n - n / 2);
  ys.reserve(n - n / 2);
  for (std::size_t i = n / 2; i < n; ++i) {
    xs.push_back(report.sample_time_s[i]);
    ys.push_back(series[i]);
  }
  verdict.trend = stats::linear_fit(xs, ys).slope;

  verdict.stationary = verdict.quarter_rel_diff <= 0.10 && max_queue < max_queue_bound;
  return verdict;
}

}  // namespace distcache

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "distcache/cache_node.hpp"
#include "distcache/object_id.hpp"
#include "distcache/routing.hpp"

namespace distcache {

// Simulated wire records. GET replies carry telemetry stamps from every cache
// node on the path: (16-bit node id, 32-bit load).
struct MsgGet {
  ObjectId key;
};
struct MsgGetReply {
  ObjectId key;
  bool miss = false;
  Value value;
  std::uint64_t version = 0;
  std::vector<TelemetryStamp> stamps;
};
struct MsgWrite {
  ObjectId key;
  Value value;
};
struct MsgWriteAck {
  ObjectId key;
  std::uint64_t version = 0;
};
struct MsgInvalidate {
  ObjectId key;
  std::uint64_t version = 0;
  std::vector<std::uint32_t> path;  // cache node ids the sweep visits
};
struct MsgInvAck {
  ObjectId key;
  std::uint64_t version = 0;
};
struct MsgUpdate {
  ObjectId key;
  std::uint64_t version = 0;
  Value value;
};
struct MsgUpdAck {
  ObjectId key;
  std::uint64_t version = 0;
};

enum class WritePhase : std::uint8_t {
  kInvalidating,
  kAckedToClient,
  kUpdating,
  kDone,
};

struct ServerOptions {
  std::int64_t timeout_ns = 10'000'000;  // 10 simulated ms
  std::uint32_t max_retries = 5;
  bool lower_layer_first = false;  // invalidation path order
  // Path mode sends one packet that visits every replica and returns one ack.
  // Unicast mode (the generic two-phase protocol, used by the replication
  // baseline) sends one message per replica and waits for every ack.
  bool unicast_coherence = false;
};

// The storage server's side of the two-phase update protocol, plus the
// unified cache-insertion path. Transport, timers and replica lookup are
// injected so the deterministic simulator (or a scripted test harness) drives
// the state machine.
//
// Guarantees, per key: at most one transaction in flight (later writes
// queue), versions are server-assigned and strictly monotone, and the client
// is acked only after every cached copy is invalid (ack-after-phase-1).
class StorageServer {
 public:
  struct Hooks {
    std::function<void(const MsgInvalidate&)> send_invalidate;
    std::function<void(const MsgUpdate&, const std::vector<std::uint32_t>& path)>
        send_update;
    // set_timer(token, delay); fire by calling on_timer(token) exactly once.
    std::function<void(std::uint64_t token, std::int64_t delay_ns)> set_timer;
    std::function<void(const MsgWriteAck&, std::uint64_t client_token)> client_ack;
    std::function<void(const ObjectId& key, std::uint64_t client_token)> write_failed;
    // Cache nodes currently holding the key (any layer, valid or invalid).
    std::function<std::vector<std::uint32_t>(const ObjectId&)> replica_nodes;
  };

  StorageServer(std::uint32_t server_id, const ServerOptions& options, Hooks hooks);

  std::uint32_t server_id() const { return server_id_; }

  // Write arriving at the key's home server. Uncached keys commit and ack
  // immediately; cached keys run the two-phase protocol.
  void handle_write(const ObjectId& key, Value value, std::uint64_t client_token);

  // Server half of a cache insertion: pushes the committed value to `node`
  // via a phase-2 update, serialized with concurrent writes on the key.
  void begin_insertion(const ObjectId& key, std::uint32_t node);

  // `from_node` identifies the acking replica (transport metadata, needed in
  // unicast mode); path mode ignores it since the sweep covers everyone.
  void on_inv_ack(const MsgInvAck& ack, std::uint32_t from_node = kAnyNode);
  void on_upd_ack(const MsgUpdAck& ack, std::uint32_t from_node = kAnyNode);
  void on_timer(std::uint64_t token);

  static constexpr std::uint32_t kAnyNode = 0xffffffff;

  struct Committed {
    Value value;
    std::uint64_t version = 0;
  };
  // Committed primary state; never-written keys report version 0 and the
  // store's default value for the key.
  Committed committed(const ObjectId& key) const;

  bool has_active_txn(const ObjectId& key) const { return active_.contains(key); }
  std::uint64_t failed_writes() const { return failed_writes_; }
  std::uint64_t retransmits() const { return retransmits_; }

  // Default content for keys that were never written.
  static Value default_value(const ObjectId& key);

 private:
  struct Txn {
    ObjectId key;
    Value value;
    std::uint64_t version = 0;
    WritePhase phase = WritePhase::kInvalidating;
    std::vector<std::uint32_t> replicas;
    std::vector<std::uint32_t> pending;  // replicas still owing an ack
    std::uint32_t retries = 0;
    std::uint64_t client_token = 0;
    std::uint64_t timer_token = 0;
    bool insertion = false;
  };
  struct Pending {
    Value value;
    std::uint64_t client_token = 0;
    bool insertion = false;
    std::uint32_t insertion_node = 0;
  };

  // Keys pass by value below: a synchronous ack can release the packet that
  // owns the caller's reference.
  void activate(ObjectId key, Pending pending);
  void start_phase1(Txn& txn, bool pending_only);
  void start_phase2(Txn& txn, bool pending_only);
  void commit_and_ack(Txn& txn);
  void finish(ObjectId key);
  std::uint64_t arm_timer(Txn& txn);

  std::uint32_t server_id_;
  ServerOptions options_;
  Hooks hooks_;
  std::unordered_map<ObjectId, Committed, ObjectIdHash> store_;
  std::unordered_map<ObjectId, Txn, ObjectIdHash> active_;
  std::unordered_map<ObjectId, std::deque<Pending>, ObjectIdHash> queued_;
  std::unordered_map<std::uint64_t, ObjectId> timer_owner_;
  std::uint64_t next_timer_token_ = 1;
  std::uint64_t failed_writes_ = 0;
  std::uint64_t retransmits_ = 0;
};

// Tracks acked writes and flags reads that return an older version than the
// newest write acked before the read was issued.
class ConsistencyMonitor {
 public:
  void on_write_acked(const ObjectId& key, std::uint64_t version, std::int64_t time);
  void on_get_reply(const ObjectId& key, std::uint64_t version, std::int64_t issue_time);
  std::uint64_t stale_reads() const { return stale_reads_; }
  std::uint64_t checked_reads() const { return checked_reads_; }

 private:
  // Acks per key in (time, version) order; both components are monotone
  // because the server serializes writes per key.
  std::unordered_map<ObjectId, std::vector<std::pair<std::int64_t, std::uint64_t>>,
                     ObjectIdHash>
      acked_;
  std::uint64_t stale_reads_ = 0;
  std::uint64_t checked_reads_ = 0;
};

}  // namespace distcache

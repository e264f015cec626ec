#include "distcache/coherence.hpp"

#include <algorithm>
#include <stdexcept>

namespace distcache {

StorageServer::StorageServer(std::uint32_t server_id, const ServerOptions& options,
                             Hooks hooks)
    : server_id_(server_id), options_(options), hooks_(std::move(hooks)) {
  if (!hooks_.send_invalidate || !hooks_.send_update || !hooks_.set_timer ||
      !hooks_.client_ack || !hooks_.replica_nodes)
    throw std::invalid_argument("StorageServer: missing hook");
}

Value StorageServer::default_value(const ObjectId& key) {
  Value v(8);
  const std::uint64_t w = mix64(key.low64(), key.high64(), 0xdefa);
  for (int i = 0; i < 8; ++i) v[i] = static_cast<std::uint8_t>(w >> (8 * i));
  return v;
}

StorageServer::Committed StorageServer::committed(const ObjectId& key) const {
  auto it = store_.find(key);
  if (it != store_.end()) return it->second;
  return {default_value(key), 0};
}

void StorageServer::handle_write(const ObjectId& key, Value value,
                                 std::uint64_t client_token) {
  Pending pending;
  pending.value = std::move(value);
  pending.client_token = client_token;
  if (active_.contains(key)) {
    queued_[key].push_back(std::move(pending));  // serialized per key
    return;
  }
  activate(key, std::move(pending));
}

void StorageServer::begin_insertion(const ObjectId& key, std::uint32_t node) {
  Pending pending;
  pending.insertion = true;
  pending.insertion_node = node;
  if (active_.contains(key)) {
    queued_[key].push_back(std::move(pending));
    return;
  }
  activate(key, std::move(pending));
}

void StorageServer::activate(ObjectId key, Pending pending) {
  Txn txn;
  txn.key = key;
  txn.insertion = pending.insertion;
  txn.client_token = pending.client_token;
  if (pending.insertion) {
    // Push the committed value; a never-written key implicitly commits its
    // default value at version 1 so the version gate can admit it.
    auto& cell = store_[key];
    if (cell.version == 0) cell = {default_value(key), 1};
    txn.value = cell.value;
    txn.version = cell.version;
    txn.replicas = {pending.insertion_node};
    txn.phase = WritePhase::kUpdating;
    auto [it, inserted] = active_.emplace(key, std::move(txn));
    start_phase2(it->second, false);
    return;
  }

  txn.value = std::move(pending.value);
  auto replicas = hooks_.replica_nodes(key);
  if (replicas.empty()) {
    // Uncached key: commit locally and ack, no cache traffic.
    auto& cell = store_[key];
    txn.version = cell.version + 1;
    cell = {txn.value, txn.version};
    hooks_.client_ack(MsgWriteAck{key, txn.version}, txn.client_token);
    finish(key);
    return;
  }
  // Sweep visits upper-layer copies first by default; the order is
  // observationally irrelevant under the version gate.
  std::sort(replicas.begin(), replicas.end());
  if (options_.lower_layer_first) std::reverse(replicas.begin(), replicas.end());
  txn.replicas = std::move(replicas);
  txn.version = committed(key).version + 1;
  txn.phase = WritePhase::kInvalidating;
  auto [it, inserted] = active_.emplace(key, std::move(txn));
  start_phase1(it->second, false);
}

std::uint64_t StorageServer::arm_timer(Txn& txn) {
  const std::uint64_t token = next_timer_token_++;
  txn.timer_token = token;
  timer_owner_[token] = txn.key;
  hooks_.set_timer(token, options_.timeout_ns);
  return token;
}

void StorageServer::start_phase1(Txn& txn, bool pending_only) {
  if (!pending_only) txn.pending = txn.replicas;
  arm_timer(txn);
  if (options_.unicast_coherence) {
    for (std::uint32_t node : txn.pending)
      hooks_.send_invalidate(MsgInvalidate{txn.key, txn.version, {node}});
  } else {
    hooks_.send_invalidate(MsgInvalidate{txn.key, txn.version, txn.replicas});
  }
}

void StorageServer::start_phase2(Txn& txn, bool pending_only) {
  if (!pending_only) txn.pending = txn.replicas;
  arm_timer(txn);
  if (options_.unicast_coherence) {
    for (std::uint32_t node : txn.pending)
      hooks_.send_update(MsgUpdate{txn.key, txn.version, txn.value}, {node});
  } else {
    hooks_.send_update(MsgUpdate{txn.key, txn.version, txn.value}, txn.replicas);
  }
}

void StorageServer::commit_and_ack(Txn& txn) {
  store_[txn.key] = {txn.value, txn.version};
  hooks_.client_ack(MsgWriteAck{txn.key, txn.version}, txn.client_token);
  txn.phase = WritePhase::kAckedToClient;
}

void StorageServer::finish(ObjectId key) {
  if (auto it = active_.find(key); it != active_.end()) {
    timer_owner_.erase(it->second.timer_token);
    active_.erase(it);
  }
  auto qit = queued_.find(key);
  if (qit == queued_.end() || qit->second.empty()) {
    if (qit != queued_.end()) queued_.erase(qit);
    return;
  }
  Pending next = std::move(qit->second.front());
  qit->second.pop_front();
  if (qit->second.empty()) queued_.erase(qit);
  activate(key, std::move(next));
}

namespace {
void clear_pending(std::vector<std::uint32_t>& pending, std::uint32_t from_node) {
  if (from_node == StorageServer::kAnyNode) {
    pending.clear();
    return;
  }
  pending.erase(std::remove(pending.begin(), pending.end(), from_node), pending.end());
}
}  // namespace

void StorageServer::on_inv_ack(const MsgInvAck& ack, std::uint32_t from_node) {
  auto it = active_.find(ack.key);
  if (it == active_.end()) return;
  Txn& txn = it->second;
  if (txn.phase != WritePhase::kInvalidating || ack.version != txn.version) return;
  clear_pending(txn.pending, options_.unicast_coherence ? from_node : kAnyNode);
  if (!txn.pending.empty()) return;
  timer_owner_.erase(txn.timer_token);
  // ACKED_TO_CLIENT requires no pending invalidations: every copy is invalid,
  // so committing and acking before phase 2 is safe.
  commit_and_ack(txn);
  txn.phase = WritePhase::kUpdating;
  txn.retries = 0;
  start_phase2(txn, false);
}

void StorageServer::on_upd_ack(const MsgUpdAck& ack, std::uint32_t from_node) {
  auto it = active_.find(ack.key);
  if (it == active_.end()) return;
  Txn& txn = it->second;
  if (txn.phase != WritePhase::kUpdating || ack.version != txn.version) return;
  clear_pending(txn.pending, options_.unicast_coherence ? from_node : kAnyNode);
  if (!txn.pending.empty()) return;
  txn.phase = WritePhase::kDone;
  finish(ack.key);
}

void StorageServer::on_timer(std::uint64_t token) {
  auto owner = timer_owner_.find(token);
  if (owner == timer_owner_.end()) return;  // completed meanwhile
  const ObjectId key = owner->second;
  timer_owner_.erase(owner);
  auto it = active_.find(key);
  if (it == active_.end()) return;
  Txn& txn = it->second;
  if (txn.timer_token != token) return;

  if (txn.retries >= options_.max_retries) {
    if (txn.phase == WritePhase::kInvalidating) {
      ++failed_writes_;
      if (hooks_.write_failed) hooks_.write_failed(key, txn.client_token);
    }
    // Updating phase: give up; unacked copies stay invalid until the next
    // insertion/update cycle re-pushes a value.
    finish(key);
    return;
  }
  ++txn.retries;
  ++retransmits_;
  if (txn.phase == WritePhase::kInvalidating) {
    start_phase1(txn, true);
  } else if (txn.phase == WritePhase::kUpdating) {
    start_phase2(txn, true);
  }
}

void ConsistencyMonitor::on_write_acked(const ObjectId& key, std::uint64_t version,
                                        std::int64_t time) {
  acked_[key].emplace_back(time, version);
}

void ConsistencyMonitor::on_get_reply(const ObjectId& key, std::uint64_t version,
                                      std::int64_t issue_time) {
  ++checked_reads_;
  auto it = acked_.find(key);
  if (it == acked_.end()) return;
  const auto& history = it->second;
  // Newest version acked no later than issue_time.
  auto pos = std::upper_bound(
      history.begin(), history.end(), issue_time,
      [](std::int64_t t, const auto& entry) { return t < entry.first; });
  if (pos == history.begin()) return;
  const std::uint64_t required = std::prev(pos)->second;
  if (version < required) ++stale_reads_;
}

}  // namespace distcache

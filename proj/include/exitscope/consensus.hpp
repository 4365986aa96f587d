// Roster parsing and network aggregation: turns a consensus-style node list
// into the per-class bandwidth totals the weight and probability models use.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "exitscope/common.hpp"

namespace exitscope {

struct NodeRecord {
  std::string id;       // opaque identifier, unique within a roster
  std::string address;  // dotted-quad IPv4
  std::uint16_t or_port = 0;
  double bandwidth = 0;  // Gb/s, >= 0
  bool is_guard = false;
  bool is_exit = false;

  bool operator==(const NodeRecord&) const = default;
};

// Flag-based partition: every node lands in exactly one class.
enum class NodeClass { entry_only, exit_only, both, neither };

inline NodeClass classify_node(const NodeRecord& n) {
  if (n.is_guard && n.is_exit) return NodeClass::both;
  if (n.is_guard) return NodeClass::entry_only;
  if (n.is_exit) return NodeClass::exit_only;
  return NodeClass::neither;
}

struct NetworkState {
  std::vector<NodeRecord> nodes;
  double B = 0;    // total = B_e + B_x + B_d + B_n, summed in that order
  double B_e = 0;  // guard-only ("pure entry")
  double B_x = 0;  // exit-only ("pure exit")
  double B_d = 0;  // guard+exit ("EE")
  double B_n = 0;  // neither ("N-EE")

  bool operator==(const NetworkState&) const = default;
};

// Validates nodes and computes aggregates. Each class total accumulates in
// node order; B is the sum of the four class totals, so the partition
// identity B == B_e + B_x + B_d + B_n holds exactly in double arithmetic.
inline NetworkState make_state(std::vector<NodeRecord> nodes) {
  std::unordered_set<std::string> seen_ids;
  seen_ids.reserve(nodes.size());
  NetworkState st;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeRecord& n = nodes[i];
    if (!parse_ipv4(n.address))
      throw parse_error("node '" + n.id + "': invalid IPv4 address '" + n.address + "'");
    if (!(n.bandwidth >= 0) || !std::isfinite(n.bandwidth))
      throw parse_error("node '" + n.id + "': bandwidth must be a finite non-negative number");
    if (!seen_ids.insert(n.id).second) throw duplicate_id_error(n.id, 0);
    switch (classify_node(n)) {
      case NodeClass::entry_only: st.B_e += n.bandwidth; break;
      case NodeClass::exit_only: st.B_x += n.bandwidth; break;
      case NodeClass::both: st.B_d += n.bandwidth; break;
      case NodeClass::neither: st.B_n += n.bandwidth; break;
    }
  }
  st.B = st.B_e + st.B_x + st.B_d + st.B_n;
  st.nodes = std::move(nodes);
  return st;
}

namespace detail {

inline std::pair<bool, bool> parse_flags(std::string_view flags, std::size_t lineno) {
  bool guard = false, exit = false, none = false;
  std::size_t pos = 0;
  int count = 0;
  while (pos <= flags.size()) {
    std::size_t comma = flags.find(',', pos);
    std::string_view tok =
        comma == std::string_view::npos ? flags.substr(pos) : flags.substr(pos, comma - pos);
    if (tok == "guard") {
      if (guard) throw parse_error("repeated flag 'guard'", lineno);
      guard = true;
    } else if (tok == "exit") {
      if (exit) throw parse_error("repeated flag 'exit'", lineno);
      exit = true;
    } else if (tok == "none") {
      if (none) throw parse_error("repeated flag 'none'", lineno);
      none = true;
    } else {
      throw parse_error("unknown flag '" + std::string(tok) + "'", lineno);
    }
    ++count;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  // 'none' is only meaningful alone; "guard,none" is a contradiction.
  if (none && count > 1) throw parse_error("flag 'none' cannot be combined", lineno);
  return {guard, exit};
}

}  // namespace detail

// Roster line format: `<id> <ipv4> <port> <bandwidth_gbps> <flags>`, flags a
// comma-joined subset of {guard, exit, none}. Lines starting with '#' are
// comments; blank lines are skipped. Duplicate ids are rejected; duplicate
// addresses are fine (several relays can share a host).
inline NetworkState parse_roster(std::string_view text) {
  std::vector<NodeRecord> nodes;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto toks = split_ws(line);
    if (toks.size() != 5)
      throw parse_error("expected 5 fields (id ip port bandwidth flags), got " +
                            std::to_string(toks.size()),
                        lineno);
    NodeRecord n;
    n.id = std::string(toks[0]);
    n.address = std::string(toks[1]);
    if (!parse_ipv4(n.address))
      throw parse_error("invalid IPv4 address '" + n.address + "'", lineno);
    auto port = parse_int64(toks[2]);
    if (!port || *port < 0 || *port > 65535)
      throw parse_error("invalid port '" + std::string(toks[2]) + "'", lineno);
    n.or_port = std::uint16_t(*port);
    auto bw = parse_double(toks[3]);
    if (!bw || !(*bw >= 0) || !std::isfinite(*bw))
      throw parse_error("invalid bandwidth '" + std::string(toks[3]) + "'", lineno);
    n.bandwidth = *bw;
    auto [guard, exit] = detail::parse_flags(toks[4], lineno);
    n.is_guard = guard;
    n.is_exit = exit;
    // Re-check id uniqueness here so the error carries the offending line.
    for (const NodeRecord& prev : nodes)
      if (prev.id == n.id) throw duplicate_id_error(n.id, lineno);
    nodes.push_back(std::move(n));
  }
  return make_state(std::move(nodes));
}

inline std::string format_node_flags(const NodeRecord& n) {
  if (n.is_guard && n.is_exit) return "guard,exit";
  if (n.is_guard) return "guard";
  if (n.is_exit) return "exit";
  return "none";
}

// Bandwidth uses shortest round-trip formatting, so parse(serialize(state))
// reproduces the state exactly.
inline std::string serialize_roster(const NetworkState& st) {
  std::string out;
  for (const NodeRecord& n : st.nodes) {
    out += n.id;
    out += ' ';
    out += n.address;
    out += ' ';
    out += std::to_string(n.or_port);
    out += ' ';
    out += format_double(n.bandwidth);
    out += ' ';
    out += format_node_flags(n);
    out += '\n';
  }
  return out;
}

// Deduplicated relay addresses, as numeric IPv4 for exact membership tests.
inline std::unordered_set<std::uint32_t> extract_or_ipset(const NetworkState& st) {
  std::unordered_set<std::uint32_t> out;
  out.reserve(st.nodes.size());
  for (const NodeRecord& n : st.nodes) out.insert(*parse_ipv4(n.address));
  return out;
}

// Multi-relay hosts make the node count and the address count differ; both
// are exposed because published totals are ambiguous about the merge.
inline std::size_t distinct_address_count(const NetworkState& st) {
  return extract_or_ipset(st).size();
}

}  // namespace exitscope

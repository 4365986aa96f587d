// Offline exit-traffic triage: internal/external classification against the
// relay address set, ordered irrelevance filters, byte-signature matching,
// DVRIP header codec, and attack-interval statistics.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "exitscope/common.hpp"
#include "exitscope/consensus.hpp"

namespace exitscope {

enum class FlowDirection { inbound, outbound };
enum class FlowProtocol { http, telnet, ftp, rtsp, other };

inline std::string_view to_string(FlowDirection d) {
  return d == FlowDirection::inbound ? "inbound" : "outbound";
}

inline std::string_view to_string(FlowProtocol p) {
  switch (p) {
    case FlowProtocol::http: return "http";
    case FlowProtocol::telnet: return "telnet";
    case FlowProtocol::ftp: return "ftp";
    case FlowProtocol::rtsp: return "rtsp";
    case FlowProtocol::other: return "other";
  }
  return "other";
}

inline std::optional<FlowDirection> parse_direction(std::string_view s) {
  if (s == "inbound") return FlowDirection::inbound;
  if (s == "outbound") return FlowDirection::outbound;
  return std::nullopt;
}

inline std::optional<FlowProtocol> parse_protocol(std::string_view s) {
  if (s == "http") return FlowProtocol::http;
  if (s == "telnet") return FlowProtocol::telnet;
  if (s == "ftp") return FlowProtocol::ftp;
  if (s == "rtsp") return FlowProtocol::rtsp;
  if (s == "other") return FlowProtocol::other;
  return std::nullopt;
}

struct FlowRecord {
  FlowDirection direction = FlowDirection::inbound;
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  FlowProtocol protocol = FlowProtocol::other;
  std::optional<std::string> host_header;
  std::optional<int> status_code;  // http only
  std::vector<std::uint8_t> payload;
  double timestamp = 0;  // seconds since epoch

  bool operator==(const FlowRecord&) const = default;
};

enum class Classification { internal, external };

// Table-style rule: the relay-side endpoint of an inbound flow is the source,
// of an outbound flow the destination; the flow is internal when the far end
// is itself a relay address.
inline Classification classify(const FlowRecord& flow, const std::unordered_set<std::uint32_t>& or_set) {
  const std::uint32_t far_end = flow.direction == FlowDirection::inbound ? flow.src_ip : flow.dst_ip;
  return or_set.count(far_end) ? Classification::internal : Classification::external;
}

enum class FilterReason { kept, internal, top1m_host, hosting_asn, http_5xx, telnet_iac };

inline std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::kept: return "kept";
    case FilterReason::internal: return "internal";
    case FilterReason::top1m_host: return "top1m_host";
    case FilterReason::hosting_asn: return "hosting_asn";
    case FilterReason::http_5xx: return "http_5xx";
    case FilterReason::telnet_iac: return "telnet_iac";
  }
  return "kept";
}

struct FilterVerdict {
  bool keep = true;
  FilterReason reason = FilterReason::kept;
  std::string note;  // e.g. ASN lookup miss, IAC offset

  bool operator==(const FilterVerdict&) const = default;
};

// Longest-prefix IPv4 -> ASN table. Loads `<cidr> <asn>` lines; bases are
// masked at load so non-canonical entries behave like their canonical form.
class AsnTable {
public:
  void add(std::uint32_t base, int prefix_len, std::uint32_t asn) {
    if (prefix_len < 0 || prefix_len > 32) throw precondition_error("prefix length out of range");
    entries_.push_back({mask(base, prefix_len), prefix_len, asn});
  }

  std::optional<std::uint32_t> lookup(std::uint32_t ip) const {
    std::optional<std::uint32_t> best;
    int best_len = -1;
    for (const Entry& e : entries_) {
      if (e.prefix_len > best_len && mask(ip, e.prefix_len) == e.base) {
        best = e.asn;
        best_len = e.prefix_len;
      }
    }
    return best;
  }

  std::size_t size() const { return entries_.size(); }

private:
  struct Entry {
    std::uint32_t base;
    int prefix_len;
    std::uint32_t asn;
  };
  static std::uint32_t mask(std::uint32_t ip, int len) {
    return len == 0 ? 0 : ip & (0xffffffffu << (32 - len));
  }
  std::vector<Entry> entries_;
};

inline AsnTable parse_asn_map(std::string_view text) {
  AsnTable table;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto toks = split_ws(line);
    if (toks.size() != 2) throw parse_error("expected `<cidr> <asn>`", lineno);
    std::size_t slash = toks[0].find('/');
    if (slash == std::string_view::npos) throw parse_error("cidr missing '/'", lineno);
    auto base = parse_ipv4(toks[0].substr(0, slash));
    auto len = parse_int64(toks[0].substr(slash + 1));
    auto asn = parse_uint64(toks[1]);
    if (!base) throw parse_error("invalid cidr base address", lineno);
    if (!len || *len < 0 || *len > 32) throw parse_error("invalid prefix length", lineno);
    if (!asn || *asn > 0xffffffffull) throw parse_error("invalid asn", lineno);
    table.add(*base, int(*len), std::uint32_t(*asn));
  }
  return table;
}

inline std::unordered_set<std::uint32_t> parse_asn_set(std::string_view text) {
  std::unordered_set<std::uint32_t> set;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto asn = parse_uint64(line);
    if (!asn || *asn > 0xffffffffull) throw parse_error("invalid asn", lineno);
    set.insert(std::uint32_t(*asn));
  }
  return set;
}

inline std::unordered_set<std::string> parse_domain_list(std::string_view text) {
  std::unordered_set<std::string> set;
  for (std::string_view raw : split_lines(text)) {
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    set.insert(to_lower(line));
  }
  return set;
}

// Bundled public-suffix snapshot: enough of the list to resolve common hosts;
// anything outside it falls back to the implicit single-label rule, as the
// full list itself specifies for unknown TLDs.
inline const std::unordered_set<std::string>& public_suffix_snapshot() {
  static const std::unordered_set<std::string> snapshot = {
      "com", "org", "net", "edu", "gov", "mil", "int", "info", "biz", "name",
      "io", "co", "ai", "me", "tv", "cc", "xyz", "top", "site", "online",
      "tech", "dev", "app", "cloud", "shop", "club",
      "de", "fr", "nl", "it", "es", "se", "no", "fi", "dk", "pl", "ch", "at",
      "be", "cz", "pt", "gr", "ie", "ru", "ua", "ca", "us", "mx", "ar", "cl",
      "uk", "co.uk", "org.uk", "ac.uk", "gov.uk", "me.uk",
      "jp", "co.jp", "ne.jp", "or.jp", "ac.jp", "go.jp",
      "cn", "com.cn", "net.cn", "org.cn", "gov.cn", "edu.cn",
      "kr", "co.kr", "or.kr", "re.kr",
      "au", "com.au", "net.au", "org.au", "edu.au",
      "br", "com.br", "net.br", "org.br",
      "in", "co.in", "net.in", "org.in",
      "tw", "com.tw", "org.tw",
      "hk", "com.hk",
      "nz", "co.nz", "org.nz",
      "za", "co.za",
      "tr", "com.tr",
      "sg", "com.sg",
      "id", "co.id",
  };
  return snapshot;
}

// Registrable domain: the longest matching public suffix plus one label. A
// host that is itself a suffix, a single label, or an address literal has no
// registrable form and resolves to nullopt.
inline std::optional<std::string> registrable_domain(std::string_view host,
                                                     const std::unordered_set<std::string>& suffixes = public_suffix_snapshot()) {
  std::string h = to_lower(trim(host));
  if (!h.empty() && h.back() == '.') h.pop_back();
  if (h.empty()) return std::nullopt;
  if (parse_ipv4(h)) return std::nullopt;

  std::vector<std::string> labels;
  std::size_t pos = 0;
  while (pos <= h.size()) {
    std::size_t dot = h.find('.', pos);
    std::string label = dot == std::string::npos ? h.substr(pos) : h.substr(pos, dot - pos);
    if (label.empty()) return std::nullopt;  // ".." or leading dot
    labels.push_back(std::move(label));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  if (labels.size() < 2) return std::nullopt;

  // Longest suffix in the snapshot wins; otherwise the last label is the
  // implicit public suffix. The whole host is a candidate: a host that equals
  // a listed suffix has no registrable part.
  std::size_t suffix_labels = 1;
  for (std::size_t take = labels.size(); take >= 1; --take) {
    std::string candidate;
    for (std::size_t i = labels.size() - take; i < labels.size(); ++i) {
      if (!candidate.empty()) candidate += '.';
      candidate += labels[i];
    }
    if (suffixes.count(candidate)) {
      suffix_labels = take;
      break;
    }
    if (take == 1) break;
  }
  if (labels.size() <= suffix_labels) return std::nullopt;

  std::string out;
  for (std::size_t i = labels.size() - suffix_labels - 1; i < labels.size(); ++i) {
    if (!out.empty()) out += '.';
    out += labels[i];
  }
  return out;
}

// Ordered irrelevance filters over an already-external flow. First match
// decides: popular-host, hosting-provider ASN of the far endpoint, HTTP 5xx,
// Telnet IAC byte anywhere in the payload. An ASN lookup miss is treated as
// non-hosting and noted, and later filters still apply.
inline FilterVerdict filter(const FlowRecord& flow,
                            const std::unordered_set<std::string>& top1m,
                            const std::unordered_set<std::uint32_t>& hosting_asns,
                            const AsnTable& asn_lookup) {
  FilterVerdict v;

  if (flow.host_header) {
    std::string host = to_lower(trim(*flow.host_header));
    if (!host.empty() && host.back() == '.') host.pop_back();
    bool hit = top1m.count(host) > 0;
    if (!hit) {
      if (auto reg = registrable_domain(host)) hit = top1m.count(*reg) > 0;
    }
    if (hit) {
      v.keep = false;
      v.reason = FilterReason::top1m_host;
      return v;
    }
  }

  const std::uint32_t far_end = flow.direction == FlowDirection::inbound ? flow.src_ip : flow.dst_ip;
  if (auto asn = asn_lookup.lookup(far_end)) {
    if (hosting_asns.count(*asn)) {
      v.keep = false;
      v.reason = FilterReason::hosting_asn;
      v.note = "asn " + std::to_string(*asn);
      return v;
    }
  } else {
    v.note = "no asn mapping for " + format_ipv4(far_end);
  }

  if (flow.protocol == FlowProtocol::http && flow.status_code &&
      *flow.status_code >= 500 && *flow.status_code <= 599) {
    v.keep = false;
    v.reason = FilterReason::http_5xx;
    return v;
  }

  if (flow.protocol == FlowProtocol::telnet) {
    auto it = std::find(flow.payload.begin(), flow.payload.end(), std::uint8_t(0xff));
    if (it != flow.payload.end()) {
      v.keep = false;
      v.reason = FilterReason::telnet_iac;
      std::string offset_note = "iac at offset " + std::to_string(it - flow.payload.begin());
      v.note = v.note.empty() ? offset_note : v.note + "; " + offset_note;
      return v;
    }
  }

  v.keep = true;
  v.reason = FilterReason::kept;
  return v;
}

// Classification plus filtering in one verdict; internal flows drop with
// reason `internal` before the irrelevance filters run.
inline FilterVerdict triage_flow(const FlowRecord& flow,
                                 const std::unordered_set<std::uint32_t>& or_set,
                                 const std::unordered_set<std::string>& top1m,
                                 const std::unordered_set<std::uint32_t>& hosting_asns,
                                 const AsnTable& asn_lookup) {
  if (classify(flow, or_set) == Classification::internal)
    return FilterVerdict{false, FilterReason::internal, ""};
  return filter(flow, top1m, hosting_asns, asn_lookup);
}

// ---------------------------------------------------------------------------
// Byte signatures

struct Signature {
  std::string name;
  std::vector<std::uint8_t> pattern;
  kv_record metadata;  // e.g. cve=..., msg=...
};

struct SignatureHit {
  std::string name;
  std::size_t offset = 0;  // first occurrence

  bool operator==(const SignatureHit&) const = default;
};

inline std::vector<SignatureHit> match_signatures(const FlowRecord& flow,
                                                  const std::vector<Signature>& sigs) {
  std::vector<SignatureHit> hits;
  for (const Signature& sig : sigs) {
    if (sig.pattern.empty() || sig.pattern.size() > flow.payload.size()) continue;
    auto it = std::search(flow.payload.begin(), flow.payload.end(),
                          sig.pattern.begin(), sig.pattern.end());
    if (it != flow.payload.end())
      hits.push_back({sig.name, std::size_t(it - flow.payload.begin())});
  }
  return hits;
}

// Signature file line: `<name> |hh hh ...| key=value ...` — the pipes delimit
// space-separated hex bytes, the remainder is free-form metadata.
inline std::vector<Signature> parse_signatures(std::string_view text) {
  std::vector<Signature> sigs;
  std::unordered_set<std::string> seen;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    std::size_t sp = line.find_first_of(" \t");
    if (sp == std::string_view::npos) throw parse_error("signature missing pattern", lineno);
    Signature sig;
    sig.name = std::string(line.substr(0, sp));
    if (!seen.insert(sig.name).second) throw duplicate_id_error(sig.name, lineno);

    std::string_view rest = trim(line.substr(sp));
    if (rest.empty() || rest.front() != '|') throw parse_error("pattern must start with '|'", lineno);
    std::size_t close = rest.find('|', 1);
    if (close == std::string_view::npos) throw parse_error("unterminated pattern", lineno);
    for (std::string_view tok : split_ws(rest.substr(1, close - 1))) {
      if (tok.size() != 2) throw parse_error("pattern bytes must be two hex digits", lineno);
      auto hi = hex_digit(tok[0]), lo = hex_digit(tok[1]);
      if (!hi || !lo) throw parse_error("invalid hex digit in pattern", lineno);
      sig.pattern.push_back(std::uint8_t(*hi * 16 + *lo));
    }
    if (sig.pattern.empty()) throw parse_error("empty pattern", lineno);

    std::string_view meta = trim(rest.substr(close + 1));
    if (!meta.empty()) sig.metadata = parse_kv_line(meta, lineno);
    sigs.push_back(std::move(sig));
  }
  return sigs;
}

// ---------------------------------------------------------------------------
// DVRIP codec
//
// 20-byte header layout: 0 head_flag, 1 version, 2-3 reserved, 4-7 session,
// 8-11 sequence, 12-13 reserved, 14-15 message id, 16-19 data length; all
// multi-byte fields little-endian. Reserved bytes are ignored on parse and
// zeroed on encode, so well-formed means encoder-producible.

struct DvripHeader {
  std::uint8_t head_flag = 0;
  std::uint8_t version = 0;
  std::uint32_t session = 0;
  std::uint32_t sequence = 0;
  std::uint16_t message_id = 0;
  std::uint32_t data_length = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const DvripHeader&) const = default;
};

inline constexpr std::size_t kDvripHeaderSize = 20;

inline std::vector<std::uint8_t> encode_dvrip(const DvripHeader& h) {
  if (h.data_length != h.payload.size())
    throw precondition_error("data_length must equal payload size");
  std::vector<std::uint8_t> out(kDvripHeaderSize + h.payload.size(), 0);
  out[0] = h.head_flag;
  out[1] = h.version;
  auto put32 = [&out](std::size_t at, std::uint32_t v) {
    out[at] = std::uint8_t(v);
    out[at + 1] = std::uint8_t(v >> 8);
    out[at + 2] = std::uint8_t(v >> 16);
    out[at + 3] = std::uint8_t(v >> 24);
  };
  put32(4, h.session);
  put32(8, h.sequence);
  out[14] = std::uint8_t(h.message_id);
  out[15] = std::uint8_t(h.message_id >> 8);
  put32(16, h.data_length);
  std::copy(h.payload.begin(), h.payload.end(), out.begin() + kDvripHeaderSize);
  return out;
}

inline DvripHeader make_dvrip(std::uint8_t head_flag, std::uint8_t version,
                              std::uint32_t session, std::uint32_t sequence,
                              std::uint16_t message_id, std::vector<std::uint8_t> payload) {
  DvripHeader h;
  h.head_flag = head_flag;
  h.version = version;
  h.session = session;
  h.sequence = sequence;
  h.message_id = message_id;
  h.data_length = std::uint32_t(payload.size());
  h.payload = std::move(payload);
  return h;
}

// Single-packet parser: the payload is exactly data_length bytes and nothing
// may follow it.
inline DvripHeader parse_dvrip(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kDvripHeaderSize) throw truncated_header_error(bytes.size());
  auto get32 = [&bytes](std::size_t at) {
    return std::uint32_t(bytes[at]) | std::uint32_t(bytes[at + 1]) << 8 |
           std::uint32_t(bytes[at + 2]) << 16 | std::uint32_t(bytes[at + 3]) << 24;
  };
  DvripHeader h;
  h.head_flag = bytes[0];
  h.version = bytes[1];
  h.session = get32(4);
  h.sequence = get32(8);
  h.message_id = std::uint16_t(std::uint16_t(bytes[14]) | std::uint16_t(bytes[15]) << 8);
  h.data_length = get32(16);
  const std::size_t available = bytes.size() - kDvripHeaderSize;
  if (h.data_length > available) throw truncated_payload_error(h.data_length, available);
  if (available > h.data_length)
    throw parse_error(std::to_string(available - h.data_length) + " trailing bytes after declared payload");
  h.payload.assign(bytes.begin() + kDvripHeaderSize, bytes.end());
  return h;
}

// ---------------------------------------------------------------------------
// Interval statistics

struct IntervalStats {
  double avg = 0;
  double median = 0;

  bool operator==(const IntervalStats&) const = default;
};

// exchanges: (response timestamp, next request timestamp) pairs. Median uses
// the lower-middle element for even counts.
inline IntervalStats interval_stats(const std::vector<std::pair<double, double>>& exchanges) {
  if (exchanges.empty()) throw empty_input_error("no exchanges to summarize");
  std::vector<double> deltas;
  deltas.reserve(exchanges.size());
  for (const auto& [response_ts, next_request_ts] : exchanges) {
    if (next_request_ts < response_ts)
      throw precondition_error("next request precedes response");
    deltas.push_back(next_request_ts - response_ts);
  }
  IntervalStats s;
  s.avg = std::accumulate(deltas.begin(), deltas.end(), 0.0) / double(deltas.size());
  std::sort(deltas.begin(), deltas.end());
  s.median = deltas[(deltas.size() - 1) / 2];
  return s;
}

// ---------------------------------------------------------------------------
// Flow record file
//
// One flow per line in the key=value grammar. Required: dir src dst proto ts
// payload (base64). Optional: id (synthesized as flow-<ordinal> when absent),
// host, status (http only), sighits (triage output, ignored on load).

struct ParsedFlow {
  std::string id;
  FlowRecord flow;
};

inline ParsedFlow parse_flow_record(const kv_record& rec, std::size_t lineno, std::size_t ordinal) {
  for (const auto& [key, value] : rec.fields) {
    (void)value;
    if (key != "id" && key != "dir" && key != "src" && key != "dst" && key != "proto" &&
        key != "host" && key != "status" && key != "ts" && key != "payload" && key != "sighits")
      throw parse_error("unknown flow field '" + key + "'", lineno);
  }
  auto require = [&rec, lineno](std::string_view key) -> const std::string& {
    const std::string* v = rec.get(key);
    if (!v) throw parse_error("missing flow field '" + std::string(key) + "'", lineno);
    return *v;
  };

  ParsedFlow pf;
  pf.id = rec.get("id") ? *rec.get("id") : "flow-" + std::to_string(ordinal);
  if (pf.id.empty()) throw parse_error("empty flow id", lineno);

  auto dir = parse_direction(require("dir"));
  if (!dir) throw parse_error("invalid dir value", lineno);
  pf.flow.direction = *dir;

  auto src = parse_ipv4(require("src"));
  auto dst = parse_ipv4(require("dst"));
  if (!src) throw parse_error("invalid src address", lineno);
  if (!dst) throw parse_error("invalid dst address", lineno);
  pf.flow.src_ip = *src;
  pf.flow.dst_ip = *dst;

  auto proto = parse_protocol(require("proto"));
  if (!proto) throw parse_error("invalid proto value", lineno);
  pf.flow.protocol = *proto;

  if (const std::string* host = rec.get("host")) pf.flow.host_header = *host;

  if (const std::string* status = rec.get("status")) {
    if (pf.flow.protocol != FlowProtocol::http)
      throw parse_error("status is only valid for http flows", lineno);
    auto v = parse_int64(*status);
    if (!v || *v < 0 || *v > 999) throw parse_error("invalid status value", lineno);
    pf.flow.status_code = int(*v);
  }

  auto ts = parse_double(require("ts"));
  if (!ts) throw parse_error("invalid ts value", lineno);
  pf.flow.timestamp = *ts;

  auto payload = base64_decode(require("payload"));
  if (!payload) throw parse_error("invalid base64 payload", lineno);
  pf.flow.payload = std::move(*payload);
  return pf;
}

inline std::vector<ParsedFlow> parse_flows(std::string_view text) {
  std::vector<ParsedFlow> flows;
  std::unordered_set<std::string> seen;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    kv_record rec = parse_kv_line(line, lineno);
    ParsedFlow pf = parse_flow_record(rec, lineno, flows.size() + 1);
    if (!seen.insert(pf.id).second) throw duplicate_id_error(pf.id, lineno);
    flows.push_back(std::move(pf));
  }
  return flows;
}

// sighits: optional comma-joined `name:offset` pairs appended by triage.
inline std::string format_flow(const ParsedFlow& pf, const std::vector<SignatureHit>* hits = nullptr) {
  const FlowRecord& f = pf.flow;
  std::string line = "id=" + quote_value(pf.id);
  line += " dir=";
  line += to_string(f.direction);
  line += " src=" + format_ipv4(f.src_ip);
  line += " dst=" + format_ipv4(f.dst_ip);
  line += " proto=";
  line += to_string(f.protocol);
  if (f.host_header) line += " host=" + quote_value(*f.host_header);
  if (f.status_code) line += " status=" + std::to_string(*f.status_code);
  line += " ts=" + format_double(f.timestamp);
  line += " payload=" + base64_encode(f.payload);
  if (hits && !hits->empty()) {
    std::string joined;
    for (const SignatureHit& h : *hits) {
      if (!joined.empty()) joined += ',';
      joined += h.name + ":" + std::to_string(h.offset);
    }
    line += " sighits=" + quote_value(joined);
  }
  return line;
}

}  // namespace exitscope

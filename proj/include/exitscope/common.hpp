// Shared plumbing: error taxonomy, IPv4 handling, base64/hex codecs,
// record-line quoting, number formatting, and the FNV-1a prompt fingerprint.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace exitscope {

// All library failures derive from error; kind() is a stable machine-readable
// tag so callers (and the CLI's exit-status mapping) never parse what().
class error : public std::runtime_error {
public:
  error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

// Malformed input text; carries the 1-based line number when known.
class parse_error : public error {
public:
  explicit parse_error(const std::string& what, std::size_t line = 0)
      : error("parse", line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class duplicate_id_error : public parse_error {
public:
  duplicate_id_error(const std::string& id, std::size_t line)
      : parse_error("duplicate node id '" + id + "'", line) {}
};

class empty_network_error : public error {
public:
  empty_network_error() : error("empty-network", "network has zero total bandwidth") {}
};

// A matched weight case divides by a class bandwidth that is zero.
class degenerate_class_error : public error {
public:
  explicit degenerate_class_error(const std::string& node_class)
      : error("degenerate-class", node_class + " class bandwidth is zero where the matched case divides by it") {}
};

class unreachable_target_error : public error {
public:
  unreachable_target_error()
      : error("unreachable-target", "fleet is never chosen; no circuit count reaches the target") {}
};

class no_options_error : public error {
public:
  no_options_error()
      : error("no-options", "deployment requested but the option list is empty") {}
};

class truncated_header_error : public error {
public:
  explicit truncated_header_error(std::size_t got)
      : error("truncated-header",
              "packet has " + std::to_string(got) + " bytes, header needs 20") {}
};

class truncated_payload_error : public error {
public:
  truncated_payload_error(std::size_t declared, std::size_t available)
      : error("truncated-payload", "declared payload length " + std::to_string(declared) +
                                       " exceeds remaining " + std::to_string(available) + " bytes") {}
};

class empty_input_error : public error {
public:
  explicit empty_input_error(const std::string& what) : error("empty-input", what) {}
};

// Backend output that does not follow the expected grammar; keeps the raw
// text so findings can embed it verbatim.
class malformed_output_error : public error {
public:
  explicit malformed_output_error(const std::string& why, std::string raw)
      : error("malformed-output", why), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

private:
  std::string raw_;
};

class retrieval_error : public error {
public:
  explicit retrieval_error(const std::string& what) : error("retrieval", what) {}
};

class backend_error : public error {
public:
  explicit backend_error(const std::string& what) : error("backend", what) {}
};

class precondition_error : public error {
public:
  explicit precondition_error(const std::string& what) : error("precondition", what) {}
};

// ---------------------------------------------------------------------------
// IPv4

// Strict dotted quad: four decimal octets 0..255, no signs, no leading or
// trailing junk. Leading zeros are accepted ("010" == 10) but each octet is
// capped at 3 digits so "0x10" style never slips through.
inline std::optional<std::uint32_t> parse_ipv4(std::string_view s) {
  std::uint32_t out = 0;
  int octets = 0;
  std::size_t i = 0;
  while (i <= s.size()) {
    std::size_t start = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    std::size_t len = i - start;
    if (len == 0 || len > 3) return std::nullopt;
    unsigned value = 0;
    for (std::size_t k = start; k < i; ++k) value = value * 10 + unsigned(s[k] - '0');
    if (value > 255) return std::nullopt;
    out = (out << 8) | value;
    ++octets;
    if (i == s.size()) break;
    if (s[i] != '.') return std::nullopt;
    ++i;
    if (i == s.size()) return std::nullopt;  // trailing dot
  }
  if (octets != 4) return std::nullopt;
  return out;
}

inline std::string format_ipv4(std::uint32_t v) {
  return std::to_string((v >> 24) & 0xff) + '.' + std::to_string((v >> 16) & 0xff) + '.' +
         std::to_string((v >> 8) & 0xff) + '.' + std::to_string(v & 0xff);
}

// ---------------------------------------------------------------------------
// Codecs

inline std::string base64_encode(const std::uint8_t* data, std::size_t n) {
  static constexpr char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= n; i += 3) {
    std::uint32_t v = std::uint32_t(data[i]) << 16 | std::uint32_t(data[i + 1]) << 8 | data[i + 2];
    out += tbl[v >> 18];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += tbl[v & 63];
  }
  if (i + 1 == n) {
    std::uint32_t v = std::uint32_t(data[i]) << 16;
    out += tbl[v >> 18];
    out += tbl[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == n) {
    std::uint32_t v = std::uint32_t(data[i]) << 16 | std::uint32_t(data[i + 1]) << 8;
    out += tbl[v >> 18];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::string base64_encode(const std::vector<std::uint8_t>& v) {
  return base64_encode(v.data(), v.size());
}

inline std::string base64_encode(std::string_view s) {
  return base64_encode(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

// Strict RFC 4648: length must be a multiple of 4, padding only at the end.
inline std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view s) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (s.size() % 4 != 0) return std::nullopt;
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      char c = s[i + k];
      if (c == '=') {
        // '=' allowed only in the last two positions of the final group.
        if (i + 4 != s.size() || k < 2) return std::nullopt;
        ++pad;
        v <<= 6;
      } else {
        if (pad) return std::nullopt;  // data after padding
        int d = val(c);
        if (d < 0) return std::nullopt;
        v = v << 6 | std::uint32_t(d);
      }
    }
    out.push_back(std::uint8_t(v >> 16));
    if (pad < 2) out.push_back(std::uint8_t(v >> 8));
    if (pad < 1) out.push_back(std::uint8_t(v));
  }
  return out;
}

inline std::optional<int> hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Prompt fingerprint: FNV-1a 64-bit over the prompt bytes, rendered as 16
// lowercase hex digits. This is the stable digest scripted backends key on.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string fingerprint_hex(std::string_view prompt) {
  static constexpr char hexd[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(prompt);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[std::size_t(i)] = hexd[h & 0xf];
    h >>= 4;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text helpers

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
  return out;
}

inline std::string replace_all(std::string text, std::string_view needle, std::string_view with) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), with);
    pos += with.size();
  }
  return text;
}

// ---------------------------------------------------------------------------
// Numbers

// Shortest round-trip rendering, so serialize -> parse is value-exact.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

inline std::string format_fixed(double v, int places) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, places);
  (void)ec;
  return std::string(buf, end);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int64(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_uint64(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Record lines: the flat `key=value` format used by flow and finding files.
// Values are double-quoted when they contain spaces, quotes, '=', '#', or
// backslashes; quoting uses backslash escapes (\" \\ \n \t \r).

inline bool needs_quoting(std::string_view v) {
  if (v.empty()) return true;
  for (char c : v)
    if (c == ' ' || c == '"' || c == '\\' || c == '=' || c == '#' || c == '\n' || c == '\t' ||
        c == '\r')
      return true;
  return false;
}

inline std::string quote_value(std::string_view v) {
  if (!needs_quoting(v)) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

// One parsed key=value record; field order is preserved.
struct kv_record {
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* get(std::string_view key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return &v;
    return nullptr;
  }
  bool has(std::string_view key) const { return get(key) != nullptr; }
};

// Parses `key=value` tokens separated by whitespace; value may be a quoted
// string with backslash escapes. Throws parse_error on malformed input.
inline kv_record parse_kv_line(std::string_view line, std::size_t lineno = 0) {
  kv_record rec;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) -> kv_record {
    throw parse_error(why, lineno);
  };
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t key_start = i;
    while (i < line.size() && line[i] != '=' && line[i] != ' ' && line[i] != '\t') ++i;
    if (i >= line.size() || line[i] != '=') return fail("expected key=value token");
    std::string key(line.substr(key_start, i - key_start));
    if (key.empty()) return fail("empty key");
    ++i;  // consume '='
    std::string value;
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char c = line[i++];
        if (c == '\\') {
          if (i >= line.size()) return fail("dangling escape in quoted value");
          char e = line[i++];
          switch (e) {
            case '"': value += '"'; break;
            case '\\': value += '\\'; break;
            case 'n': value += '\n'; break;
            case 't': value += '\t'; break;
            case 'r': value += '\r'; break;
            default: return fail("unknown escape in quoted value");
          }
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          value += c;
        }
      }
      if (!closed) return fail("unterminated quoted value");
      if (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r')
        return fail("junk after quoted value");
    } else {
      std::size_t vstart = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
      value.assign(line.substr(vstart, i - vstart));
    }
    if (rec.has(key)) return fail("duplicate key '" + key + "'");
    rec.fields.emplace_back(std::move(key), std::move(value));
  }
  return rec;
}

}  // namespace exitscope

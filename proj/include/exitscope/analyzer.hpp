// Five-step analysis pipeline over pluggable completion/retrieval backends:
// entity recognition, self-verification, retrieval-augmented completion,
// origin confirmation, and per-protocol attack detectors. Backend output is
// untrusted: every grammar violation becomes a typed error captured by the
// caller, never a crash.
#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "exitscope/common.hpp"
#include "exitscope/prompts.hpp"
#include "exitscope/traffic.hpp"

namespace exitscope {

// ---------------------------------------------------------------------------
// Interfaces and domain types

class CompletionBackend {
public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string description() const = 0;
};

struct SearchResult {
  std::string title;
  std::string snippet;

  bool operator==(const SearchResult&) const = default;
};

class Retriever {
public:
  virtual ~Retriever() = default;
  virtual std::vector<SearchResult> search(const std::string& query) = 0;
  virtual std::string description() const = 0;
};

struct DeviceEntity {
  std::optional<std::string> vendor;
  std::optional<std::string> dev_type;
  std::optional<std::string> model;

  bool operator==(const DeviceEntity&) const = default;
  bool has_any() const { return vendor || dev_type || model; }
  bool complete_fields() const { return vendor && dev_type; }
};

enum class AttackKind { command_injection, information_disclosure, path_traversal, ftp_anomaly };

inline std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::command_injection: return "command_injection";
    case AttackKind::information_disclosure: return "information_disclosure";
    case AttackKind::path_traversal: return "path_traversal";
    case AttackKind::ftp_anomaly: return "ftp_anomaly";
  }
  return "command_injection";
}

inline std::optional<AttackKind> parse_attack_kind(std::string_view s) {
  if (s == "command_injection") return AttackKind::command_injection;
  if (s == "information_disclosure") return AttackKind::information_disclosure;
  if (s == "path_traversal") return AttackKind::path_traversal;
  if (s == "ftp_anomaly") return AttackKind::ftp_anomaly;
  return std::nullopt;
}

struct StepTraceEntry {
  int step = 0;  // 1..5
  std::string prompt_fingerprint;
  std::string raw_output;
  std::string note;

  bool operator==(const StepTraceEntry&) const = default;
};

struct Finding {
  std::string flow_ref;
  double timestamp = 0;
  std::optional<DeviceEntity> entity;
  std::optional<bool> is_iot_origin;
  std::optional<AttackKind> attack_kind;
  std::optional<bool> verdict;  // present iff attack_kind present
  std::string explanation;
  std::vector<StepTraceEntry> step_trace;
  std::optional<std::string> error;  // per-flow failures embed here

  bool operator==(const Finding&) const = default;
};

inline std::string step_roman(int step) {
  switch (step) {
    case 1: return "I";
    case 2: return "II";
    case 3: return "III";
    case 4: return "IV";
    case 5: return "V";
  }
  throw precondition_error("step out of range");
}

inline std::optional<int> roman_step(std::string_view s) {
  if (s == "I") return 1;
  if (s == "II") return 2;
  if (s == "III") return 3;
  if (s == "IV") return 4;
  if (s == "V") return 5;
  return std::nullopt;
}

inline void append_note(std::string& note, std::string_view extra) {
  if (extra.empty()) return;
  if (!note.empty()) note += "; ";
  note += extra;
}

// ---------------------------------------------------------------------------
// Backend output grammar
//
// Entity lists: a JSON array of objects each holding exactly the string keys
// T and E. When the whole output is not valid JSON, the span from the first
// '[' to the last ']' gets one more chance; anything else is malformed.

inline std::vector<std::pair<std::string, std::string>> parse_entity_list(const std::string& raw) {
  using json = nlohmann::json;
  std::string text(trim(raw));
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    const std::size_t open = text.find('[');
    const std::size_t close = text.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open)
      throw malformed_output_error("no bracketed list found", raw);
    doc = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (doc.is_discarded()) throw malformed_output_error("bracketed span is not valid JSON", raw);
  }
  if (!doc.is_array()) throw malformed_output_error("output is not a list", raw);
  std::vector<std::pair<std::string, std::string>> out;
  for (const json& item : doc) {
    if (!item.is_object() || item.size() != 2 || !item.contains("T") || !item.contains("E") ||
        !item["T"].is_string() || !item["E"].is_string())
      throw malformed_output_error("list item is not a {T, E} record", raw);
    out.emplace_back(item["T"].get<std::string>(), item["E"].get<std::string>());
  }
  return out;
}

// Folds a (T, E) stream into entities: a repeated slot starts a new entity.
// With `tolerate_note` set, unknown T labels are skipped and noted; otherwise
// they are malformed.
inline std::vector<DeviceEntity> assemble_entities(
    const std::vector<std::pair<std::string, std::string>>& pairs, const std::string& raw,
    std::string* tolerate_note) {
  std::vector<DeviceEntity> out;
  DeviceEntity cur;
  auto flush = [&out, &cur] {
    if (cur.has_any()) {
      out.push_back(cur);
      cur = DeviceEntity{};
    }
  };
  for (const auto& [t, e] : pairs) {
    std::optional<std::string> DeviceEntity::* slot = nullptr;
    if (t == "VENDOR")
      slot = &DeviceEntity::vendor;
    else if (t == "TYPE")
      slot = &DeviceEntity::dev_type;
    else if (t == "MODEL")
      slot = &DeviceEntity::model;
    else {
      if (!tolerate_note) throw malformed_output_error("unknown T label '" + t + "'", raw);
      append_note(*tolerate_note, "unknown T '" + t + "' skipped");
      continue;
    }
    if (cur.*slot) flush();
    cur.*slot = e;
  }
  flush();
  return out;
}

inline std::string render_entities(const std::vector<DeviceEntity>& entities) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const DeviceEntity& e : entities) {
    auto add = [&arr](const char* t, const std::optional<std::string>& v) {
      if (!v) return;
      nlohmann::ordered_json obj;
      obj["T"] = t;
      obj["E"] = *v;
      arr.push_back(std::move(obj));
    };
    add("VENDOR", e.vendor);
    add("TYPE", e.dev_type);
    add("MODEL", e.model);
  }
  return arr.dump();
}

inline std::string entity_display_name(const DeviceEntity& e) {
  std::string name;
  auto add = [&name](const std::optional<std::string>& v) {
    if (!v) return;
    if (!name.empty()) name += ' ';
    name += *v;
  };
  add(e.vendor);
  add(e.dev_type);
  add(e.model);
  return name;
}

// Leading yes/no token (case-insensitive, surrounding punctuation stripped);
// the remainder is the explanation.
inline std::pair<bool, std::string> parse_yes_no(const std::string& raw) {
  std::string_view s = trim(raw);
  if (s.empty()) throw malformed_output_error("empty output", raw);
  std::size_t end = 0;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
  std::string token(s.substr(0, end));
  std::string explanation(trim(s.substr(end)));
  const std::string_view wrap = "\"'`.,!?;:()";
  while (!token.empty() && wrap.find(token.front()) != std::string_view::npos) token.erase(token.begin());
  while (!token.empty() && wrap.find(token.back()) != std::string_view::npos) token.pop_back();
  token = to_lower(token);
  if (token == "yes") return {true, explanation};
  if (token == "no") return {false, explanation};
  throw malformed_output_error("missing yes/no token", raw);
}

// ---------------------------------------------------------------------------
// Pipeline steps
//
// Every step appends exactly one trace entry per backend call, carrying the
// prompt fingerprint and the raw output, even when that output then fails to
// parse or the call itself throws.

namespace detail {

inline std::string invoke_backend(CompletionBackend& backend, const std::string& prompt, int step,
                                  std::vector<StepTraceEntry>& trace) {
  StepTraceEntry entry{step, fingerprint_hex(prompt), "", ""};
  try {
    entry.raw_output = backend.complete(prompt);
  } catch (...) {
    entry.note = "backend call failed";
    trace.push_back(std::move(entry));
    throw;
  }
  trace.push_back(std::move(entry));
  return trace.back().raw_output;
}

}  // namespace detail

inline std::vector<DeviceEntity> recognize_entities(const std::string& response_text,
                                                    CompletionBackend& backend,
                                                    std::vector<StepTraceEntry>& trace) {
  if (trim(response_text).empty()) throw precondition_error("response text is empty");
  const std::string prompt =
      prompts::instantiate(prompts::step1_recognition(), {{"RESPONSE_DATA", response_text}});
  const std::string raw = detail::invoke_backend(backend, prompt, 1, trace);
  auto pairs = parse_entity_list(raw);
  std::string note;
  auto entities = assemble_entities(pairs, raw, &note);
  append_note(trace.back().note, note);
  return entities;
}

// Keeps an entity only when the backend echoes it back whole; echoed entities
// that match no candidate are malformed. Returns the confirmed subset in the
// original order.
inline std::vector<DeviceEntity> self_verify(const std::vector<DeviceEntity>& entities,
                                             const std::string& context, CompletionBackend& backend,
                                             std::vector<StepTraceEntry>& trace) {
  if (entities.empty()) throw precondition_error("no entities to verify");
  const std::string prompt = prompts::instantiate(
      prompts::step2_verification(),
      {{"ENTITIES", render_entities(entities)}, {"RESPONSE_DATA", context}});
  const std::string raw = detail::invoke_backend(backend, prompt, 2, trace);
  auto echoed = assemble_entities(parse_entity_list(raw), raw, nullptr);
  for (const DeviceEntity& e : echoed)
    if (std::find(entities.begin(), entities.end(), e) == entities.end())
      throw malformed_output_error("confirmed entity not among the candidates", raw);
  std::vector<DeviceEntity> confirmed;
  for (const DeviceEntity& e : entities)
    if (std::find(echoed.begin(), echoed.end(), e) != echoed.end()) confirmed.push_back(e);
  return confirmed;
}

// Fills missing vendor/type from search results for the model string; present
// fields are never overwritten. Empty retrieval leaves the entity unchanged.
inline DeviceEntity rag_complete(const DeviceEntity& entity, Retriever& retriever,
                                 CompletionBackend& backend, std::vector<StepTraceEntry>& trace) {
  if (!entity.model) throw precondition_error("entity has no model to search");
  if (entity.complete_fields()) throw precondition_error("entity already complete");

  std::vector<SearchResult> results;
  try {
    results = retriever.search(*entity.model);
  } catch (...) {
    trace.push_back({3, "", "", "retrieval failed"});
    throw;
  }
  if (results.empty()) {
    trace.push_back({3, "", "", "empty retrieval; entity unchanged"});
    return entity;
  }

  std::string snippets;
  for (const SearchResult& r : results) {
    snippets += "- " + r.title + ": " + r.snippet + "\n";
  }
  const std::string prompt = prompts::instantiate(
      prompts::step3_completion(), {{"ENTITY", *entity.model}, {"SEARCH_SNIPPETS", snippets}});
  const std::string raw = detail::invoke_backend(backend, prompt, 3, trace);
  std::string note;
  auto candidates = assemble_entities(parse_entity_list(raw), raw, &note);
  append_note(trace.back().note, note);

  DeviceEntity out = entity;
  for (const DeviceEntity& cand : candidates) {
    if (!out.vendor && cand.vendor) out.vendor = cand.vendor;
    if (!out.dev_type && cand.dev_type) out.dev_type = cand.dev_type;
  }
  return out;
}

inline bool confirm_origin(const std::string& response_text, const DeviceEntity& entity,
                           CompletionBackend& backend, std::vector<StepTraceEntry>& trace) {
  if (!entity.has_any()) throw precondition_error("entity has no fields");
  const std::string prompt = prompts::instantiate(
      prompts::step4_origin(),
      {{"ENTITY", entity_display_name(entity)}, {"RESPONSE_DATA", response_text}});
  const std::string raw = detail::invoke_backend(backend, prompt, 4, trace);
  return parse_yes_no(raw).first;
}

struct DetectorResult {
  bool verdict = false;  // true always means attack/anomaly present
  std::string explanation;
};

inline DetectorResult detect_attack(AttackKind kind, const std::string& input_text,
                                    CompletionBackend& backend,
                                    std::vector<StepTraceEntry>& trace) {
  if (trim(input_text).empty()) throw precondition_error("empty detector input");
  const prompts::PromptTemplate* t = nullptr;
  std::string_view slot;
  switch (kind) {
    case AttackKind::command_injection:
      t = &prompts::step5_command_injection();
      slot = "REQUEST_DATA";
      break;
    case AttackKind::path_traversal:
      t = &prompts::step5_path_traversal();
      slot = "REQUEST_DATA";
      break;
    case AttackKind::information_disclosure:
      t = &prompts::step5_information_disclosure();
      slot = "TRAFFIC_DATA";
      break;
    case AttackKind::ftp_anomaly:
      t = &prompts::step5_ftp_anomaly();
      slot = "FTP_DATA";
      break;
  }
  const std::string prompt = prompts::instantiate(*t, {{slot, input_text}});
  const std::string raw = detail::invoke_backend(backend, prompt, 5, trace);
  auto [yes, explanation] = parse_yes_no(raw);
  DetectorResult r;
  if (kind == AttackKind::ftp_anomaly) {
    // The FTP prompt asks whether activity is normal; a literal "no" means
    // an anomaly is present, so the verdict is the token's negation.
    r.verdict = !yes;
    append_note(trace.back().note, yes ? "polarity normalized: literal yes, normal activity"
                                       : "polarity normalized: literal no, anomaly present");
  } else {
    r.verdict = yes;
  }
  r.explanation = explanation;
  return r;
}

inline std::vector<AttackKind> detectors_for(FlowProtocol proto) {
  switch (proto) {
    case FlowProtocol::http:
      return {AttackKind::command_injection, AttackKind::path_traversal,
              AttackKind::information_disclosure};
    case FlowProtocol::ftp:
      return {AttackKind::ftp_anomaly};
    default:
      return {};
  }
}

// ---------------------------------------------------------------------------
// Pipeline driver
//
// Steps run in order I..V; a step that yields nothing ends the flow early
// with the partial Finding, and a step that gets skipped for cause leaves a
// note-only trace entry so the trace stays gapless. Errors embed into the
// Finding — a batch never aborts on one flow.

namespace detail {

inline void set_step_error(Finding& f, int step, std::string_view kind, std::string_view what) {
  f.error = "step " + step_roman(step) + ": " + std::string(kind) + ": " + std::string(what);
}

}  // namespace detail

inline Finding run_pipeline(const ParsedFlow& pf, CompletionBackend& backend, Retriever& retriever) {
  Finding f;
  f.flow_ref = pf.id;
  f.timestamp = pf.flow.timestamp;
  const std::string response_text(pf.flow.payload.begin(), pf.flow.payload.end());

  std::vector<DeviceEntity> entities;
  try {
    entities = recognize_entities(response_text, backend, f.step_trace);
  } catch (const error& e) {
    detail::set_step_error(f, 1, e.kind(), e.what());
    return f;
  } catch (const std::exception& e) {
    detail::set_step_error(f, 1, "unexpected", e.what());
    return f;
  }
  if (entities.empty()) {
    f.explanation = "no entities recognized";
    return f;
  }

  std::vector<DeviceEntity> confirmed;
  try {
    confirmed = self_verify(entities, response_text, backend, f.step_trace);
  } catch (const error& e) {
    detail::set_step_error(f, 2, e.kind(), e.what());
    return f;
  } catch (const std::exception& e) {
    detail::set_step_error(f, 2, "unexpected", e.what());
    return f;
  }
  if (confirmed.empty()) {
    f.explanation = "no entities confirmed";
    return f;
  }

  // The first confirmed entity drives the remaining steps.
  DeviceEntity primary = confirmed.front();
  if (primary.model && !primary.complete_fields()) {
    try {
      primary = rag_complete(primary, retriever, backend, f.step_trace);
    } catch (const error& e) {
      f.entity = primary;
      detail::set_step_error(f, 3, e.kind(), e.what());
      return f;
    } catch (const std::exception& e) {
      f.entity = primary;
      detail::set_step_error(f, 3, "unexpected", e.what());
      return f;
    }
  } else {
    f.step_trace.push_back({3, "", "",
                            primary.model ? "skipped: entity already complete"
                                          : "skipped: no model to search"});
  }
  f.entity = primary;

  bool origin = false;
  try {
    origin = confirm_origin(response_text, primary, backend, f.step_trace);
  } catch (const error& e) {
    detail::set_step_error(f, 4, e.kind(), e.what());
    return f;
  } catch (const std::exception& e) {
    detail::set_step_error(f, 4, "unexpected", e.what());
    return f;
  }
  f.is_iot_origin = origin;
  if (!origin) {
    f.explanation = "response not generated by the device";
    return f;
  }

  const std::vector<AttackKind> kinds = detectors_for(pf.flow.protocol);
  if (kinds.empty()) {
    f.step_trace.push_back(
        {5, "", "", "no detectors for protocol " + std::string(to_string(pf.flow.protocol))});
    f.explanation = "no detectors for protocol";
    return f;
  }
  for (AttackKind kind : kinds) {
    DetectorResult r;
    try {
      r = detect_attack(kind, response_text, backend, f.step_trace);
    } catch (const error& e) {
      detail::set_step_error(f, 5, e.kind(), e.what());
      return f;
    } catch (const std::exception& e) {
      detail::set_step_error(f, 5, "unexpected", e.what());
      return f;
    }
    if (r.verdict) {
      f.attack_kind = kind;
      f.verdict = true;
      f.explanation = r.explanation;
      return f;
    }
  }
  f.explanation = "no attack identified";
  return f;
}

inline std::vector<Finding> analyze_flows(const std::vector<ParsedFlow>& flows,
                                          CompletionBackend& backend, Retriever& retriever) {
  std::vector<Finding> findings;
  findings.reserve(flows.size());
  for (const ParsedFlow& pf : flows) findings.push_back(run_pipeline(pf, backend, retriever));
  return findings;
}

// ---------------------------------------------------------------------------
// Stub backends

class ScriptedBackend final : public CompletionBackend {
public:
  void add(const std::string& prompt, std::string response) {
    responses_[fingerprint_hex(prompt)] = std::move(response);
  }

  void add_by_fingerprint(const std::string& fp, std::string response) {
    if (!valid_fingerprint(fp)) throw precondition_error("invalid prompt fingerprint '" + fp + "'");
    responses_[fp] = std::move(response);
  }

  std::string complete(const std::string& prompt) override {
    const std::string fp = fingerprint_hex(prompt);
    auto it = responses_.find(fp);
    if (it == responses_.end())
      throw backend_error("no scripted response for prompt fingerprint " + fp);
    return it->second;
  }

  std::string description() const override { return "scripted"; }
  std::size_t size() const { return responses_.size(); }

  // File format: `<fingerprint> <base64 response>` per line.
  static ScriptedBackend load(std::string_view text) {
    ScriptedBackend b;
    std::size_t lineno = 0;
    for (std::string_view raw : split_lines(text)) {
      ++lineno;
      std::string_view line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto toks = split_ws(line);
      if (toks.size() != 2) throw parse_error("expected `<fingerprint> <base64>`", lineno);
      std::string fp(toks[0]);
      if (!valid_fingerprint(fp)) throw parse_error("invalid prompt fingerprint", lineno);
      if (b.responses_.count(fp)) throw duplicate_id_error(fp, lineno);
      auto bytes = base64_decode(toks[1]);
      if (!bytes) throw parse_error("invalid base64 response", lineno);
      b.responses_[fp] = std::string(bytes->begin(), bytes->end());
    }
    return b;
  }

  std::string serialize() const {
    std::vector<std::pair<std::string, std::string>> rows(responses_.begin(), responses_.end());
    std::sort(rows.begin(), rows.end());
    std::string out;
    for (const auto& [fp, response] : rows) out += fp + " " + base64_encode(response) + "\n";
    return out;
  }

private:
  static bool valid_fingerprint(const std::string& fp) {
    if (fp.size() != 16) return false;
    for (char c : fp)
      if (!hex_digit(c) || (c >= 'A' && c <= 'F')) return false;
    return true;
  }
  std::unordered_map<std::string, std::string> responses_;
};

// Emits random byte strings; exercises the no-crash guarantee of the grammar
// layer. Deterministic per seed.
class FuzzBackend final : public CompletionBackend {
public:
  explicit FuzzBackend(std::uint64_t seed) : rng_(seed) {}

  std::string complete(const std::string&) override {
    const std::size_t len = rng_() % 200;
    std::string out;
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i) out.push_back(char(rng_() & 0xff));
    return out;
  }

  std::string description() const override { return "fuzz"; }

private:
  std::mt19937_64 rng_;
};

class ScriptedRetriever final : public Retriever {
public:
  void add(const std::string& query, SearchResult result) {
    results_[query].push_back(std::move(result));
  }

  std::vector<SearchResult> search(const std::string& query) override {
    auto it = results_.find(query);
    return it == results_.end() ? std::vector<SearchResult>{} : it->second;
  }

  std::string description() const override { return "scripted"; }

  // File format: `query<TAB>title<TAB>snippet` per line; repeated queries
  // accumulate results in file order.
  static ScriptedRetriever load(std::string_view text) {
    ScriptedRetriever r;
    std::size_t lineno = 0;
    for (std::string_view raw : split_lines(text)) {
      ++lineno;
      if (trim(raw).empty() || trim(raw).front() == '#') continue;
      const std::size_t t1 = raw.find('\t');
      const std::size_t t2 = t1 == std::string_view::npos ? std::string_view::npos : raw.find('\t', t1 + 1);
      if (t1 == std::string_view::npos || t2 == std::string_view::npos)
        throw parse_error("expected `query<TAB>title<TAB>snippet`", lineno);
      if (raw.find('\t', t2 + 1) != std::string_view::npos)
        throw parse_error("too many fields", lineno);
      r.add(std::string(raw.substr(0, t1)),
            {std::string(raw.substr(t1 + 1, t2 - t1 - 1)), std::string(raw.substr(t2 + 1))});
    }
    return r;
  }

private:
  std::unordered_map<std::string, std::vector<SearchResult>> results_;
};

class EmptyRetriever final : public Retriever {
public:
  std::vector<SearchResult> search(const std::string&) override { return {}; }
  std::string description() const override { return "empty"; }
};

class FailingRetriever final : public Retriever {
public:
  std::vector<SearchResult> search(const std::string&) override {
    throw retrieval_error("search backend unavailable");
  }
  std::string description() const override { return "failing"; }
};

// ---------------------------------------------------------------------------
// Findings file
//
// One finding per line in the key=value grammar. The steps field packs trace
// entries as `<roman>:<fingerprint>:<base64 raw>:<base64 note>` joined by
// commas; none of those alphabets contain ':' or ','.

inline std::string format_finding(const Finding& f) {
  if (f.attack_kind.has_value() != f.verdict.has_value())
    throw precondition_error("verdict must accompany attack kind");
  std::string line = "flow=" + quote_value(f.flow_ref);
  line += " ts=" + format_double(f.timestamp);
  if (f.entity) {
    if (f.entity->vendor) line += " vendor=" + quote_value(*f.entity->vendor);
    if (f.entity->dev_type) line += " type=" + quote_value(*f.entity->dev_type);
    if (f.entity->model) line += " model=" + quote_value(*f.entity->model);
  }
  if (f.is_iot_origin) line += std::string(" origin=") + (*f.is_iot_origin ? "true" : "false");
  if (f.attack_kind) {
    line += " attack=";
    line += to_string(*f.attack_kind);
    line += std::string(" verdict=") + (*f.verdict ? "true" : "false");
  }
  line += " explanation=" + quote_value(f.explanation);
  if (f.error) line += " error=" + quote_value(*f.error);
  std::string steps;
  for (const StepTraceEntry& e : f.step_trace) {
    if (!steps.empty()) steps += ',';
    steps += step_roman(e.step) + ":" + e.prompt_fingerprint + ":" + base64_encode(e.raw_output) +
             ":" + base64_encode(e.note);
  }
  line += " steps=" + quote_value(steps);
  return line;
}

inline Finding parse_finding(const kv_record& rec, std::size_t lineno) {
  for (const auto& [key, value] : rec.fields) {
    (void)value;
    if (key != "flow" && key != "ts" && key != "vendor" && key != "type" && key != "model" &&
        key != "origin" && key != "attack" && key != "verdict" && key != "explanation" &&
        key != "error" && key != "steps")
      throw parse_error("unknown finding field '" + key + "'", lineno);
  }
  auto require = [&rec, lineno](std::string_view key) -> const std::string& {
    const std::string* v = rec.get(key);
    if (!v) throw parse_error("missing finding field '" + std::string(key) + "'", lineno);
    return *v;
  };
  auto parse_bool = [lineno](const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw parse_error("invalid boolean '" + v + "'", lineno);
  };

  Finding f;
  f.flow_ref = require("flow");
  auto ts = parse_double(require("ts"));
  if (!ts) throw parse_error("invalid ts value", lineno);
  f.timestamp = *ts;

  DeviceEntity entity;
  if (const std::string* v = rec.get("vendor")) entity.vendor = *v;
  if (const std::string* v = rec.get("type")) entity.dev_type = *v;
  if (const std::string* v = rec.get("model")) entity.model = *v;
  if (entity.has_any()) f.entity = entity;

  if (const std::string* v = rec.get("origin")) f.is_iot_origin = parse_bool(*v);
  const std::string* attack = rec.get("attack");
  const std::string* verdict = rec.get("verdict");
  if (bool(attack) != bool(verdict)) throw parse_error("attack and verdict must appear together", lineno);
  if (attack) {
    auto kind = parse_attack_kind(*attack);
    if (!kind) throw parse_error("unknown attack kind '" + *attack + "'", lineno);
    f.attack_kind = *kind;
    f.verdict = parse_bool(*verdict);
  }
  f.explanation = require("explanation");
  if (const std::string* v = rec.get("error")) f.error = *v;

  const std::string& steps = require("steps");
  std::size_t pos = 0;
  while (pos < steps.size()) {
    std::size_t comma = steps.find(',', pos);
    std::string_view entry(steps.data() + pos,
                           (comma == std::string::npos ? steps.size() : comma) - pos);
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= entry.size(); ++i) {
      if (i == entry.size() || entry[i] == ':') {
        parts.push_back(entry.substr(start, i - start));
        start = i + 1;
      }
    }
    if (parts.size() != 4) throw parse_error("malformed step entry", lineno);
    auto step = roman_step(parts[0]);
    if (!step) throw parse_error("invalid step label", lineno);
    auto raw = base64_decode(parts[2]);
    auto note = base64_decode(parts[3]);
    if (!raw || !note) throw parse_error("invalid base64 in step entry", lineno);
    f.step_trace.push_back({*step, std::string(parts[1]),
                            std::string(raw->begin(), raw->end()),
                            std::string(note->begin(), note->end())});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return f;
}

inline std::vector<Finding> parse_findings(std::string_view text) {
  std::vector<Finding> findings;
  std::size_t lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    findings.push_back(parse_finding(parse_kv_line(line, lineno), lineno));
  }
  return findings;
}

inline std::string format_findings(const std::vector<Finding>& findings) {
  std::string out;
  for (const Finding& f : findings) out += format_finding(f) + "\n";
  return out;
}

}  // namespace exitscope

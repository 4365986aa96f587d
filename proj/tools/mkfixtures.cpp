// Regenerates the scripted fixture files under data/: the raw flow corpus,
// the byte-signature file, the scripted search snippets, and the scripted
// completion-backend responses. Responses are recorded by driving the real
// pipeline with a queue-fed backend, so the committed fingerprints always
// match the prompts the library actually builds. Output is deterministic;
// rerunning must produce identical bytes.
#include <cstdio>
#include <deque>
#include <string>
#include <vector>

#include "exitscope/analyzer.hpp"
#include "exitscope/cli.hpp"
#include "exitscope/traffic.hpp"

namespace {

using namespace exitscope;

struct QueueBackend final : CompletionBackend {
  std::deque<std::string> queue;
  std::vector<std::pair<std::string, std::string>>* recorded;

  std::string complete(const std::string& prompt) override {
    if (queue.empty()) throw backend_error("fixture response queue exhausted");
    std::string response = queue.front();
    queue.pop_front();
    recorded->emplace_back(prompt, response);
    return response;
  }
  std::string description() const override { return "queue"; }
};

std::vector<std::uint8_t> bytes_of(std::string_view s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

std::string hex_pattern(const std::vector<std::uint8_t>& bytes) {
  static const char digits[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : bytes) {
    if (!out.empty()) out += ' ';
    out += digits[b >> 4];
    out += digits[b & 0xf];
  }
  return out;
}

ParsedFlow make_flow(std::string id, FlowDirection dir, std::string_view src, std::string_view dst,
                     FlowProtocol proto, std::optional<std::string> host, std::optional<int> status,
                     std::vector<std::uint8_t> payload, double ts) {
  ParsedFlow pf;
  pf.id = std::move(id);
  pf.flow.direction = dir;
  pf.flow.src_ip = *parse_ipv4(src);
  pf.flow.dst_ip = *parse_ipv4(dst);
  pf.flow.protocol = proto;
  pf.flow.host_header = std::move(host);
  pf.flow.status_code = status;
  pf.flow.payload = std::move(payload);
  pf.flow.timestamp = ts;
  return pf;
}

bool check(bool ok, const char* what) {
  if (!ok) std::fprintf(stderr, "fixture expectation failed: %s\n", what);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data";

  // --- payloads -----------------------------------------------------------
  const std::string dahua_payload =
      "HTTP/1.1 200 OK\r\nServer: Webs\r\nContent-Type: text/html\r\n\r\n"
      "<html><head><title>WEB SERVICE</title></head><body>"
      "var g_deviceType = 'IPC-HFW2231S'; build 2.800.0000000.16.R</body></html>";
  const std::string dlink_payload =
      "GET /cgi-bin/nas_sharing.cgi?user=messagebus&passwd=&cmd=15&system=aWQ= HTTP/1.1\r\n"
      "Host: 203.0.113.3\r\n\r\n"
      "HTTP/1.1 200 OK\r\nServer: lighttpd\r\n\r\n"
      "<root><name>DNS-320L</name><vendor>D-Link</vendor><version>1.11</version></root>";
  const std::string sony_payload =
      "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\n\r\n"
      "<html><head><title>My travel blog</title></head><body>"
      "<p>Golden hour in Lisbon, shot on my SONY ILCE-7M3 camera with the 35mm prime.</p>"
      "</body></html>";
  const std::string asus_payload =
      "220 Welcome to ASUS CM-32_AC2600 FTP service.\r\n"
      "USER anonymous\r\n331 Please specify the password.\r\n"
      "PASS -\r\n230 Login successful.\r\n";

  // DVR control-protocol probe: a 20-byte header (reserved bytes set by the
  // attacker tool, data length zero) plus 12 trailing command bytes.
  const std::vector<std::uint8_t> dvr_probe = {
      0x5a, 0x5a, 0xaa, 0x55, 0xd3, 0x30, 0x00, 0x00, 0xec, 0x03, 0x00, 0x00, 0x00, 0x00, 0x00,
      0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
      0x00, 0x00};
  const std::string nas_sharing_pattern = "/cgi-bin/nas_sharing.cgi?user=messagebus&passwd=";

  const std::vector<std::uint8_t> telnet_payload = {0xff, 0xfb, 0x01, 'l', 'o', 'g', 'i', 'n', ':'};

  // --- flow corpus ---------------------------------------------------------
  // Relay-side address is x1 (10.0.1.1) from the reference roster; device
  // and server endpoints live in the 203.0.113.0/24 and 198.51.100.0/24
  // documentation ranges.
  std::vector<ParsedFlow> flows;
  flows.push_back(make_flow("f_internal", FlowDirection::inbound, "10.0.0.1", "10.0.1.1",
                            FlowProtocol::other, std::nullopt, std::nullopt, bytes_of("EXTEND2"),
                            1716700000));
  flows.push_back(make_flow("f_google", FlowDirection::outbound, "10.0.1.1", "203.0.113.80",
                            FlowProtocol::http, "www.google.com", std::nullopt,
                            bytes_of("GET / HTTP/1.1\r\nHost: www.google.com\r\n\r\n"), 1716710000));
  flows.push_back(make_flow("f_hosted", FlowDirection::outbound, "10.0.1.1", "198.51.100.7",
                            FlowProtocol::http, std::nullopt, std::nullopt,
                            bytes_of("GET /robots.txt HTTP/1.1\r\n\r\n"), 1716720000));
  flows.push_back(make_flow("f_5xx", FlowDirection::inbound, "203.0.113.9", "10.0.1.1",
                            FlowProtocol::http, std::nullopt, 503,
                            bytes_of("HTTP/1.1 503 Service Unavailable\r\n\r\n"), 1716730000));
  flows.push_back(make_flow("f_telnet", FlowDirection::inbound, "203.0.113.10", "10.0.1.1",
                            FlowProtocol::telnet, std::nullopt, std::nullopt, telnet_payload,
                            1716740000));
  flows.push_back(make_flow("f_dahua", FlowDirection::inbound, "203.0.113.2", "10.0.1.1",
                            FlowProtocol::http, std::nullopt, 200, bytes_of(dahua_payload),
                            1716800000));
  flows.push_back(make_flow("f_xiongmai", FlowDirection::inbound, "203.0.113.6", "10.0.1.1",
                            FlowProtocol::other, std::nullopt, std::nullopt, dvr_probe, 1716900000));
  flows.push_back(make_flow("f_sony", FlowDirection::inbound, "203.0.113.4", "10.0.1.1",
                            FlowProtocol::http, std::nullopt, 200, bytes_of(sony_payload),
                            1717000000));
  flows.push_back(make_flow("f_dlink", FlowDirection::outbound, "10.0.1.1", "203.0.113.3",
                            FlowProtocol::http, std::nullopt, std::nullopt, bytes_of(dlink_payload),
                            1717600000));
  flows.push_back(make_flow("f_asus_ftp", FlowDirection::inbound, "203.0.113.5", "10.0.1.1",
                            FlowProtocol::ftp, std::nullopt, std::nullopt, bytes_of(asus_payload),
                            1718000000));

  std::string flows_text;
  for (const ParsedFlow& pf : flows) flows_text += format_flow(pf) + "\n";
  write_file(out_dir + "/flows_raw.txt", flows_text);

  // --- signatures ----------------------------------------------------------
  std::string sig_text;
  sig_text += "# byte signatures matched against kept-flow payloads\n";
  sig_text += "cve_2024_3272_hardcoded_creds |" + hex_pattern(bytes_of(nas_sharing_pattern)) +
              "| cve=CVE-2024-3272 msg=\"Potential Usage of Hard-coded Credentials\"\n";
  sig_text += "cve_2024_4582_cmd_injection |" + hex_pattern(dvr_probe) +
              "| cve=CVE-2024-4582 msg=\"Attempt to Exploit Command Injection Vulnerability\"\n";
  write_file(out_dir + "/signatures.txt", sig_text);

  // --- scripted retriever --------------------------------------------------
  const std::string snippets_text =
      "IPC-HFW2231S\tDahua IPC-HFW2231S 2MP WDR IR Bullet Network Camera\t"
      "Specifications and firmware downloads for the Dahua IPC-HFW2231S bullet camera.\n"
      "IPC-HFW2231S\tIPC-HFW2231S datasheet\t"
      "2MP fixed-focal bullet network camera from Dahua Technology.\n";
  write_file(out_dir + "/search_snippets.txt", snippets_text);
  ScriptedRetriever retriever = ScriptedRetriever::load(snippets_text);

  // --- scripted backend, recorded by replaying the pipeline ----------------
  std::vector<std::pair<std::string, std::string>> recorded;
  auto replay = [&recorded, &retriever](const ParsedFlow& pf, std::deque<std::string> responses) {
    QueueBackend qb;
    qb.queue = std::move(responses);
    qb.recorded = &recorded;
    Finding f = run_pipeline(pf, qb, retriever);
    if (!check(qb.queue.empty(), "response queue fully consumed")) std::exit(1);
    return f;
  };

  const Finding f_dahua = replay(
      flows[5],
      {R"([{"T":"MODEL","E":"IPC-HFW2231S"}])",
       R"([{"T":"MODEL","E":"IPC-HFW2231S"}])",
       R"([{"T":"VENDOR","E":"Dahua"},{"T":"TYPE","E":"Camera"}])",
       "Yes. The response is a device web service page emitted by the camera itself.",
       "No. The request merely fetches the landing page.",
       "No. The path stays inside the web root.",
       "Yes. The response reveals the device model and firmware build to an unauthenticated "
       "client."});
  bool ok = check(f_dahua.entity && f_dahua.entity->vendor == "Dahua" &&
                      f_dahua.entity->dev_type == "Camera" &&
                      f_dahua.entity->model == "IPC-HFW2231S",
                  "dahua entity completed");
  ok &= check(f_dahua.is_iot_origin == true, "dahua origin confirmed");
  ok &= check(f_dahua.attack_kind == AttackKind::information_disclosure && f_dahua.verdict == true,
              "dahua information disclosure");

  const Finding f_xiongmai = replay(flows[6], {"[]"});
  ok &= check(!f_xiongmai.entity && !f_xiongmai.error, "dvr probe yields no entities");

  const Finding f_sony = replay(
      flows[7],
      {R"([{"T":"VENDOR","E":"SONY"},{"T":"TYPE","E":"CAMERA"},{"T":"MODEL","E":"ILCE-7M3"}])",
       R"([{"T":"VENDOR","E":"SONY"},{"T":"TYPE","E":"CAMERA"},{"T":"MODEL","E":"ILCE-7M3"}])",
       "No. The page is a personal blog that merely mentions the camera."});
  ok &= check(f_sony.is_iot_origin == false && !f_sony.attack_kind, "sony blog rejected at origin");

  const Finding f_dlink = replay(
      flows[8],
      {R"([{"T":"VENDOR","E":"D-Link"},{"T":"TYPE","E":"NAS"},{"T":"MODEL","E":"DNS-320L"}])",
       R"([{"T":"VENDOR","E":"D-Link"},{"T":"TYPE","E":"NAS"},{"T":"MODEL","E":"DNS-320L"}])",
       "Yes. The transcript includes the device's own service response.",
       "Yes. The request abuses hard-coded credentials and passes a system command through the "
       "CGI endpoint."});
  ok &= check(f_dlink.attack_kind == AttackKind::command_injection && f_dlink.verdict == true,
              "dlink command injection");

  const Finding f_asus = replay(
      flows[9],
      {R"([{"T":"VENDOR","E":"ASUS"},{"T":"TYPE","E":"Modem Router"},{"T":"MODEL","E":"CM-32_AC2600"}])",
       R"([{"T":"VENDOR","E":"ASUS"},{"T":"TYPE","E":"Modem Router"},{"T":"MODEL","E":"CM-32_AC2600"}])",
       "Yes. The banner is emitted by the device's FTP service.",
       "No. The presence of `' at the end of the banner message is unusual and may indicate an "
       "attempt to inject malicious code or an incompatible client. This activity could be a "
       "sign of an anomaly or unauthorized access attempt."});
  ok &= check(f_asus.attack_kind == AttackKind::ftp_anomaly && f_asus.verdict == true,
              "ftp polarity normalized to anomaly");

  if (!ok) return 1;

  ScriptedBackend backend;
  for (const auto& [prompt, response] : recorded) backend.add(prompt, response);
  write_file(out_dir + "/scripted_backend.txt", backend.serialize());

  std::printf("wrote %s/{flows_raw,signatures,search_snippets,scripted_backend}.txt (%zu prompts)\n",
              out_dir.c_str(), recorded.size());
  return 0;
}

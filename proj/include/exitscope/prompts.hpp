// Versioned prompt templates for the five-step analysis pipeline. Templates
// are string assets with named `<SLOT>` substitution points; the pipeline and
// any scripted-backend fixture generator must instantiate through the same
// functions so prompt fingerprints agree.
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

#include "exitscope/common.hpp"

namespace exitscope::prompts {

struct PromptTemplate {
  std::string_view name;
  std::string_view version;
  std::string_view text;
};

// Replaces every occurrence of `<KEY>` for each (KEY, value) pair; a slot
// that never occurs in the template is a caller bug.
inline std::string instantiate(const PromptTemplate& t,
                               std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  std::string out(t.text);
  for (const auto& [key, value] : slots) {
    std::string placeholder = "<" + std::string(key) + ">";
    if (out.find(placeholder) == std::string::npos)
      throw precondition_error("template '" + std::string(t.name) + "' has no slot " + placeholder);
    out = replace_all(out, placeholder, std::string(value));
  }
  return out;
}

// Step I: named-entity recognition over scan/response text. Output grammar is
// a bracketed list of {"T","E"} records; seven worked examples anchor it.
inline const PromptTemplate& step1_recognition() {
  static const PromptTemplate t{
      "step1_recognition", "v1",
      R"(You are an expert in identifying IoT devices from network response data. Analyze the response data and extract any IoT device entities it reveals. Output a list of dictionaries wherein each dictionary includes 'T' (type of entity) and 'E' (entity). 'T' must be one of VENDOR, TYPE, MODEL. Output [] when the data reveals no IoT device. Do not output anything except the list.

Example 1:
Response data: HTTP/1.1 200 OK Server: Hikvision-Webs ... <title>login</title> model DS-2CD2042WD
Output: [{"T":"VENDOR","E":"Hikvision"},{"T":"TYPE","E":"Camera"},{"T":"MODEL","E":"DS-2CD2042WD"}]

Example 2:
Response data: HTTP/1.1 200 OK ... <title>NETSurveillance WEB</title>
Output: [{"T":"VENDOR","E":"Xiongmai"},{"T":"TYPE","E":"DVR"}]

Example 3:
Response data: 220 Welcome to ASUS CM-32_AC2600 FTP service.
Output: [{"T":"VENDOR","E":"ASUS"},{"T":"TYPE","E":"Modem Router"},{"T":"MODEL","E":"CM-32_AC2600"}]

Example 4:
Response data: HTTP/1.1 200 OK Server: Apache/2.4.41 (Ubuntu) <html><body>It works!</body></html>
Output: []

Example 5:
Response data: HTTP/1.1 401 Unauthorized WWW-Authenticate: Basic realm="TP-LINK Wireless N Router TL-WR841N"
Output: [{"T":"VENDOR","E":"TP-Link"},{"T":"TYPE","E":"Router"},{"T":"MODEL","E":"TL-WR841N"}]

Example 6:
Response data: RTSP/1.0 200 OK Server: Dahua Rtsp Server
Output: [{"T":"VENDOR","E":"Dahua"},{"T":"TYPE","E":"Camera"}]

Example 7:
Response data: <html>My travel blog - shot on my SONY ILCE-7M3 camera in Lisbon</html>
Output: [{"T":"VENDOR","E":"SONY"},{"T":"TYPE","E":"CAMERA"},{"T":"MODEL","E":"ILCE-7M3"}]

Response data: <RESPONSE_DATA>
Output:)"};
  return t;
}

// Step II: self-verification of previously recognized entities against the
// same response data; echoes back only the confirmed entities.
inline const PromptTemplate& step2_verification() {
  static const PromptTemplate t{
      "step2_verification", "v1",
      R"(You previously recognized the following IoT device entities in a piece of network response data. Re-verify each entity against the response data and drop any entity that is not genuinely supported by it (for example a hallucinated vendor, type, or model). Output the confirmed entities as a list of dictionaries wherein each dictionary includes 'T' (type of entity, one of VENDOR, TYPE, MODEL) and 'E' (entity), keeping the original order and wording. Output [] if none survive. Do not output anything except the list.

Recognized entities: <ENTITIES>

Response data: <RESPONSE_DATA>
Output:)"};
  return t;
}

// Step III: retrieval-augmented completion of missing vendor/type fields
// from search results for the model string.
inline const PromptTemplate& step3_completion() {
  static const PromptTemplate t{
      "step3_completion", "v1",
      R"(The IoT device model <ENTITY> was observed in network response data, but its vendor and/or device type are unknown. Use the following search results (titles and snippets) to identify the missing vendor and device type for this model. Output a list of dictionaries wherein each dictionary includes 'T' (type of entity, one of VENDOR, TYPE) and 'E' (entity). Output [] if the search results do not support an identification. Do not output anything except the list.

Search results:
<SEARCH_SNIPPETS>

Output:)"};
  return t;
}

// Step IV: binary origin confirmation — was the full response actually
// generated by the named device (as opposed to merely mentioning it)?
inline const PromptTemplate& step4_origin() {
  static const PromptTemplate t{
      "step4_origin", "v1",
      R"(You are verifying whether network response data was generated by an IoT device itself, rather than merely mentioning one. A web page that talks about a device (for example a blog or a shop listing) was not generated by it. Device entity: <ENTITY>. Begin your answer with "Yes" if the response data below was generated by this IoT device, or "No" otherwise, then explain briefly.

Response data: <RESPONSE_DATA>
Answer:)"};
  return t;
}

// Step V detectors. Each asks for a leading yes/no token followed by an
// explanation. The FTP prompt's polarity is inverted by design: it asks
// whether activity is normal, so a literal "no" signals an anomaly.
inline const PromptTemplate& step5_command_injection() {
  static const PromptTemplate t{
      "step5_command_injection", "v1",
      R"(Analyze the following HTTP requests and determine if there is evidence of command injection. Begin your answer with "Yes" if there is evidence of command injection, or "No" otherwise, then explain briefly.

Example:
Request: GET /cgi-bin/admin.cgi?cmd=ls;cat%20/etc/passwd HTTP/1.1
Answer: Yes. The query string chains a shell command after the expected parameter.

Request data: <REQUEST_DATA>
Answer:)"};
  return t;
}

inline const PromptTemplate& step5_path_traversal() {
  static const PromptTemplate t{
      "step5_path_traversal", "v1",
      R"(Analyze the given HTTP request and determine if it contains a path traversal attack. Begin your answer with "Yes" if it contains a path traversal attack, or "No" otherwise, then explain briefly.

Example:
Request: GET /../../../../etc/shadow HTTP/1.1
Answer: Yes. The path climbs out of the web root with repeated parent-directory segments.

Request data: <REQUEST_DATA>
Answer:)"};
  return t;
}

inline const PromptTemplate& step5_information_disclosure() {
  static const PromptTemplate t{
      "step5_information_disclosure", "v1",
      R"(Analyze the following HTTP request and its corresponding response. Your objective is to assess whether the traffic demonstrates a general information disclosure vulnerability. Begin your answer with "Yes" if it does, or "No" otherwise, then explain briefly.

Example:
Request: GET /config/backup.cfg HTTP/1.1
Response: HTTP/1.1 200 OK ... admin_password=tlJwpbo6
Answer: Yes. The response exposes a credential to an unauthenticated requester.

Traffic data: <TRAFFIC_DATA>
Answer:)"};
  return t;
}

inline const PromptTemplate& step5_ftp_anomaly() {
  static const PromptTemplate t{
      "step5_ftp_anomaly", "v1",
      R"(Analyze the following FTP data from a network traffic stream. Determine if the user activities are normal and legitimate. Identify any signs of unauthorized access, anomalies, or security concerns. Begin your answer with "Yes" if the activities are normal and legitimate, or "No" if you identify any such signs, then explain briefly. A "no" response indicates the presence of irregularities.

Example:
FTP data: 220 FTP ready. USER alice PASS **** RETR report.pdf 226 Transfer complete.
Answer: Yes. The session is an ordinary authenticated download.

FTP data: <FTP_DATA>
Answer:)"};
  return t;
}

}  // namespace exitscope::prompts

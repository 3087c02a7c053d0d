// Copyright 2026 The Ens2 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ens2/protocol.hpp"

#include "ens2/error.hpp"
#include "json.hpp"
#include "json_codec.hpp"

namespace ens2::protocol {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {"SearchRequest", "SearchProgress", "SearchResult",
                                           "PredictRequest", "PredictResult", "Heartbeat", "Error"};

ojson to_ordered(const json& j) { return ojson::parse(j.dump()); }

ojson payload_json(const SearchRequest& p) {
  ojson j;
  j["dataset_path"] = p.dataset_path;
  j["target"] = p.target;
  j["metric"] = std::string(ens2::to_string(p.metric));
  j["time_budget_s"] = p.time_budget_s;
  j["refit_fraction"] = p.refit_fraction;
  j["seed"] = p.seed;
  j["artifact_dir"] = p.artifact_dir;
  j["searcher"] = std::string(ens2::to_string(p.searcher));
  j["searcher_id"] = p.searcher_id;
  return j;
}

ojson payload_json(const SearchProgress& p) {
  ojson j;
  j["record"] = to_ordered(detail::record_json(p.record));
  return j;
}

ojson payload_json(const SearchResult& p) {
  ojson j;
  j["status"] = std::string(ens2::to_string(p.status));
  j["reason"] = p.reason;
  j["pipeline_count"] = p.pipeline_count;
  j["refit_count"] = p.refit_count;
  j["elapsed_s"] = p.elapsed_s;
  return j;
}

ojson payload_json(const PredictRequest& p) {
  ojson j;
  j["pipeline_id"] = p.pipeline_id;
  j["artifact_dir"] = p.artifact_dir;
  j["test_dataset_path"] = p.test_dataset_path;
  j["output_path"] = p.output_path;
  return j;
}

ojson payload_json(const PredictResult& p) {
  ojson j;
  j["pipeline_id"] = p.pipeline_id;
  j["output_path"] = p.output_path;
  j["rows"] = p.rows;
  return j;
}

ojson payload_json(const Heartbeat& p) {
  ojson j;
  j["seq"] = p.seq;
  return j;
}

ojson payload_json(const ErrorInfo& p) {
  ojson j;
  j["code"] = p.code;
  j["message"] = p.message;
  return j;
}

// Field accessors that turn every schema violation into a ProtocolError.
class Reader {
 public:
  Reader(const json& obj, std::size_t offset) : obj_(obj), offset_(offset) {}

  const json& field(const char* name, json::value_t type) const {
    auto it = obj_.find(name);
    if (it == obj_.end()) throw ProtocolError(std::string("missing field '") + name + "'", offset_);
    const bool ok = type == json::value_t::number_float ? it->is_number()
                    : type == json::value_t::number_unsigned
                        ? it->is_number_unsigned() || (it->is_number_integer() && it->get<std::int64_t>() >= 0)
                    : type == json::value_t::number_integer ? it->is_number_integer()
                                                            : it->type() == type;
    if (!ok) throw ProtocolError(std::string("field '") + name + "' has the wrong type", offset_);
    return *it;
  }

  std::string str(const char* name) const { return field(name, json::value_t::string).get<std::string>(); }
  double num(const char* name) const { return field(name, json::value_t::number_float).get<double>(); }
  std::uint64_t u64(const char* name) const { return field(name, json::value_t::number_unsigned).get<std::uint64_t>(); }
  const json& obj(const char* name) const { return field(name, json::value_t::object); }

  template <typename F>
  auto convert(const char* name, F&& f) const {
    try {
      return f(str(name));
    } catch (const ProtocolError&) {
      throw;
    } catch (const Error& e) {
      throw ProtocolError(std::string("field '") + name + "': " + e.what(), offset_);
    }
  }

 private:
  const json& obj_;
  std::size_t offset_;
};

Payload decode_payload(Kind kind, const json& body, std::size_t offset) {
  Reader r(body, offset);
  switch (kind) {
    case Kind::kSearchRequest: {
      SearchRequest p;
      p.dataset_path = r.str("dataset_path");
      p.target = r.str("target");
      p.metric = r.convert("metric", [](const std::string& s) { return metric_from_string(s); });
      p.time_budget_s = r.num("time_budget_s");
      p.refit_fraction = r.num("refit_fraction");
      p.seed = r.u64("seed");
      p.artifact_dir = r.str("artifact_dir");
      p.searcher = r.convert("searcher", [](const std::string& s) { return searcher_kind_from_string(s); });
      p.searcher_id = r.str("searcher_id");
      return p;
    }
    case Kind::kSearchProgress: {
      SearchProgress p;
      try {
        p.record = detail::record_from(r.obj("record"));
      } catch (const ProtocolError&) {
        throw;
      } catch (const std::exception& e) {
        throw ProtocolError(std::string("bad record: ") + e.what(), offset);
      }
      return p;
    }
    case Kind::kSearchResult: {
      SearchResult p;
      p.status = r.convert("status", [](const std::string& s) { return search_status_from_string(s); });
      p.reason = r.str("reason");
      p.pipeline_count = r.u64("pipeline_count");
      p.refit_count = r.u64("refit_count");
      p.elapsed_s = r.num("elapsed_s");
      return p;
    }
    case Kind::kPredictRequest: {
      PredictRequest p;
      p.pipeline_id = r.str("pipeline_id");
      p.artifact_dir = r.str("artifact_dir");
      p.test_dataset_path = r.str("test_dataset_path");
      p.output_path = r.str("output_path");
      return p;
    }
    case Kind::kPredictResult: {
      PredictResult p;
      p.pipeline_id = r.str("pipeline_id");
      p.output_path = r.str("output_path");
      p.rows = r.u64("rows");
      return p;
    }
    case Kind::kHeartbeat: {
      Heartbeat p;
      p.seq = r.u64("seq");
      return p;
    }
    case Kind::kError: {
      ErrorInfo p;
      const auto& code = r.field("code", json::value_t::number_integer);
      p.code = code.get<int>();
      p.message = r.str("message");
      return p;
    }
  }
  throw ProtocolError("unknown kind", offset);
}

}  // namespace

std::string_view to_string(Kind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::string encode(const Envelope& envelope) {
  if (envelope.run_id.empty()) throw Error("envelope run_id must not be empty");
  ojson j;
  j["v"] = envelope.version;
  j["kind"] = std::string(to_string(envelope.kind()));
  j["run_id"] = envelope.run_id;
  j["payload"] = std::visit([](const auto& p) { return payload_json(p); }, envelope.payload);
  std::string line = j.dump(-1, ' ', false, ojson::error_handler_t::replace);
  line.push_back('\n');
  return line;
}

Envelope decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.find('\n') != std::string_view::npos) {
    throw ProtocolError("interior newline in envelope", line.find('\n'));
  }
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed envelope: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!j.is_object()) throw ProtocolError("envelope is not an object", 0);
  Reader r(j, 0);
  const auto& v = r.field("v", json::value_t::number_unsigned);
  if (v.get<std::uint64_t>() != static_cast<std::uint64_t>(kVersion)) {
    throw ProtocolError("unsupported version " + v.dump(), line.find("\"v\""));
  }
  Envelope env;
  env.version = kVersion;
  env.run_id = r.str("run_id");
  if (env.run_id.empty()) throw ProtocolError("empty run_id", line.find("\"run_id\""));
  const std::string kind_name = r.str("kind");
  std::optional<Kind> kind;
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == kind_name) kind = static_cast<Kind>(i);
  }
  if (!kind) throw ProtocolError("unknown kind '" + kind_name + "'", line.find("\"kind\""));
  const std::size_t payload_offset = line.find("\"payload\"");
  env.payload = decode_payload(*kind, r.obj("payload"), payload_offset == std::string_view::npos ? 0 : payload_offset);
  return env;
}

}  // namespace ens2::protocol

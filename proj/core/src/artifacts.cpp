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

#include "ens2/artifacts.hpp"

#include <limits>
#include <sstream>

#include "components.hpp"
#include "ens2/csv.hpp"
#include "ens2/error.hpp"
#include "ens2/io.hpp"
#include "json_codec.hpp"

namespace ens2 {

namespace fs = std::filesystem;
using nlohmann::json;

namespace detail {

json record_json(const PipelineRecord& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"primitive", s.primitive}, {"hyperparams", hyperparams_to_json(s.hyperparams)}});
  }
  return {{"id", r.id},
          {"searcher_id", r.searcher_id},
          {"steps", steps},
          {"validation_score", r.validation_score},
          {"artifact_ref", r.artifact_ref},
          {"has_oof", r.has_oof},
          {"discovered_at", r.discovered_at}};
}

PipelineRecord record_from(const json& j) {
  PipelineRecord r;
  r.id = j.at("id").get<std::string>();
  r.searcher_id = j.at("searcher_id").get<std::string>();
  for (const auto& s : j.at("steps")) {
    r.steps.push_back({s.at("primitive").get<std::string>(), hyperparams_from_json(s.at("hyperparams"))});
  }
  r.validation_score = j.at("validation_score").get<double>();
  r.artifact_ref = j.at("artifact_ref").get<std::string>();
  r.has_oof = j.at("has_oof").get<bool>();
  r.discovered_at = j.at("discovered_at").get<std::uint64_t>();
  r.validate();
  return r;
}

}  // namespace detail

std::string record_to_json(const PipelineRecord& record) {
  return detail::record_json(record).dump();
}

PipelineRecord record_from_json(std::string_view text) {
  try {
    return detail::record_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad pipeline record: ") + e.what());
  }
}

std::string probabilities_to_csv(const PredictionMatrix& probs, const std::vector<std::string>& label_vocab) {
  if (probs.cols() != label_vocab.size()) throw Error("probability columns do not match vocabulary");
  std::ostringstream out;
  out << "row_index";
  for (const auto& c : label_vocab) out << ',' << csv_escape("p_" + c);
  out << '\n';
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    out << r;
    for (double p : probs.row(r)) out << ',' << format_double(p);
    out << '\n';
  }
  return out.str();
}

PredictionMatrix probabilities_from_csv(std::string_view text, std::vector<std::string>* label_vocab,
                                        std::optional<std::size_t> expected_rows) {
  auto records = parse_csv_records(text);
  if (records.empty() || records[0].empty() || records[0][0] != "row_index") {
    throw ParseError("probability file: missing row_index header");
  }
  const std::size_t classes = records[0].size() - 1;
  if (label_vocab) {
    label_vocab->clear();
    for (std::size_t c = 1; c < records[0].size(); ++c) {
      const auto& h = records[0][c];
      if (h.rfind("p_", 0) != 0) throw ParseError("probability file: bad column '" + h + "'");
      label_vocab->push_back(h.substr(2));
    }
  }
  const std::size_t n = expected_rows ? *expected_rows : records.size() - 1;
  if (records.size() - 1 > n) throw ParseError("probability file: more rows than expected");
  PredictionMatrix out(n, classes, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(n, false);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != classes + 1) throw ParseError("probability file: ragged row " + std::to_string(i));
    std::size_t row = 0;
    try {
      row = std::stoull(rec[0]);
      if (row >= n || seen[row]) throw ParseError("");
      seen[row] = true;
      for (std::size_t c = 0; c < classes; ++c) out(row, c) = std::stod(rec[c + 1]);
    } catch (const std::exception&) {
      throw ParseError("probability file: bad row " + std::to_string(i));
    }
  }
  return out;
}

ArtifactStore::ArtifactStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_ / "oof");
  fs::create_directories(dir_ / "models");
}

std::string ArtifactStore::model_ref(const std::string& pipeline_id) {
  return "models/" + pipeline_id + ".bin";
}

void ArtifactStore::append_record(const PipelineRecord& record) const {
  record.validate();
  append_line(dir_ / "pipelines.ndjson", record_to_json(record));
}

void ArtifactStore::write_oof(const std::string& pipeline_id, const PredictionMatrix& oof,
                              const std::vector<std::string>& label_vocab) const {
  write_file_atomic(dir_ / "oof" / (pipeline_id + ".csv"), probabilities_to_csv(oof, label_vocab));
}

std::string ArtifactStore::write_model(const std::string& pipeline_id, const FittedPipeline& model) const {
  const std::string ref = model_ref(pipeline_id);
  write_file_atomic(dir_ / ref, model.serialize());
  return ref;
}

std::vector<PipelineRecord> ArtifactStore::load_records() const {
  std::vector<PipelineRecord> out;
  const fs::path path = dir_ / "pipelines.ndjson";
  if (!fs::exists(path)) return out;
  const std::string text = read_file(path);
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) break;  // trailing partial line
    const std::string_view line(text.data() + start, nl - start);
    start = nl + 1;
    if (line.empty()) continue;
    PipelineRecord r;
    try {
      r = record_from_json(line);
    } catch (const Error&) {
      continue;
    }
    if (fs::exists(dir_ / model_ref(r.id))) r.artifact_ref = model_ref(r.id);
    if (r.has_oof && !fs::exists(dir_ / "oof" / (r.id + ".csv"))) r.has_oof = false;
    out.push_back(std::move(r));
  }
  return out;
}

PredictionMatrix ArtifactStore::load_oof(const std::string& pipeline_id) const {
  return probabilities_from_csv(read_file(dir_ / "oof" / (pipeline_id + ".csv")), nullptr);
}

FittedPipeline ArtifactStore::load_model(const std::string& pipeline_id) const {
  const fs::path path = dir_ / model_ref(pipeline_id);
  if (!fs::exists(path)) throw TaskError("model artifact not found: " + path.string());
  return FittedPipeline::deserialize(read_file(path));
}

}  // namespace ens2

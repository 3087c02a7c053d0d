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

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ens2/matrix.hpp"
#include "ens2/pipeline.hpp"
#include "ens2/tabular.hpp"

namespace ens2 {

// One worker's artifact directory:
//
//   pipelines.ndjson      one PipelineRecord per line, appended as discovered
//   oof/<id>.csv          row_index,p_<class>... out-of-fold probabilities
//   models/<id>.bin       serialized FittedPipeline
//
// OOF and model files are published by temp+rename. A record line is only
// appended after its OOF file is in place, so every complete line can be
// trusted after a crash.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  void append_record(const PipelineRecord& record) const;
  void write_oof(const std::string& pipeline_id, const PredictionMatrix& oof,
                 const std::vector<std::string>& label_vocab) const;
  // Returns the artifact_ref, relative to dir().
  std::string write_model(const std::string& pipeline_id, const FittedPipeline& model) const;

  // Complete records in discovery order. artifact_ref is filled when the model
  // file exists; has_oof is cleared when the OOF file is absent.
  std::vector<PipelineRecord> load_records() const;

  PredictionMatrix load_oof(const std::string& pipeline_id) const;
  FittedPipeline load_model(const std::string& pipeline_id) const;

  static std::string model_ref(const std::string& pipeline_id);

 private:
  std::filesystem::path dir_;
};

std::string record_to_json(const PipelineRecord& record);
PipelineRecord record_from_json(std::string_view text);

// row_index,p_<class>... CSV used for OOF files.
std::string probabilities_to_csv(const PredictionMatrix& probs, const std::vector<std::string>& label_vocab);
// Reads the CSV back. Each row index may appear at most once. With
// expected_rows set, rows absent from the file are left as NaN; otherwise the
// file must index 0..n-1 exactly.
PredictionMatrix probabilities_from_csv(std::string_view text, std::vector<std::string>* label_vocab,
                                        std::optional<std::size_t> expected_rows = std::nullopt);

}  // namespace ens2

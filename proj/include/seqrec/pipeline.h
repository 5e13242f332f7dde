// Copyright 2026 The seqrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch pipeline behind the command-line tool: ingest, pretrain, fit the
// inference function, apply and evaluate, plus baselines, sweeps, new items
// and embedding export. Every stage reads and writes fixed file names inside
// one output directory and records its lineage in manifest.json.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqrec/dataset.h"
#include "seqrec/embedding_inference.h"
#include "seqrec/eval.h"
#include "seqrec/new_items.h"
#include "seqrec/pretrain.h"
#include "seqrec/synthetic.h"

namespace seqrec {

struct PipelineConfig {
  // Top-level seed; pretraining and the inference function derive theirs.
  uint64_t seed = 0;

  std::string data_path;
  InputFormat data_format = InputFormat::kCsv;
  size_t min_actions = 5;

  SyntheticConfig synthetic;

  // num_items is filled from the dataset.
  ModelConfig model;
  PretrainConfig pretrain;
  double tau = 0.5;
  FewShotConfig cities;
  // Share of head items kept out of inference-function training and used to
  // measure how well their rows are reproduced.
  double holdout_fraction = 0.0;
  EvalConfig eval;
  double new_item_fraction = 0.1;

  // Throws ConfigError (or ParameterError) on bad values.
  void Validate() const;
  // Pretraining and inference-function configs with derived seeds.
  PretrainConfig PretrainSettings(size_t num_items) const;
  FewShotConfig CitiesSettings() const;
  EvalConfig TestEval() const;
};

nlohmann::json PipelineConfigToJson(const PipelineConfig& config);
// Missing keys keep their defaults; unknown keys are a ConfigError.
PipelineConfig PipelineConfigFromJson(const nlohmann::json& j);
PipelineConfig LoadPipelineConfig(const std::string& path);
std::string ConfigHash(const PipelineConfig& config);

// Artifact names inside the output directory.
namespace artifacts {
inline constexpr char kDataset[] = "dataset.json";
inline constexpr char kStats[] = "dataset_stats.json";
inline constexpr char kModel[] = "model.ckpt.json";
inline constexpr char kTrainState[] = "train_state.ckpt.json";
inline constexpr char kPretrainLog[] = "pretrain_metrics.jsonl";
inline constexpr char kPhi[] = "phi.ckpt.json";
inline constexpr char kCitiesLog[] = "cities_metrics.jsonl";
inline constexpr char kCitiesSummary[] = "cities_summary.json";
inline constexpr char kApplied[] = "model_applied.ckpt.json";
inline constexpr char kReportBefore[] = "report_before.json";
inline constexpr char kReportAfter[] = "report_after.json";
inline constexpr char kReportDelta[] = "report_delta.json";
inline constexpr char kNewItemReport[] = "new_item_report.json";
inline constexpr char kNewItemModel[] = "model_new_items.ckpt.json";
inline constexpr char kNewItemEmbeddings[] = "new_item_embeddings.csv";
inline constexpr char kManifest[] = "manifest.json";
inline constexpr char kLock[] = ".lock";
}  // namespace artifacts

// Exclusive per-directory lock, released on destruction. Throws IoError when
// another command holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

// Writes via a temporary file and rename.
void WriteTextFile(const std::filesystem::path& path, const std::string& text);
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json ReadJsonFile(const std::filesystem::path& path);

// Seconds since the epoch from SOURCE_DATE_EPOCH, else the clock.
int64_t PipelineTimestamp();

// Merges `entry` into the directory manifest (creating it if needed).
void UpdateManifest(const std::filesystem::path& dir,
                    const PipelineConfig& config, const std::string& command,
                    const nlohmann::json& entry);

struct IngestOutcome {
  DatasetStats stats;
  std::string dataset_hash;
  size_t malformed = 0;
};
IngestOutcome RunIngest(const PipelineConfig& config,
                        const std::filesystem::path& out, std::ostream& log);

// Writes the synthetic corpus described by config.synthetic as CSV.
void RunSynth(const PipelineConfig& config, const std::string& csv_path);

struct LoadedData {
  Dataset dataset;
  LeaveOneOutSplit split;
  std::string catalog_hash;
  std::string dataset_hash;
};
LoadedData LoadIngested(const std::filesystem::path& out);

struct PretrainOutcome {
  SequenceModel model;
  std::vector<EpochLog> log;
  size_t best_epoch = 0;
  std::string model_hash;
};
// With resume, continues from the saved training state in `out`.
PretrainOutcome RunPretrain(const PipelineConfig& config,
                            const std::filesystem::path& out, bool resume,
                            std::ostream& log);

struct CitiesOutcome {
  InferenceTrainResult result;
  std::vector<int32_t> held_out;
  // Mean cosine between inferred and lookup rows of held-out head items.
  double held_out_cosine = 0.0;
  std::string phi_hash;
};
CitiesOutcome RunTrainCities(const PipelineConfig& config,
                             const std::filesystem::path& out,
                             std::ostream& log);

struct ApplyOutcome {
  MetricsReport before;
  MetricsReport after;
  PopularityPartition partition;
  size_t inferred_items = 0;
  double nearest_head_before = 0.0;
  double nearest_head_after = 0.0;
  std::string applied_hash;
};
// Refuses (LineageError) when phi was fit on another model.
ApplyOutcome RunApplyEval(const PipelineConfig& config,
                          const std::filesystem::path& out, std::ostream& log);

struct BaselineOutcome {
  MetricsReport report;
  std::string name;
};
// name: pop, spop, fomc, or model (the pretrained checkpoint). `rerank`
// wraps it in popularity re-ranking of the top 50.
BaselineOutcome RunBaseline(const PipelineConfig& config,
                            const std::filesystem::path& out,
                            const std::string& name, bool rerank,
                            std::ostream& log);

enum class SweepParameter { kTau, kKappa };
SweepParameter ParseSweepParameter(const std::string& name);

struct SweepPoint {
  double value = 0.0;
  double hr10_all = 0.0;
};
// One fit-apply-evaluate run per value, in ascending order; writes
// sweep_<param>.csv with columns value,hr10_all.
std::vector<SweepPoint> RunSweep(const PipelineConfig& config,
                                 const std::filesystem::path& out,
                                 SweepParameter parameter,
                                 std::vector<double> values,
                                 std::ostream& log);

struct NewItemOutcome {
  NoveltyReport report;
  size_t new_items = 0;
  size_t inferred = 0;
};
// Holds out new items, pretrains and fits on the rest, adds the new items
// from their contexts and evaluates users whose test item is new.
NewItemOutcome RunNewItemProtocol(const PipelineConfig& config,
                                  const std::filesystem::path& out,
                                  std::ostream& log);

// Adds the items of a context file to the applied model (or the pretrained
// one when nothing was applied) and writes a new checkpoint; inputs are not
// modified. File: {"items": [{"id": ..., "windows": [{"left": [ids],
// "right": [ids]}]}]}. Returns the number of rows added.
size_t RunNewItemsFromFile(const PipelineConfig& config,
                           const std::filesystem::path& out,
                           const std::string& context_file, std::ostream& log);

// CSV of item index, id, provenance and the row values.
void RunExportEmbeddings(const std::filesystem::path& out, bool applied,
                         const std::string& csv_path);

}  // namespace seqrec

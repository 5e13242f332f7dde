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

#include "seqrec/pipeline.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "seqrec/errors.h"
#include "seqrec/hash.h"

namespace seqrec {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum SeedStream : uint64_t {
  kPretrainSeed = 1,
  kCitiesSeed = 2,
  kHoldoutSeed = 3,
  kNewItemSeed = 4,
};

void CheckObject(const json& j, const std::string& section) {
  if (!j.is_object()) throw ConfigError("'" + section + "' must be an object");
}

[[noreturn]] void Unknown(const std::string& section, const std::string& key) {
  throw ConfigError("unknown key '" + key + "' in " + section);
}

void ParseData(const json& j, PipelineConfig* c) {
  CheckObject(j, "data");
  for (const auto& [key, v] : j.items()) {
    if (key == "path") c->data_path = v.get<std::string>();
    else if (key == "format") c->data_format = ParseInputFormat(v.get<std::string>());
    else if (key == "min_actions") c->min_actions = v.get<size_t>();
    else Unknown("data", key);
  }
}

void ParseSynthetic(const json& j, SyntheticConfig* s) {
  CheckObject(j, "synthetic");
  for (const auto& [key, v] : j.items()) {
    if (key == "users") s->users = v.get<size_t>();
    else if (key == "items") s->items = v.get<size_t>();
    else if (key == "zipf_exponent") s->zipf_exponent = v.get<double>();
    else if (key == "clusters") s->clusters = v.get<size_t>();
    else if (key == "stay") s->stay = v.get<double>();
    else if (key == "min_length") s->min_length = v.get<size_t>();
    else if (key == "max_length") s->max_length = v.get<size_t>();
    else if (key == "seed") s->seed = v.get<uint64_t>();
    else Unknown("synthetic", key);
  }
}

void ParseModel(const json& j, ModelConfig* m) {
  CheckObject(j, "model");
  for (const auto& [key, v] : j.items()) {
    if (key == "variant") m->kind = ParseEncoderKind(v.get<std::string>());
    else if (key == "dim") m->dim = v.get<size_t>();
    else if (key == "max_len") m->max_len = v.get<size_t>();
    else if (key == "blocks") m->blocks = v.get<size_t>();
    else if (key == "heads") m->heads = v.get<size_t>();
    else if (key == "dropout") m->dropout = v.get<double>();
    else if (key == "init_std") m->init_std = v.get<double>();
    else if (key == "embedding_norm") m->embedding_norm = v.get<bool>();
    else Unknown("model", key);
  }
}

void ParsePretrain(const json& j, PretrainConfig* p) {
  CheckObject(j, "pretrain");
  for (const auto& [key, v] : j.items()) {
    if (key == "mask_probability") p->mask_probability = v.get<double>();
    else if (key == "lr") p->adam.peak_lr = v.get<double>();
    else if (key == "warmup_steps") p->adam.warmup_steps = v.get<int64_t>();
    else if (key == "l2") p->adam.l2 = v.get<double>();
    else if (key == "epochs") p->epochs = v.get<size_t>();
    else if (key == "batch_size") p->batch_size = v.get<size_t>();
    else if (key == "window_stride") p->window_stride = v.get<size_t>();
    else if (key == "validate") p->validate = v.get<bool>();
    else Unknown("pretrain", key);
  }
}

void ParseEval(const json& j, EvalConfig* e) {
  CheckObject(j, "eval");
  for (const auto& [key, v] : j.items()) {
    if (key == "n_negatives") e->n_negatives = v.get<size_t>();
    else if (key == "seed") e->seed = v.get<uint64_t>();
    else if (key == "negative_source") e->negative_source = ParseNegativePopularity(v.get<std::string>());
    else Unknown("eval", key);
  }
}

json GroupLogJson(const EpochLog& e) {
  return {{"epoch", e.epoch + 1},
          {"train_loss", e.train_loss},
          {"val_hr5", e.validation.hr5},
          {"val_hr10", e.validation.hr10},
          {"val_mrr", e.validation.mrr}};
}

std::string Jsonl(const std::vector<json>& lines) {
  std::string out;
  for (const json& l : lines) out += l.dump() + "\n";
  return out;
}

json Report(const MetricsReport& r, const PipelineConfig& config) {
  json j = ReportToJson(r);
  j["config_echo"] = PipelineConfigToJson(config);
  return j;
}

struct LoadedModel {
  SequenceModel model;
  Checkpoint checkpoint;
  std::string hash;
};

LoadedModel LoadModel(const fs::path& path, const std::string& catalog_hash) {
  if (!fs::exists(path)) {
    throw IoError("missing checkpoint '" + path.string() +
                  "'; run the earlier stage first");
  }
  LoadedModel m;
  m.checkpoint = LoadCheckpoint(path.string());
  if (m.checkpoint.kind != "model") {
    throw FormatError("'" + path.string() + "' is not a model checkpoint");
  }
  m.model = ModelFromCheckpoint(m.checkpoint, catalog_hash);
  m.hash = m.checkpoint.ContentHash();
  return m;
}

struct LoadedPhi {
  InferenceFunction phi;
  std::string hash;
  std::string source_model;
};

LoadedPhi LoadPhi(const fs::path& path, const std::string& model_hash) {
  if (!fs::exists(path)) {
    throw IoError("missing inference function '" + path.string() +
                  "'; run train-cities first");
  }
  const Checkpoint c = LoadCheckpoint(path.string());
  LoadedPhi p;
  p.source_model = c.config.value("source_model", "");
  if (p.source_model != model_hash) {
    throw LineageError("inference function was fit on model " +
                       p.source_model + ", not on " + model_hash);
  }
  p.phi = InferenceFunctionFromCheckpoint(c);
  p.hash = c.ContentHash();
  return p;
}

// Head items withheld from fitting, chosen with a fixed seed.
std::vector<int32_t> HeldOutHead(const PipelineConfig& config,
                                 const PopularityPartition& partition) {
  if (config.holdout_fraction <= 0.0) return {};
  const size_t n = static_cast<size_t>(std::llround(
      config.holdout_fraction * static_cast<double>(partition.head.size())));
  Rng rng(DeriveSeed(config.seed, kHoldoutSeed, 0));
  std::vector<int32_t> out;
  for (size_t k : rng.SampleWithoutReplacement(partition.head.size(), n)) {
    out.push_back(partition.head[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Fit {
  InferenceTrainResult result;
  std::vector<int32_t> held_out;
  double held_out_cosine = 0.0;
};

Fit FitPhi(const PipelineConfig& config, const SequenceModel& model,
           const PopularityPartition& partition,
           const std::map<int32_t, ContextSet>& contexts,
           std::vector<json>* curve, std::ostream& log) {
  const FewShotConfig fc = config.CitiesSettings();
  Fit fit;
  fit.held_out = HeldOutHead(config, partition);
  const std::set<int32_t> held(fit.held_out.begin(), fit.held_out.end());
  std::vector<int32_t> targets;
  for (int32_t i : TrainingTargets(partition, fc.target_set)) {
    if (!held.count(i)) targets.push_back(i);
  }
  fit.result = TrainInferenceFunction(
      model, InferenceFunction::Create(model, fc), contexts, targets, fc,
      [&](const InferenceEpochLog& e) {
        log << "cities epoch " << e.epoch + 1 << " loss " << e.train_loss
            << " distance " << e.distance << "\n";
        if (curve) {
          curve->push_back({{"epoch", e.epoch + 1},
                            {"train_loss", e.train_loss},
                            {"distance", e.distance}});
        }
      });
  if (!fit.result.skipped.empty()) {
    log << "cities: " << fit.result.skipped.size()
        << " targets skipped for lack of context\n";
  }
  if (!fit.held_out.empty()) {
    fit.held_out_cosine =
        MeanReproductionCosine(model, fit.result.phi, contexts, fit.held_out,
                               fc.context_cap, fc.seed);
  }
  return fit;
}

std::map<int32_t, ContextSet> TrainContexts(const LeaveOneOutSplit& split,
                                            size_t num_items,
                                            const ModelConfig& model) {
  return ItemContexts(TrainSequences(split), num_items, model);
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string EmbeddingCsv(const SequenceModel& model, const Catalog& catalog,
                         const std::set<int32_t>& inferred, int32_t first_row) {
  std::ostringstream out;
  const size_t d = model.table().dim();
  out << "index,item,provenance";
  for (size_t k = 0; k < d; ++k) out << ",e" << k;
  out << "\n";
  const auto& items = model.table().items.value;
  for (size_t i = static_cast<size_t>(first_row); i < items.rows(); ++i) {
    const int32_t idx = static_cast<int32_t>(i);
    out << i << ',' << catalog.ItemOf(idx) << ','
        << (inferred.count(idx) ? "inferred" : "original");
    for (double v : items.row(i)) out << ',' << FormatDouble(v);
    out << "\n";
  }
  return out.str();
}

}  // namespace

void PipelineConfig::Validate() const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("tau must lie in (0, 1), got " + std::to_string(tau));
  }
  if (model.max_len < 2) {
    throw ConfigError("max_len must be at least 2, got " +
                      std::to_string(model.max_len));
  }
  ModelConfig m = model;
  m.num_items = 1;
  m.Validate();
  PretrainConfig p = pretrain;
  p.model = m;
  p.Validate();
  cities.Validate();
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw ParameterError("holdout_fraction must lie in [0, 1)");
  }
  if (!(new_item_fraction > 0.0 && new_item_fraction < 1.0)) {
    throw ParameterError("new_items.fraction must lie in (0, 1)");
  }
  if (eval.n_negatives == 0) throw ConfigError("eval.n_negatives must be positive");
  if (min_actions < 3) throw ConfigError("data.min_actions must be at least 3");
}

PretrainConfig PipelineConfig::PretrainSettings(size_t num_items) const {
  PretrainConfig p = pretrain;
  p.model = model;
  p.model.num_items = num_items;
  p.seed = DeriveSeed(seed, kPretrainSeed, 0);
  p.validation = eval;
  p.validation.validation = true;
  return p;
}

FewShotConfig PipelineConfig::CitiesSettings() const {
  FewShotConfig f = cities;
  f.seed = DeriveSeed(seed, kCitiesSeed, 0);
  return f;
}

EvalConfig PipelineConfig::TestEval() const {
  EvalConfig e = eval;
  e.validation = false;
  return e;
}

json PipelineConfigToJson(const PipelineConfig& c) {
  json model = ModelConfigToJson(c.model);
  model.erase("num_items");
  json cities = FewShotConfigToJson(c.cities);
  cities.erase("seed");
  cities["holdout_fraction"] = c.holdout_fraction;
  const auto& s = c.synthetic;
  return {
      {"seed", c.seed},
      {"data",
       {{"path", c.data_path},
        {"format", c.data_format == InputFormat::kCsv ? "csv" : "jsonl"},
        {"min_actions", c.min_actions}}},
      {"synthetic",
       {{"users", s.users},
        {"items", s.items},
        {"zipf_exponent", s.zipf_exponent},
        {"clusters", s.clusters},
        {"stay", s.stay},
        {"min_length", s.min_length},
        {"max_length", s.max_length},
        {"seed", s.seed}}},
      {"model", model},
      {"pretrain",
       {{"mask_probability", c.pretrain.mask_probability},
        {"lr", c.pretrain.adam.peak_lr},
        {"warmup_steps", c.pretrain.adam.warmup_steps},
        {"l2", c.pretrain.adam.l2},
        {"epochs", c.pretrain.epochs},
        {"batch_size", c.pretrain.batch_size},
        {"window_stride", c.pretrain.window_stride},
        {"validate", c.pretrain.validate}}},
      {"tau", c.tau},
      {"cities", cities},
      {"eval",
       {{"n_negatives", c.eval.n_negatives},
        {"seed", c.eval.seed},
        {"negative_source", NegativePopularityName(c.eval.negative_source)}}},
      {"new_items", {{"fraction", c.new_item_fraction}}}};
}

PipelineConfig PipelineConfigFromJson(const json& j) {
  CheckObject(j, "config");
  PipelineConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") {
        c.seed = v.get<uint64_t>();
      } else if (key == "data") {
        ParseData(v, &c);
      } else if (key == "synthetic") {
        ParseSynthetic(v, &c.synthetic);
      } else if (key == "model") {
        ParseModel(v, &c.model);
      } else if (key == "pretrain") {
        ParsePretrain(v, &c.pretrain);
      } else if (key == "tau") {
        c.tau = v.get<double>();
      } else if (key == "cities") {
        CheckObject(v, "cities");
        json few = v;
        if (few.contains("seed")) {
          throw ConfigError("cities.seed is derived; set the top-level seed");
        }
        if (few.contains("holdout_fraction")) {
          c.holdout_fraction = few.at("holdout_fraction").get<double>();
          few.erase("holdout_fraction");
        }
        c.cities = FewShotConfigFromJson(few);
      } else if (key == "eval") {
        ParseEval(v, &c.eval);
      } else if (key == "new_items") {
        CheckObject(v, "new_items");
        for (const auto& [k, x] : v.items()) {
          if (k == "fraction") c.new_item_fraction = x.get<double>();
          else Unknown("new_items", k);
        }
      } else {
        Unknown("config", key);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.Validate();
  return c;
}

PipelineConfig LoadPipelineConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not JSON");
  return PipelineConfigFromJson(j);
}

std::string ConfigHash(const PipelineConfig& config) {
  return Fnv1a().String(PipelineConfigToJson(config).dump()).hex();
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const std::string path = (dir / artifacts::kLock).string();
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw IoError("cannot open lock file '" + path + "'");
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw IoError("output directory '" + dir.string() +
                  "' is in use by another command");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void WriteJsonFile(const fs::path& path, const json& j) {
  WriteTextFile(path, j.dump(2) + "\n");
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError("'" + path.string() + "' is not JSON");
  return j;
}

int64_t PipelineTimestamp() {
  if (const char* s = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(s, &end, 10);
    if (end != s && *end == '\0') return v;
  }
  return static_cast<int64_t>(std::time(nullptr));
}

void UpdateManifest(const fs::path& dir, const PipelineConfig& config,
                    const std::string& command, const json& entry) {
  const fs::path path = dir / artifacts::kManifest;
  json m = fs::exists(path) ? ReadJsonFile(path) : json::object();
  m["seed"] = config.seed;
  m["config_hash"] = ConfigHash(config);
  json e = entry;
  e["config_hash"] = ConfigHash(config);
  e["timestamp"] = PipelineTimestamp();
  m["stages"][command] = e;
  WriteJsonFile(path, m);
}

void RunSynth(const PipelineConfig& config, const std::string& csv_path) {
  WriteCsv(GenerateSynthetic(config.synthetic), csv_path);
}

IngestOutcome RunIngest(const PipelineConfig& config, const fs::path& out,
                        std::ostream& log) {
  if (config.data_path.empty()) throw ConfigError("data.path is not set");
  fs::create_directories(out);
  const IngestResult rows = Ingest(config.data_path, config.data_format);
  Dataset dataset = BuildSequences(rows.rows, config.min_actions);
  SplitLeaveOneOut(&dataset);
  SaveDataset(dataset, (out / artifacts::kDataset).string());

  IngestOutcome r;
  r.stats = ComputeStats(dataset);
  r.dataset_hash = Fnv1a::ToHex(dataset.Hash());
  r.malformed = rows.malformed;
  WriteJsonFile(out / artifacts::kStats,
                {{"users", r.stats.users},
                 {"items", r.stats.items},
                 {"interactions", r.stats.interactions},
                 {"avg_actions_per_user", r.stats.avg_actions_per_user},
                 {"malformed_rows", r.malformed}});
  log << "users " << r.stats.users << "  items " << r.stats.items
      << "  actions " << r.stats.interactions << "  avg actions/user "
      << r.stats.avg_actions_per_user << "\n";
  UpdateManifest(out, config, "ingest",
                 {{"source", config.data_path}, {"dataset", r.dataset_hash}});
  return r;
}

LoadedData LoadIngested(const fs::path& out) {
  const fs::path path = out / artifacts::kDataset;
  if (!fs::exists(path)) {
    throw IoError("missing dataset store '" + path.string() + "'; run ingest");
  }
  LoadedData d;
  d.dataset = LoadDataset(path.string());
  d.split = SplitLeaveOneOut(&d.dataset);
  d.catalog_hash = Fnv1a::ToHex(d.dataset.catalog.Hash());
  d.dataset_hash = Fnv1a::ToHex(d.dataset.Hash());
  return d;
}

PretrainOutcome RunPretrain(const PipelineConfig& config, const fs::path& out,
                            bool resume, std::ostream& log) {
  const LoadedData data = LoadIngested(out);
  const PretrainConfig pc = config.PretrainSettings(data.dataset.catalog.size());
  std::optional<TrainState> state;
  if (resume) {
    const fs::path sp = out / artifacts::kTrainState;
    if (!fs::exists(sp)) throw IoError("no training state at '" + sp.string() + "'");
    const Checkpoint c = LoadCheckpoint(sp.string());
    if (c.catalog_hash != data.catalog_hash) {
      throw LineageError("training state belongs to another catalog");
    }
    state = TrainStateFromCheckpoint(c);
  }
  PretrainResult result = Pretrain(
      data.dataset, data.split, pc, std::move(state), [&](const EpochLog& e) {
        log << "epoch " << e.epoch + 1 << " loss " << e.train_loss << " val hr10 "
            << e.validation.hr10 << " mrr " << e.validation.mrr << "\n";
      });

  PretrainOutcome r;
  r.log = result.state.log;
  r.best_epoch = result.state.best_epoch;
  Checkpoint c = ModelToCheckpoint(result.model, data.catalog_hash);
  c.meta = {{"dataset", data.dataset_hash},
            {"config_hash", ConfigHash(config)},
            {"best_epoch", r.best_epoch}};
  SaveCheckpoint(c, (out / artifacts::kModel).string());
  SaveCheckpoint(TrainStateToCheckpoint(result.state, data.catalog_hash),
                 (out / artifacts::kTrainState).string());
  std::vector<json> lines;
  for (const EpochLog& e : r.log) lines.push_back(GroupLogJson(e));
  WriteTextFile(out / artifacts::kPretrainLog, Jsonl(lines));
  r.model_hash = c.ContentHash();
  r.model = std::move(result.model);
  UpdateManifest(out, config, "pretrain",
                 {{"dataset", data.dataset_hash},
                  {"model", r.model_hash},
                  {"epochs", r.log.size()},
                  {"best_epoch", r.best_epoch}});
  return r;
}

CitiesOutcome RunTrainCities(const PipelineConfig& config, const fs::path& out,
                             std::ostream& log) {
  const LoadedData data = LoadIngested(out);
  const LoadedModel base = LoadModel(out / artifacts::kModel, data.catalog_hash);
  const PopularityPartition partition =
      PartitionHeadTail(data.dataset.train_popularity, config.tau);
  const auto contexts = TrainContexts(data.split, data.dataset.catalog.size(),
                                      base.model.config());
  std::vector<json> curve;
  Fit fit = FitPhi(config, base.model, partition, contexts, &curve, log);

  const FewShotConfig fc = config.CitiesSettings();
  Checkpoint c = InferenceFunctionToCheckpoint(fit.result.phi, fc,
                                               data.catalog_hash, base.hash);
  c.meta = {{"dataset", data.dataset_hash}, {"config_hash", ConfigHash(config)}};
  SaveCheckpoint(c, (out / artifacts::kPhi).string());
  WriteTextFile(out / artifacts::kCitiesLog, Jsonl(curve));
  WriteJsonFile(out / artifacts::kCitiesSummary,
                {{"targets", fit.result.targets.size()},
                 {"skipped", fit.result.skipped},
                 {"held_out", fit.held_out},
                 {"held_out_cosine", fit.held_out_cosine},
                 {"final_distance", fit.result.log.empty()
                                        ? 0.0
                                        : fit.result.log.back().distance}});

  CitiesOutcome r;
  r.phi_hash = c.ContentHash();
  r.held_out = fit.held_out;
  r.held_out_cosine = fit.held_out_cosine;
  r.result = std::move(fit.result);
  UpdateManifest(out, config, "train-cities",
                 {{"model", base.hash}, {"phi", r.phi_hash}});
  return r;
}

ApplyOutcome RunApplyEval(const PipelineConfig& config, const fs::path& out,
                          std::ostream& log) {
  const LoadedData data = LoadIngested(out);
  const LoadedModel base = LoadModel(out / artifacts::kModel, data.catalog_hash);
  const LoadedPhi phi = LoadPhi(out / artifacts::kPhi, base.hash);
  const FewShotConfig fc = config.CitiesSettings();
  const EvalConfig ec = config.TestEval();

  ApplyOutcome r;
  r.partition = PartitionHeadTail(data.dataset.train_popularity, config.tau);
  const auto contexts = TrainContexts(data.split, data.dataset.catalog.size(),
                                      base.model.config());
  r.before = Evaluate(ModelScorer(base.model), data.dataset, data.split,
                      r.partition, ec);
  const auto inferred =
      InferEmbeddings(base.model, phi.phi, contexts, r.partition, fc);
  const SequenceModel applied = ApplyEmbeddings(base.model, inferred);
  r.after = Evaluate(ModelScorer(applied), data.dataset, data.split,
                     r.partition, ec);
  r.nearest_head_before =
      MeanNearestHeadDistance(base.model.table().items.value, r.partition);
  r.nearest_head_after =
      MeanNearestHeadDistance(applied.table().items.value, r.partition);

  std::vector<int32_t> inferred_items;
  for (const auto& e : inferred) {
    if (e.provenance == Provenance::kInferred) inferred_items.push_back(e.item);
  }
  r.inferred_items = inferred_items.size();
  Checkpoint c = ModelToCheckpoint(applied, data.catalog_hash);
  c.meta = {{"source_model", base.hash},
            {"phi", phi.hash},
            {"inferred_items", inferred_items}};
  SaveCheckpoint(c, (out / artifacts::kApplied).string());
  r.applied_hash = c.ContentHash();

  WriteJsonFile(out / artifacts::kReportBefore, Report(r.before, config));
  WriteJsonFile(out / artifacts::kReportAfter, Report(r.after, config));
  json delta = ReportDelta(r.before, r.after);
  delta["tail_nearest_head_distance"] = {{"before", r.nearest_head_before},
                                         {"after", r.nearest_head_after}};
  delta["inferred_items"] = r.inferred_items;
  WriteJsonFile(out / artifacts::kReportDelta, delta);
  log << "tail hr10 " << r.before.tail.hr10 << " -> " << r.after.tail.hr10
      << "  head hr10 " << r.before.head.hr10 << " -> " << r.after.head.hr10
      << "\n";
  UpdateManifest(out, config, "apply-eval",
                 {{"model", base.hash}, {"phi", phi.hash},
                  {"applied", r.applied_hash}});
  return r;
}

BaselineOutcome RunBaseline(const PipelineConfig& config, const fs::path& out,
                            const std::string& name, bool rerank,
                            std::ostream& log) {
  const LoadedData data = LoadIngested(out);
  const std::vector<int64_t>& pop = data.dataset.train_popularity;
  const TransitionCounts transitions =
      TransitionCounts::FromSequences(TrainSequences(data.split));
  std::optional<LoadedModel> model;
  ScoreFn scorer;
  if (name == "model") {
    model = LoadModel(out / artifacts::kModel, data.catalog_hash);
    scorer = ModelScorer(model->model);
  } else {
    scorer = BaselineScorer(ParseBaseline(name), pop, &transitions);
  }
  if (rerank) scorer = RerankedScorer(scorer, pop, 50);
  const PopularityPartition partition = PartitionHeadTail(pop, config.tau);
  BaselineOutcome r;
  r.name = name + (rerank ? "_rerank" : "");
  r.report = Evaluate(scorer, data.dataset, data.split, partition,
                      config.TestEval());
  WriteJsonFile(out / ("baseline_" + r.name + ".json"), Report(r.report, config));
  log << r.name << " hr10 all " << r.report.all.hr10 << "\n";
  UpdateManifest(out, config, "baseline_" + r.name,
                 {{"dataset", data.dataset_hash}});
  return r;
}

SweepParameter ParseSweepParameter(const std::string& name) {
  if (name == "tau") return SweepParameter::kTau;
  if (name == "kappa") return SweepParameter::kKappa;
  throw ConfigError("unknown sweep parameter '" + name +
                    "' (expected tau or kappa)");
}

std::vector<SweepPoint> RunSweep(const PipelineConfig& config,
                                 const fs::path& out, SweepParameter parameter,
                                 std::vector<double> values,
                                 std::ostream& log) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<PipelineConfig> runs;
  for (double v : values) {
    PipelineConfig c = config;
    if (parameter == SweepParameter::kTau) {
      c.tau = v;
    } else {
      if (v < 1.0 || v != std::floor(v)) {
        throw ParameterError("kappa values must be positive integers");
      }
      c.cities.kappa_max = static_cast<size_t>(v);
    }
    c.Validate();
    runs.push_back(c);
  }

  const LoadedData data = LoadIngested(out);
  const LoadedModel base = LoadModel(out / artifacts::kModel, data.catalog_hash);
  const auto contexts = TrainContexts(data.split, data.dataset.catalog.size(),
                                      base.model.config());
  std::vector<SweepPoint> points;
  for (size_t k = 0; k < runs.size(); ++k) {
    const PipelineConfig& c = runs[k];
    const PopularityPartition partition =
        PartitionHeadTail(data.dataset.train_popularity, c.tau);
    const Fit fit = FitPhi(c, base.model, partition, contexts, nullptr, log);
    const SequenceModel applied = ApplyEmbeddings(
        base.model, InferEmbeddings(base.model, fit.result.phi, contexts,
                                    partition, c.CitiesSettings()));
    const MetricsReport report = Evaluate(ModelScorer(applied), data.dataset,
                                          data.split, partition, c.TestEval());
    points.push_back({values[k], report.all.hr10});
    log << "sweep value " << values[k] << " hr10 all " << report.all.hr10
        << "\n";
  }
  const std::string name =
      parameter == SweepParameter::kTau ? "tau" : "kappa";
  std::string csv = name + ",hr10_all\n";
  for (const auto& p : points) {
    csv += FormatDouble(p.value) + "," + FormatDouble(p.hr10_all) + "\n";
  }
  WriteTextFile(out / ("sweep_" + name + ".csv"), csv);
  UpdateManifest(out, config, "sweep_" + name, {{"model", base.hash}});
  return points;
}

NewItemOutcome RunNewItemProtocol(const PipelineConfig& config,
                                  const fs::path& out, std::ostream& log) {
  const LoadedData data = LoadIngested(out);
  const NewItemSplit s =
      SplitNewItems(data.dataset, data.split, config.new_item_fraction,
                    DeriveSeed(config.seed, kNewItemSeed, 0));
  log << "new items " << s.new_items.size() << ", extant " << s.num_extant
      << "\n";
  PretrainResult pre = Pretrain(
      s.extant, s.extant_split, config.PretrainSettings(s.num_extant),
      std::nullopt, [&](const EpochLog& e) {
        log << "extant epoch " << e.epoch + 1 << " loss " << e.train_loss << "\n";
      });
  const PopularityPartition extant_partition =
      PartitionHeadTail(s.extant.train_popularity, config.tau);
  const auto contexts =
      TrainContexts(s.extant_split, s.num_extant, pre.model.config());
  const Fit fit =
      FitPhi(config, pre.model, extant_partition, contexts, nullptr, log);
  SequenceModel model = ApplyEmbeddings(
      pre.model, InferEmbeddings(pre.model, fit.result.phi, contexts,
                                 extant_partition, config.CitiesSettings()));

  NewItemOutcome r;
  r.new_items = s.new_items.size();
  const auto fresh = NewItemContexts(s, model.config());
  const FewShotConfig fc = config.CitiesSettings();
  for (const auto& [item, set] : fresh) {
    const auto usable = UsableWindows(set.windows, model.config().kind);
    if (usable.empty()) {
      // Nothing to read: the row stays at zero.
      model.AppendItem(std::vector<double>(model.table().dim(), 0.0));
      continue;
    }
    InferNewItem(&model, fit.result.phi, usable, fc.context_cap,
                 DeriveSeed(fc.seed, 4, static_cast<uint64_t>(item)));
    ++r.inferred;
  }
  const PopularityPartition partition =
      PartitionHeadTail(s.remapped.train_popularity, config.tau);
  r.report = EvaluateByNovelty(model, s, partition, config.TestEval());
  WriteJsonFile(out / artifacts::kNewItemReport,
                {{"new_items", r.new_items},
                 {"inferred", r.inferred},
                 {"extant", ReportToJson(r.report.extant)},
                 {"new", ReportToJson(r.report.fresh)},
                 {"config_echo", PipelineConfigToJson(config)}});
  log << "new-item hr10 " << r.report.fresh.all.hr10 << " over "
      << r.report.fresh.all.support << " users\n";
  UpdateManifest(out, config, "new-item",
                 {{"dataset", data.dataset_hash},
                  {"new_items", r.new_items}});
  return r;
}

size_t RunNewItemsFromFile(const PipelineConfig& config, const fs::path& out,
                           const std::string& context_file,
                           std::ostream& log) {
  const LoadedData data = LoadIngested(out);
  const LoadedModel pretrained =
      LoadModel(out / artifacts::kModel, data.catalog_hash);
  const LoadedPhi phi = LoadPhi(out / artifacts::kPhi, pretrained.hash);
  const bool has_applied = fs::exists(out / artifacts::kApplied);
  LoadedModel base = has_applied
                         ? LoadModel(out / artifacts::kApplied, data.catalog_hash)
                         : pretrained;
  if (has_applied &&
      base.checkpoint.meta.value("source_model", "") != pretrained.hash) {
    throw LineageError("applied model does not descend from " + pretrained.hash);
  }

  const json file = ReadJsonFile(context_file);
  if (!file.is_object() || !file.contains("items") || !file["items"].is_array()) {
    throw FormatError("context file needs an 'items' array");
  }
  Catalog catalog = data.dataset.catalog;
  SequenceModel model = base.model;
  const FewShotConfig fc = config.CitiesSettings();
  std::set<int32_t> added;
  std::vector<std::string> ids;
  try {
    for (const json& entry : file["items"]) {
      const std::string id = entry.at("id").get<std::string>();
      if (catalog.Find(id) >= 0) {
        throw PreconditionError("item '" + id + "' is already in the catalog");
      }
      std::vector<ContextWindow> windows;
      for (const json& w : entry.at("windows")) {
        ContextWindow cw;
        for (const json& x : w.value("left", json::array())) {
          cw.left.push_back(data.dataset.catalog.IndexOf(x.get<std::string>()));
        }
        for (const json& x : w.value("right", json::array())) {
          cw.right.push_back(data.dataset.catalog.IndexOf(x.get<std::string>()));
        }
        windows.push_back(std::move(cw));
      }
      const int32_t idx = InferNewItem(
          &model, phi.phi, windows, fc.context_cap,
          DeriveSeed(fc.seed, 4, static_cast<uint64_t>(catalog.size())));
      catalog.Add(id);
      added.insert(idx);
      ids.push_back(id);
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed context file: " + std::string(e.what()));
  }

  const std::string catalog_hash = Fnv1a::ToHex(catalog.Hash());
  Checkpoint c = ModelToCheckpoint(model, catalog_hash);
  c.meta = {{"source_model", base.hash},
            {"phi", phi.hash},
            {"new_items", ids}};
  SaveCheckpoint(c, (out / artifacts::kNewItemModel).string());
  WriteTextFile(out / artifacts::kNewItemEmbeddings,
                EmbeddingCsv(model, catalog, added,
                             static_cast<int32_t>(data.dataset.catalog.size())));
  log << "added " << ids.size() << " items\n";
  UpdateManifest(out, config, "new-item-file",
                 {{"model", base.hash}, {"phi", phi.hash},
                  {"extended", c.ContentHash()}});
  return ids.size();
}

void RunExportEmbeddings(const fs::path& out, bool applied,
                         const std::string& csv_path) {
  const LoadedData data = LoadIngested(out);
  const LoadedModel m = LoadModel(
      out / (applied ? artifacts::kApplied : artifacts::kModel),
      data.catalog_hash);
  std::set<int32_t> inferred;
  if (m.checkpoint.meta.contains("inferred_items")) {
    for (const json& i : m.checkpoint.meta["inferred_items"]) {
      inferred.insert(i.get<int32_t>());
    }
  }
  WriteTextFile(csv_path, EmbeddingCsv(m.model, data.dataset.catalog, inferred, 0));
}

}  // namespace seqrec

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

// Command-line front end. Exit codes: 0 success, 2 config error, 3 data
// error, 4 training error.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqrec/errors.h"
#include "seqrec/pipeline.h"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kTrainingError = 4;

struct Options {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out = "run";
  std::string variant;
};

seqrec::PipelineConfig ResolveConfig(const Options& o) {
  seqrec::PipelineConfig c = o.config_path.empty()
                                 ? seqrec::PipelineConfig()
                                 : seqrec::LoadPipelineConfig(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.variant.empty()) c.model.kind = seqrec::ParseEncoderKind(o.variant);
  c.Validate();
  return c;
}

int Run(int argc, char** argv) {
  CLI::App app{"Sequential recommendation with context-inferred item embeddings"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON config file");
  app.add_option("--seed", o.seed, "Overrides the config seed");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--variant", o.variant, "Encoder: gru or transformer");

  auto* synth = app.add_subcommand("synth", "Write the synthetic corpus as CSV");
  std::string synth_path;
  synth->add_option("--csv", synth_path, "Destination CSV")->required();

  auto* ingest = app.add_subcommand("ingest", "Build the sequence store");
  auto* pretrain = app.add_subcommand("pretrain", "Train the recommender");
  bool resume = false;
  pretrain->add_flag("--resume", resume, "Continue from the saved state");
  auto* cities = app.add_subcommand("train-cities", "Fit the inference function");
  auto* apply = app.add_subcommand("apply-eval",
                                   "Infer tail rows, apply, evaluate before/after");

  auto* baseline = app.add_subcommand("baseline", "Evaluate a baseline");
  std::string baseline_name = "pop";
  bool rerank = false;
  baseline->add_option("--name", baseline_name, "pop, spop, fomc or model")
      ->capture_default_str();
  baseline->add_flag("--rerank", rerank, "Popularity re-ranking of the top 50");

  auto* sweep = app.add_subcommand("sweep", "Fit and evaluate over a parameter");
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep->add_option("--param", sweep_param, "tau or kappa")->required();
  sweep->add_option("--values", sweep_values, "Values to try")
      ->required()
      ->delimiter(',');

  auto* new_item = app.add_subcommand(
      "new-item", "Held-out new-item experiment, or add items from a file");
  std::string context_file;
  new_item->add_option("--contexts", context_file,
                       "Context file; without it the held-out protocol runs");

  auto* export_emb = app.add_subcommand("export-embeddings",
                                        "Write item rows as CSV");
  std::string export_path;
  std::string export_which = "applied";
  export_emb->add_option("--csv", export_path, "Destination CSV")->required();
  export_emb->add_option("--which", export_which, "pretrained or applied")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  const seqrec::PipelineConfig config = ResolveConfig(o);
  if (*synth) {
    seqrec::RunSynth(config, synth_path);
    return kOk;
  }
  std::ostream& log = std::cerr;
  seqrec::DirectoryLock lock(o.out);
  if (*ingest) {
    const auto r = seqrec::RunIngest(config, o.out, log);
    std::cout << "users\titems\tactions\tavg_actions_per_user\n"
              << r.stats.users << '\t' << r.stats.items << '\t'
              << r.stats.interactions << '\t' << r.stats.avg_actions_per_user
              << '\n';
  } else if (*pretrain) {
    seqrec::RunPretrain(config, o.out, resume, log);
  } else if (*cities) {
    seqrec::RunTrainCities(config, o.out, log);
  } else if (*apply) {
    seqrec::RunApplyEval(config, o.out, log);
  } else if (*baseline) {
    seqrec::RunBaseline(config, o.out, baseline_name, rerank, log);
  } else if (*sweep) {
    seqrec::RunSweep(config, o.out, seqrec::ParseSweepParameter(sweep_param),
                     sweep_values, log);
  } else if (*new_item) {
    if (context_file.empty()) {
      seqrec::RunNewItemProtocol(config, o.out, log);
    } else {
      seqrec::RunNewItemsFromFile(config, o.out, context_file, log);
    }
  } else if (*export_emb) {
    if (export_which != "applied" && export_which != "pretrained") {
      throw seqrec::ConfigError("--which must be pretrained or applied");
    }
    seqrec::RunExportEmbeddings(o.out, export_which == "applied", export_path);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const seqrec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const seqrec::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const seqrec::DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const seqrec::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kTrainingError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

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

#include "seqrec/checkpoint.h"

#include <fstream>

#include "seqrec/errors.h"
#include "seqrec/hash.h"

namespace seqrec {

using json = nlohmann::json;
using nn::Tensor;

const Tensor* Checkpoint::Find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor& Checkpoint::Get(const std::string& name) const {
  const Tensor* t = Find(name);
  if (t == nullptr) throw FormatError("checkpoint has no tensor '" + name + "'");
  return *t;
}

std::string Checkpoint::ContentHash() const {
  Fnv1a h;
  h.String(kind).String(catalog_hash).String(config.dump());
  h.U64(tensors.size());
  for (const auto& [name, t] : tensors) {
    h.String(name).U64(t.shape().size());
    for (size_t d : t.shape()) h.U64(d);
    h.Doubles(t.values());
  }
  return h.hex();
}

void SaveCheckpoint(const Checkpoint& c, const std::string& path) {
  json j;
  j["format"] = "seqrec-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = c.kind;
  j["catalog_hash"] = c.catalog_hash;
  j["content_hash"] = c.ContentHash();
  j["config"] = c.config;
  j["meta"] = c.meta;
  json tensors = json::array();
  for (const auto& [name, t] : c.tensors) {
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"data", std::vector<double>(t.values().begin(),
                                                    t.values().end())}});
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() ||
      j.value("format", "") != "seqrec-checkpoint") {
    throw FormatError("'" + path + "' is not a checkpoint");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw FormatError("checkpoint '" + path + "' has unsupported version");
  }
  Checkpoint c;
  try {
    c.kind = j.at("kind").get<std::string>();
    c.catalog_hash = j.at("catalog_hash").get<std::string>();
    c.config = j.at("config");
    c.meta = j.value("meta", json::object());
    for (const auto& t : j.at("tensors")) {
      c.tensors.emplace_back(
          t.at("name").get<std::string>(),
          Tensor(t.at("shape").get<nn::Shape>(),
                 t.at("data").get<std::vector<double>>()));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint '" + path + "': " + e.what());
  } catch (const DimensionError& e) {
    throw FormatError("malformed checkpoint '" + path + "': " + e.what());
  }
  if (j.value("content_hash", "") != c.ContentHash()) {
    throw FormatError("checkpoint '" + path + "' fails its content hash");
  }
  return c;
}

json ModelConfigToJson(const ModelConfig& c) {
  return {{"variant", EncoderKindName(c.kind)},
          {"num_items", c.num_items},
          {"dim", c.dim},
          {"max_len", c.max_len},
          {"blocks", c.blocks},
          {"heads", c.heads},
          {"dropout", c.dropout},
          {"init_std", c.init_std},
          {"embedding_norm", c.embedding_norm}};
}

ModelConfig ModelConfigFromJson(const json& j) {
  ModelConfig c;
  try {
    c.kind = ParseEncoderKind(j.at("variant").get<std::string>());
    c.num_items = j.at("num_items").get<size_t>();
    c.dim = j.at("dim").get<size_t>();
    c.max_len = j.at("max_len").get<size_t>();
    c.blocks = j.at("blocks").get<size_t>();
    c.heads = j.at("heads").get<size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.init_std = j.at("init_std").get<double>();
    c.embedding_norm = j.at("embedding_norm").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

void StoreParameters(const std::vector<const nn::Parameter*>& params,
                     Checkpoint* checkpoint, const std::string& prefix) {
  for (const nn::Parameter* p : params) {
    checkpoint->tensors.emplace_back(prefix + p->name, p->value);
  }
}

void LoadParameters(const Checkpoint& checkpoint,
                    const std::vector<nn::Parameter*>& params,
                    const std::string& prefix) {
  for (nn::Parameter* p : params) {
    const Tensor& t = checkpoint.Get(prefix + p->name);
    if (!t.SameShape(p->value)) {
      throw FormatError("checkpoint tensor '" + prefix + p->name + "' is " +
                        t.ShapeString() + ", expected " +
                        p->value.ShapeString());
    }
    p->value = t;
  }
}

Checkpoint ModelToCheckpoint(const SequenceModel& model,
                             const std::string& catalog_hash) {
  Checkpoint c;
  c.kind = "model";
  c.catalog_hash = catalog_hash;
  c.config = ModelConfigToJson(model.config());
  StoreParameters(model.Parameters(), &c);
  return c;
}

SequenceModel ModelFromCheckpoint(const Checkpoint& checkpoint,
                                  const std::string& expected_catalog_hash) {
  if (!expected_catalog_hash.empty() &&
      checkpoint.catalog_hash != expected_catalog_hash) {
    throw LineageError("checkpoint was built for catalog " +
                       checkpoint.catalog_hash + ", dataset has " +
                       expected_catalog_hash);
  }
  SequenceModel model =
      SequenceModel::Create(ModelConfigFromJson(checkpoint.config), 0);
  LoadParameters(checkpoint, model.Parameters());
  return model;
}

}  // namespace seqrec

// Copyright 2026 The DistAudit Authors
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

#ifndef DISTAUDIT_CONFIG_H_
#define DISTAUDIT_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace distaudit {

inline constexpr uint64_t kDefaultMasterSeed = 42;
inline constexpr char kSeedEnvVar[] = "DISTAUDIT_SEED";

// Everything an experiment needs. Each field is one `key = value` entry.
struct ExperimentConfig {
  // Data. An empty data_csv selects the synthetic mixture.
  std::string data_csv;
  size_t classes = 10;
  size_t dims = 32;
  size_t per_class = 400;
  double spread = 0.6;
  uint64_t data_seed = 7;
  uint64_t split_seed = 1;
  size_t teacher_pool = 1000;
  size_t student_pool = 1000;
  // Taken from the held-out rows; what remains is the test set.
  size_t surrogate_pool = 1000;

  // Models.
  size_t hidden = 256;
  size_t epochs = 20;
  double learning_rate = 0.01;
  double momentum = 0.99;
  size_t batch_size = 64;
  double temperature = 1.0;
  bool gradient_rescale = false;
  double alpha = 1.0;

  // Shadow populations and attacks.
  size_t calibration_models = 128;
  size_t evaluation_models = 128;
  size_t k = 10;
  double variance_floor = 1e-6;
  bool global_variance = false;
  size_t workers = 1;

  // Experiment grids.
  size_t targets = 32;
  size_t duplicate_copies = 1;
  std::vector<size_t> replicas = {0, 2, 4};
  std::vector<double> temperatures = {0.1, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
  size_t candidate_teachers = 4;

  uint64_t seed = kDefaultMasterSeed;
  std::string out = "reports";
  bool save_stores = false;

  absl::Status Validate() const;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// All keys in echo order.
const std::vector<ConfigKey>& ConfigKeys();

// Sets one key from its text form. Unknown keys are rejected.
absl::Status SetConfigValue(ExperimentConfig& config, const std::string& key,
                            const std::string& value);

// Parses `key = value` lines; `#` starts a comment.
absl::StatusOr<std::vector<std::pair<std::string, std::string>>>
ParseConfigText(const std::string& text);

// Defaults, then the file, then the seed variable, then flag overrides.
absl::StatusOr<ExperimentConfig> ResolveConfig(
    const std::string& config_path,
    const std::vector<std::pair<std::string, std::string>>& overrides,
    const char* env_seed);

// One `key = value` line per key, readable by ParseConfigText.
std::string ConfigEcho(const ExperimentConfig& config);

}  // namespace distaudit

#endif  // DISTAUDIT_CONFIG_H_

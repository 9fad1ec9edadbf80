#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hlpnn/optim.hpp"

namespace hlpnn {

// Binary checkpoint: magic "HLPNN1", config hash and seed in the header,
// then named auxiliary text blobs (vocabulary, label tables) and named
// parameter tensors as shape + flat float64 arrays.
struct Checkpoint {
  std::string config_json;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> aux;
  struct Param {
    int rows;
    int cols;
    std::vector<double> values;
  };
  std::map<std::string, Param> params;
};

std::uint64_t fnv1a64(const std::string& s);

void save_checkpoint(const std::string& path, const std::string& config_json, std::uint64_t seed,
                     const ParameterMap& params, const std::map<std::string, std::string>& aux);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into an existing parameter map; every name and
// shape must match.
void restore_parameters(const Checkpoint& ckpt, ParameterMap& params);

}  // namespace hlpnn

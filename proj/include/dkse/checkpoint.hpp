#pragma once

#include <string>

#include "dkse/params.hpp"
#include "dkse/train.hpp"

namespace dkse {

// A trained model plus everything needed to rebuild its run: all tensors
// with shapes, the hyper-parameters, and the rng seed (inside HyperParams).
struct Checkpoint {
  HyperParams hyper;
  ParameterSet params;
};

// Binary layout, all integers and doubles little-endian regardless of host:
//   "DKSE-CKPT v1\n", shape (4 u64), hyper block, then each tensor as
//   u64 length + raw IEEE-754 payloads. Round-trips are bit-exact.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dkse

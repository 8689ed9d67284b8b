#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vad/cae.hpp"
#include "vad/svdd.hpp"

namespace vad {

// Named-tensor container, same framing as feature clips:
//   "MAWT" | u32 version (=1) | u32 header length | header JSON |
//   u32 tensor count | per tensor: u32 name length | name | u32 ndim |
//   u32 dims[] | binary32 payload (little-endian, row-major).
struct NamedTensor {
    Shape shape;
    std::vector<double> data;
};

struct Checkpoint {
    nlohmann::json header;
    std::map<std::string, NamedTensor> tensors;  // map keeps file order deterministic
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json branch_spec_to_json(const BranchSpec& spec);
BranchSpec branch_spec_from_json(const nlohmann::json& j);

// State capture and restore. Restoring checks every tensor's shape and
// reports an explicit diff on mismatch.
void capture_state(const BranchNet& net, const std::string& prefix, Checkpoint& ckpt);
void restore_state(BranchNet& net, const std::string& prefix, const Checkpoint& ckpt);
void capture_state(const DecoderNet& net, const std::string& prefix, Checkpoint& ckpt);
void restore_state(DecoderNet& net, const std::string& prefix, const Checkpoint& ckpt);
void capture_state(const CaeModel& model, Checkpoint& ckpt);
void restore_state(CaeModel& model, const Checkpoint& ckpt);
void capture_state(const AnomalyModel& model, Checkpoint& ckpt);
void restore_state(AnomalyModel& model, const Checkpoint& ckpt);

}  // namespace vad

#ifndef KCL_CHECKPOINT_HPP
#define KCL_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "kcl/harness.hpp"

namespace kcl {

/// Everything needed to restart a run at a task boundary: weights, filter
/// state, progress, the config that produced them, and the accuracy rows
/// recorded so far. Round-trips byte-identically through save/load.
struct Checkpoint {
    std::vector<int> layer_dims;
    ParamVector params_flat;
    KalmanState state;  // state.theta mirrors params_flat
    std::uint32_t tasks_completed = 0;
    TrainConfig config;
    DatasetConfig dataset;
    std::vector<std::vector<double>> matrix_rows;
};

Checkpoint make_checkpoint(const NetworkParams& params, const KalmanState& state,
                           int tasks_completed, const TrainConfig& config,
                           const DatasetConfig& dataset, const AccuracyMatrix& matrix);

/// Rebuild the structured weights from the stored architecture and flat
/// vector.
NetworkParams checkpoint_params(const Checkpoint& ckpt);

AccuracyMatrix checkpoint_matrix(const Checkpoint& ckpt);

/// Binary container: 4-byte magic "KCLC", little-endian u16 version, seven
/// length-prefixed sections, trailing FNV-1a 64 checksum of everything
/// before it. Doubles are IEEE-754 64-bit little-endian, so resume is
/// bit-exact. Written to a temp file and renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

/// Throws FormatError on structural damage (bad magic, truncation, bad
/// checksum) and VersionError on a version mismatch.
Checkpoint load_checkpoint(const std::string& path);

/// The serialized byte image (what save_checkpoint writes).
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

}  // namespace kcl

#endif  // KCL_CHECKPOINT_HPP

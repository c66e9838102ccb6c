#pragma once

#include <optional>
#include <string>
#include <vector>

#include "neuralmodes/domain.hpp"
#include "neuralmodes/energy.hpp"
#include "neuralmodes/subspace.hpp"
#include "neuralmodes/training.hpp"

namespace nmodes {

/// Everything needed to rebuild a trained subspace without the original
/// config: the network, the modal basis, the mesh and material it belongs to,
/// and how it was trained.
struct Checkpoint {
  static constexpr int kVersion = 1;

  std::string kind = "linear";  // "linear", "self_supervised" or "l2_supervised"
  SubspaceModel model;
  Mesh mesh;
  MaterialParams material;
  /// Static springs (pins) that were part of the training energy.
  std::vector<Attachment> pins;
  std::optional<TrainConfig> train_config;
  TrainingHistory history;

  /// Energy family matching the stored mesh, material and aux spec.
  EnergyFamilyPtr family() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nmodes

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atnf/dataset.hpp"
#include "atnf/gradcheck.hpp"
#include "atnf/losses.hpp"
#include "atnf/network.hpp"

namespace atnf::training {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  std::uint64_t seed = 42;
  double learning_rate = 1e-3;
  int batch_size = 4;
  int steps = 200;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// (SSIM, perceptual, edge); unset means the phase default:
  /// (1, 0, 1) for attention, (1, 1, 1) otherwise.
  std::optional<std::array<double, 3>> loss_weights;
  Phase phase = Phase::main;
  int perceptual_stage = losses::kDefaultPerceptualStage;

  /// Throws ArgumentError unless lr > 0, steps >= 1, batch >= 1, 0 <= beta < 1,
  /// epsilon > 0, weights finite and >= 0, and a valid perceptual stage.
  void validate() const;
  losses::LossConfig loss_config() const;
};

/// Applies `key = value` lines (blank lines and # comments ignored; values may
/// be quoted; loss_weights takes three comma-separated numbers, optionally in
/// brackets). Unknown keys and malformed values throw ArgumentError.
void apply_config_text(TrainConfig& config, std::string_view text);
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

struct CurvePoint {
  int step = 0;
  losses::LossTerms terms;  // batch means before the update
};

struct TrainResult {
  ModelGraph model;
  std::vector<CurvePoint> curve;
};

/// Trains the family selected by config.phase with every other tensor held
/// constant, then marks the phase trained and freezes subtask families.
/// steps == 0 returns the model unchanged with an empty curve.
/// Errors: main before attention and enhance -> StateError; attention without
/// masks -> DataError; non-finite loss -> NumericError.
TrainResult train_phase(ModelGraph model, const std::vector<Sample>& data, const TrainConfig& config);

/// Mean phase loss over the whole dataset (every item, no update).
losses::LossTerms dataset_loss(const ModelGraph& model, const std::vector<Sample>& data, const TrainConfig& config);

/// Graph of one item's phase loss. For the enhance phase `item` selects a
/// single image: even -> a, odd -> b of data sample item / 2.
losses::LossGraph phase_loss(ad::Binder& bind, const ModelGraph& model, const Sample& sample, Phase phase,
                             const losses::LossConfig& loss, int enhance_side = 0);

/// Gradient check of a phase loss on one sample over the named parameters
/// (all parameters when `names` is empty).
gradcheck::Report grad_check(ModelGraph& model, const Sample& sample, Phase phase, const gradcheck::Options& options,
                             const std::vector<std::string>& names = {});

/// Analytic gradients for every parameter, with only `trainable` families as
/// leaves; frozen families come back as exact zeros.
std::vector<std::pair<std::string, Tensor>> model_gradients(ModelGraph& model, const Sample& sample, Phase phase,
                                                            std::uint32_t trainable_families);

/// CSV with header iteration,L_SSIM,L_Perceptual,L_Edge,L_f.
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace atnf::training

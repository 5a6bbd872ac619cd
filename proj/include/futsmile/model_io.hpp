#pragma once

#include "futsmile/spot_model.hpp"

#include <filesystem>
#include <string>

namespace futsmile {

inline constexpr int kModelSchemaVersion = 1;

/// Versioned JSON document with everything needed to rebuild the model without the market files.
std::string model_to_json(const CalibratedSpotModel& model);
CalibratedSpotModel model_from_json(const std::string& text);

void save_model(const CalibratedSpotModel& model, const std::filesystem::path& path);
CalibratedSpotModel load_model(const std::filesystem::path& path);

}  // namespace futsmile

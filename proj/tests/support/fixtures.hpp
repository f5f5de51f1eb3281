#pragma once

#include <filesystem>

#include "ssvae/data/loaders.hpp"

namespace testutil {

/// Ten class directories x three speeds of 120,000-sample recordings
/// (seeded noise) in the CWRU layout.
void write_cwru_fixture(const std::filesystem::path& root, std::size_t length = 120000);

/// Every file the protocol selects, 20,480 points each, in the IMS layout.
void write_ims_fixture(const std::filesystem::path& root, const ssvae::data::ImsProtocol& protocol = {});

/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(const std::string& name);

}  // namespace testutil

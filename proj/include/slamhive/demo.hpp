#pragma once

#include <string>
#include <vector>

#include "slamhive/config.hpp"
#include "slamhive/dataprep.hpp"
#include "slamhive/layout.hpp"

// Catalog entries matching the bundled mock adapter and synthetic sequences,
// used by the CLI's demo setup and by tests.
namespace slamhive::demo {

inline constexpr const char* kMockImage = "slamhive/mock-slam:latest";

/// Parameter template of the mock adapter (noise, nFeatures, offset, ...).
config::AlgorithmSpec mock_algorithm(Id id, const std::string& name = "MockSLAM");

config::DatasetSpec synthetic_dataset(Id id, const std::string& name, const std::vector<std::string>& sequences,
                                      const dataprep::SyntheticOptions& options = {});

/// Writes every sequence of `dataset` under the layout's datasets directory;
/// each sequence gets its own seed.
void install_synthetic_dataset(const StorageLayout& layout, const config::DatasetSpec& dataset,
                               dataprep::SyntheticOptions options = {});

}  // namespace slamhive::demo

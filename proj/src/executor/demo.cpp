#include "slamhive/demo.hpp"

namespace slamhive::demo {

using config::ValueKind;

config::AlgorithmSpec mock_algorithm(Id id, const std::string& name) {
  config::AlgorithmSpec spec;
  spec.id = id;
  spec.name = name;
  spec.image_ref = kMockImage;
  spec.sensor_modes = {config::SensorMode::mono, config::SensorMode::mono_imu};
  spec.parameter_template = {
      {"noise", "0.02", ValueKind::real},         {"nFeatures", "1000", ValueKind::integer},
      {"offset", "0", ValueKind::real},           {"scale_drift", "0", ValueKind::real},
      {"coverage", "1", ValueKind::real},         {"seed", "0", ValueKind::integer},
      {"stochastic", "false", ValueKind::flag},   {"busy_threads", "0", ValueKind::integer},
      {"exit_code", "0", ValueKind::integer},     {"hang", "false", ValueKind::flag},
      {"write_dataset", "false", ValueKind::flag},
  };
  return spec;
}

config::DatasetSpec synthetic_dataset(Id id, const std::string& name, const std::vector<std::string>& sequences,
                                      const dataprep::SyntheticOptions& options) {
  config::DatasetSpec spec;
  spec.id = id;
  spec.name = name;
  spec.sequences = sequences;
  spec.topics = {{"cam0", options.camera_topic}, {"imu0", options.imu_topic}};
  spec.native_rate = options.camera_rate;
  spec.native_resolution = {options.resolution.width, options.resolution.height};
  return spec;
}

void install_synthetic_dataset(const StorageLayout& layout, const config::DatasetSpec& dataset,
                               dataprep::SyntheticOptions options) {
  const unsigned base_seed = options.seed;
  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
    options.seed = base_seed + static_cast<unsigned>(i);
    dataprep::write_synthetic_sequence(layout.sequence_dir(dataset.name, dataset.sequences[i]),
                                       dataprep::make_synthetic_sequence(options));
  }
}

}  // namespace slamhive::demo

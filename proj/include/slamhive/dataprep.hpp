#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "slamhive/config.hpp"
#include "slamhive/error.hpp"
#include "slamhive/trajeval.hpp"

// Derived datasets with reduced frame rate and/or image resolution.
//
// A sequence log is a directory:
//   messages.csv     header "timestamp,topic,width,height,blob", one row per message
//                    (width/height empty for non-image payloads, blob a file name
//                    under blobs/ or empty when the payload is descriptor-only)
//   blobs/           optional payload files
//   groundtruth.txt  TUM ground truth, copied unchanged into prepared variants
//   prep.json        only in prepared variants: the parameters that produced it
namespace slamhive::dataprep {

struct ImageDims {
  int width = 0;
  int height = 0;
  bool operator==(const ImageDims&) const = default;
};

struct Message {
  double t = 0.0;
  std::string topic;
  std::optional<ImageDims> image;
  std::string blob;
  bool operator==(const Message&) const = default;
};

struct SequenceLog {
  std::vector<Message> messages;

  std::set<std::string> image_topics() const;
  std::size_t count(const std::string& topic) const;
  /// Throws MalformedLog when a topic's timestamps decrease.
  void validate() const;
};

SequenceLog read_sequence_log(const std::filesystem::path& dir);
void write_sequence_log(const std::filesystem::path& dir, const SequenceLog& log);

/// Keeps every n-th message (starting with the first) of each affected topic,
/// n = round(source_rate / target_rate). Throws RateAboveSource.
SequenceLog decimate(const SequenceLog& log, double source_rate, double target_rate,
                     const std::set<std::string>& topics);

/// Image dimensions become (round(w*f), round(h*f)); count and timing kept.
/// Throws FactorOutOfRange.
SequenceLog rescale(const SequenceLog& log, double factor, const std::set<std::string>& topics);

/// Resampling of real pixel payloads. Descriptor-only payloads need none.
class ImageResampler {
 public:
  virtual ~ImageResampler() = default;
  virtual void resample(const std::filesystem::path& source, const std::filesystem::path& target,
                        ImageDims from, ImageDims to) = 0;
};

struct PrepParams {
  std::optional<double> target_rate;
  std::optional<double> resolution_factor;
  std::set<std::string> topics;

  bool is_identity(double source_rate) const;
};

/// Prep parameters implied by a configuration's dataset parameters; image
/// topics are the affected ones.
PrepParams prep_params_for(const config::MappingConfiguration& config, const config::DatasetSpec& dataset,
                           const SequenceLog& source);

/// Content-derived key; numerically equal parameters give equal keys.
std::string prep_cache_key(Id dataset_id, const std::string& sequence, const PrepParams& params);

/// Prepared variants stored once per key under `root`. Concurrent callers of
/// the same key wait for the first writer and reuse its output.
class PrepCache {
 public:
  explicit PrepCache(std::filesystem::path root, ImageResampler* resampler = nullptr);

  /// Directory holding the prepared variant (the source directory itself when
  /// the params change nothing).
  std::filesystem::path prepare(Id dataset_id, const std::string& sequence, const std::filesystem::path& source_dir,
                                double source_rate, const PrepParams& params);

  std::filesystem::path path_for(const std::string& key) const { return root_ / key; }

  /// Number of transformations actually performed.
  std::size_t transformation_count() const { return transformations_.load(); }

 private:
  std::filesystem::path root_;
  ImageResampler* resampler_;
  std::mutex mutex_;
  std::condition_variable done_;
  std::set<std::string> in_progress_;
  std::atomic<std::size_t> transformations_{0};
};

struct SyntheticSequence {
  SequenceLog log;
  trajeval::Trajectory ground_truth;
};

struct SyntheticOptions {
  double duration = 10.0;     // seconds
  double camera_rate = 20.0;  // Hz
  double imu_rate = 200.0;    // Hz
  ImageDims resolution{752, 480};
  std::string camera_topic = "/cam0/image_raw";
  std::string imu_topic = "/imu0";
  double radius = 3.0;  // meters, size of the looping path
  unsigned seed = 1;
};

/// Smooth looping path with a camera stream, an IMU stream and ground truth
/// sampled at every camera frame.
SyntheticSequence make_synthetic_sequence(const SyntheticOptions& options);
void write_synthetic_sequence(const std::filesystem::path& dir, const SyntheticSequence& sequence);

}  // namespace slamhive::dataprep

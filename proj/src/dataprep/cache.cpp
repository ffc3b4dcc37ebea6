#include "slamhive/dataprep.hpp"
#include "slamhive/layout.hpp"
#include "slamhive/util.hpp"

namespace slamhive::dataprep {

namespace fs = std::filesystem;

PrepCache::PrepCache(fs::path root, ImageResampler* resampler) : root_(std::move(root)), resampler_(resampler) {
  fs::create_directories(root_);
}

fs::path PrepCache::prepare(Id dataset_id, const std::string& sequence, const fs::path& source_dir,
                            double source_rate, const PrepParams& params) {
  if (!fs::exists(source_dir / sequence_files::kMessages)) {
    throw Error(Errc::MissingDataset, "no sequence log at " + source_dir.string());
  }
  if (params.is_identity(source_rate)) return source_dir;

  const std::string key = prep_cache_key(dataset_id, sequence, params);
  const fs::path target = root_ / key;
  {
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return in_progress_.count(key) == 0; });
    if (fs::exists(target / sequence_files::kPrepInfo)) return target;
    in_progress_.insert(key);
  }

  auto release = [&] {
    {
      std::lock_guard lock(mutex_);
      in_progress_.erase(key);
    }
    done_.notify_all();
  };

  const fs::path staging = root_ / (key + ".tmp-" + util::random_token());
  try {
    SequenceLog log = read_sequence_log(source_dir);
    const auto original = log;
    if (params.target_rate) log = decimate(log, source_rate, *params.target_rate, params.topics);
    if (params.resolution_factor) log = rescale(log, *params.resolution_factor, params.topics);

    fs::create_directories(staging);
    write_sequence_log(staging, log);
    if (fs::exists(source_dir / sequence_files::kGroundTruth)) {
      fs::copy_file(source_dir / sequence_files::kGroundTruth, staging / sequence_files::kGroundTruth);
    }

    // payload blobs follow their messages; rescaled images need a resampler
    std::map<std::string, ImageDims> original_dims;
    for (const auto& m : original.messages)
      if (!m.blob.empty() && m.image) original_dims[m.blob] = *m.image;
    for (const auto& m : log.messages) {
      if (m.blob.empty()) continue;
      const fs::path from = source_dir / sequence_files::kBlobs / m.blob;
      const fs::path to = staging / sequence_files::kBlobs / m.blob;
      fs::create_directories(to.parent_path());
      const bool resized = m.image && original_dims.count(m.blob) && !(original_dims[m.blob] == *m.image);
      if (resized) {
        if (!resampler_) throw Error(Errc::InvalidSpec, "image payloads need a resampler to change resolution");
        resampler_->resample(from, to, original_dims[m.blob], *m.image);
      } else {
        fs::copy_file(from, to, fs::copy_options::overwrite_existing);
      }
    }

    std::string info = "{\"dataset_id\": " + std::to_string(dataset_id) + ", \"sequence\": \"" + sequence + "\"";
    if (params.target_rate) info += ", \"target_rate\": " + util::format_number(*params.target_rate);
    if (params.resolution_factor) info += ", \"resolution_factor\": " + util::format_number(*params.resolution_factor);
    info += "}\n";
    util::write_file(staging / sequence_files::kPrepInfo, info);

    fs::remove_all(target);
    fs::rename(staging, target);
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    release();
    throw;
  }
  ++transformations_;
  release();
  return target;
}

}  // namespace slamhive::dataprep

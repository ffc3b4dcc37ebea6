#include <algorithm>
#include <fstream>

#include "slamhive/dataprep.hpp"
#include "slamhive/store.hpp"
#include "slamhive/util.hpp"

namespace slamhive::store {

using nlohmann::json;
using executor::RunState;

namespace {

std::optional<json> read_json(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return json::parse(util::read_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptResults, path.string() + ": " + e.what());
  }
}

Id run_id_of(const fs::path& run_dir, const std::optional<json>& info) {
  if (info && info->contains("run_id") && (*info)["run_id"].is_number_integer()) return (*info)["run_id"].get<Id>();
  const auto parsed = util::parse_integer(run_dir.filename().string());
  if (!parsed || *parsed <= 0) throw Error(Errc::CorruptResults, "cannot tell the run id of " + run_dir.string());
  return *parsed;
}

// Image timestamps of the log the run replayed.
std::vector<double> frame_times(const fs::path& sequence_dir) {
  if (!fs::exists(sequence_dir / sequence_files::kMessages)) return {};
  const auto log = dataprep::read_sequence_log(sequence_dir);
  const auto topics = log.image_topics();
  if (topics.empty()) return {};
  // the busiest image topic stands for the frame stream
  std::string topic = *topics.begin();
  for (const auto& t : topics)
    if (log.count(t) > log.count(topic)) topic = t;
  std::vector<double> out;
  for (const auto& m : log.messages)
    if (m.topic == topic) out.push_back(m.t);
  std::sort(out.begin(), out.end());
  return out;
}

fs::path ground_truth_path(const StorageLayout& layout, const config::DatasetSpec& dataset,
                           const std::string& sequence) {
  return layout.sequence_dir(dataset.name, sequence) / dataset.ground_truth_ref;
}

}  // namespace

double coverage_against_frames(const trajeval::Trajectory& estimate, const trajeval::Trajectory& ground_truth,
                               const std::vector<double>& frames, double max_time_diff) {
  if (frames.empty()) return trajeval::traj_length_factor(estimate, ground_truth, max_time_diff);
  const auto& gt = ground_truth.poses();
  std::vector<trajeval::Pose> expected;
  for (double t : frames) {
    auto it = std::lower_bound(gt.begin(), gt.end(), t, [](const trajeval::Pose& p, double v) { return p.t < v; });
    const trajeval::Pose* best = nullptr;
    if (it != gt.end()) best = &*it;
    if (it != gt.begin() && (!best || t - std::prev(it)->t < best->t - t)) best = &*std::prev(it);
    if (best && std::abs(best->t - t) <= max_time_diff && (expected.empty() || best->t > expected.back().t))
      expected.push_back(*best);
  }
  if (expected.empty()) return trajeval::traj_length_factor(estimate, ground_truth, max_time_diff);
  return trajeval::traj_length_factor(estimate, trajeval::Trajectory(std::move(expected)), max_time_diff);
}

IngestResult ingest(Store& store, const StorageLayout& layout, const fs::path& run_dir, Id config_id) {
  if (!fs::is_directory(run_dir)) throw Error(Errc::CorruptResults, run_dir.string() + " is not a directory");
  const auto info = read_json(run_dir / result_files::kRunInfo);
  const Id run_id = run_id_of(run_dir, info);

  std::optional<RunRecord> existing;
  try {
    existing = store.run(run_id);
  } catch (const Error& e) {
    if (e.code() != Errc::NotFound) throw;
  }
  if (existing && existing->ingested) return {*existing, false};

  const auto config = store.configuration(config_id);
  const auto dataset = store.dataset(config.dataset_id);

  RunRecord record = existing.value_or(RunRecord{});
  record.id = run_id;
  record.config_id = config_id;

  const fs::path marker = run_dir / result_files::kFailureMarker;
  const fs::path sentinel = run_dir / result_files::kSentinel;
  if (fs::exists(marker)) {
    const std::string text = util::trim(util::read_file(marker));
    record.status = text.rfind("timed_out", 0) == 0 ? RunState::timed_out : RunState::failed;
    const auto colon = text.find(':');
    record.reason = colon == std::string::npos ? text : util::trim(text.substr(colon + 1));
  } else if (fs::exists(sentinel)) {
    record.status = RunState::finished;
    record.reason.clear();
  } else {
    throw Error(Errc::CorruptResults, run_dir.string() + " has neither a sentinel nor a failure marker");
  }

  if (info) {
    try {
      record.node_id = info->value("node_id", record.node_id);
      record.cpu_type = info->value("cpu_type", record.cpu_type);
      record.core_count = info->value("core_count", record.core_count);
      record.started_at = info->value("started_at", record.started_at);
      record.finished_at = info->value("ended_at", record.finished_at);
      record.time_scale = info->value("time_scale", record.time_scale);
    } catch (const json::exception& e) {
      throw Error(Errc::CorruptResults, "run_info.json: " + std::string(e.what()));
    }
  }

  if (fs::exists(run_dir / result_files::kProfiling)) {
    const auto summary = executor::summarize(executor::read_profiling_csv(run_dir / result_files::kProfiling));
    record.cpu_mean = summary.cpu_mean;
    record.cpu_max = summary.cpu_max;
    record.ram_max = summary.ram_max;
  }
  for (const char* name : {result_files::kMapCloud, result_files::kMapGrid}) {
    if (fs::exists(run_dir / name)) {
      record.map_artifact = name;
      break;
    }
  }

  std::optional<trajeval::Trajectory> estimate;
  if (fs::exists(run_dir / result_files::kTrajectory)) {
    try {
      estimate = trajeval::read_trajectory(run_dir / result_files::kTrajectory);
    } catch (const Error&) {
    }
  }
  if (record.status == RunState::finished && !estimate) {
    record.status = RunState::failed;
    record.reason = "MissingTrajectory: traj.txt is absent or unreadable";
  }
  record.traj_length.reset();
  if (estimate) {
    const auto gt = trajeval::read_trajectory(ground_truth_path(layout, dataset, config.sequence));
    fs::path mount = layout.sequence_dir(dataset.name, config.sequence);
    if (info && info->contains("dataset_mount") && (*info)["dataset_mount"].is_string()) {
      const fs::path recorded = (*info)["dataset_mount"].get<std::string>();
      if (fs::exists(recorded / sequence_files::kMessages)) mount = recorded;
    }
    record.traj_length = coverage_against_frames(*estimate, gt, frame_times(mount));
  } else if (record.status == RunState::finished) {
    record.traj_length = 0.0;
  }

  if (!store.commit_ingest(record)) return {store.run(run_id), false};
  return {store.run(run_id), true};
}

EvaluationRecord evaluate(Store& store, const StorageLayout& layout, Id run_id, const EvaluateOptions& options) {
  const auto run = store.run(run_id);
  if (run.status != RunState::finished)
    throw Error(Errc::RunNotFinished, "run " + std::to_string(run_id) + " is " + std::string(to_string(run.status)));
  if (!options.force && store.evaluation(run_id))
    throw Error(Errc::AlreadyEvaluated, "run " + std::to_string(run_id) + " already has an evaluation");

  const auto config = store.configuration(run.config_id);
  const auto dataset = store.dataset(config.dataset_id);
  const auto gt = trajeval::read_trajectory(ground_truth_path(layout, dataset, config.sequence));
  const auto est = trajeval::read_trajectory(layout.results_dir(run_id) / result_files::kTrajectory);

  auto paired = trajeval::associate(est, gt, options.max_time_diff);
  trajeval::SimilarityTransform transform;
  if (options.align) transform = trajeval::align(paired, options.with_scale);
  // estimated poses mapped into the reference frame; relative errors then
  // see the corrected scale as well
  const Eigen::Quaterniond rotation(transform.rotation);
  for (auto& pair : paired.pairs) {
    pair.est.position = transform.apply(pair.est.position);
    pair.est.orientation = (rotation * pair.est.orientation).normalized();
  }

  EvaluationRecord record;
  record.run_id = run_id;
  record.aligned = options.align;
  record.with_scale = options.with_scale;
  record.rpe_delta = options.rpe_delta;
  record.max_time_diff = options.max_time_diff;
  record.evaluated_at = util::wall_seconds();
  const auto ape_values = trajeval::ape_errors(paired, trajeval::SimilarityTransform{});
  record.ate = trajeval::compute_stats(ape_values);
  std::vector<trajeval::RpeWindow> windows;
  try {
    windows = trajeval::rpe_windows(paired, options.rpe_delta);
    record.rpe = trajeval::rpe(paired, options.rpe_delta);
  } catch (const Error& e) {
    if (e.code() != Errc::TrajectoryTooShort) throw;
    record.rpe = {};
  }

  const fs::path bundle = layout.evaluation_dir(run_id);
  fs::create_directories(bundle);
  std::string ape_csv = "t,error\n";
  for (std::size_t i = 0; i < paired.pairs.size(); ++i)
    ape_csv += util::format_number(paired.pairs[i].est.t) + "," + util::format_number(ape_values[i]) + "\n";
  util::write_file(bundle / "ape_errors.csv", ape_csv);
  std::string rpe_csv = "t_first,t_last,ref_path_length,error\n";
  for (const auto& w : windows) {
    rpe_csv += util::format_number(paired.pairs[w.first].est.t) + "," + util::format_number(paired.pairs[w.last].est.t) +
               "," + util::format_number(w.ref_path_length) + "," + util::format_number(w.error) + "\n";
  }
  util::write_file(bundle / "rpe_errors.csv", rpe_csv);
  std::vector<trajeval::Pose> aligned;
  for (const auto& p : paired.pairs) aligned.push_back(p.est);
  trajeval::write_trajectory(bundle / "traj_aligned.txt", trajeval::Trajectory(std::move(aligned)));
  json stats = record;
  stats["transform"] = {{"scale", transform.scale},
                        {"translation", {transform.translation.x(), transform.translation.y(), transform.translation.z()}}};
  util::write_file(bundle / "stats.json", stats.dump(2) + "\n");

  store.put_evaluation(record, options.force);
  return record;
}

std::vector<EvaluationRecord> evaluate_all_unevaluated(Store& store, const StorageLayout& layout,
                                                       const EvaluateOptions& options,
                                                       std::vector<std::pair<Id, std::string>>* errors) {
  std::vector<EvaluationRecord> out;
  for (const auto& run : store.runs()) {
    if (run.status != RunState::finished || store.evaluation(run.id)) continue;
    try {
      out.push_back(evaluate(store, layout, run.id, options));
    } catch (const Error& e) {
      // a concurrent caller may have evaluated it first
      if (e.code() == Errc::AlreadyEvaluated) continue;
      if (errors) errors->emplace_back(run.id, e.what());
    }
  }
  return out;
}

}  // namespace slamhive::store

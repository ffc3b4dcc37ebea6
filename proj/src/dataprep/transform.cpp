#include <cmath>
#include <map>

#include "slamhive/dataprep.hpp"
#include "slamhive/util.hpp"

namespace slamhive::dataprep {

SequenceLog decimate(const SequenceLog& log, double source_rate, double target_rate,
                     const std::set<std::string>& topics) {
  if (!(source_rate > 0.0) || !(target_rate > 0.0)) {
    throw Error(Errc::InvalidSpec, "rates must be positive");
  }
  if (target_rate > source_rate) {
    throw Error(Errc::RateAboveSource, util::format_number(target_rate) + " Hz exceeds the source rate " +
                                           util::format_number(source_rate) + " Hz");
  }
  const auto keep_every = static_cast<std::size_t>(std::max(1.0, std::round(source_rate / target_rate)));
  SequenceLog out;
  std::map<std::string, std::size_t> seen;
  for (const auto& m : log.messages) {
    if (!topics.count(m.topic)) {
      out.messages.push_back(m);
      continue;
    }
    if (seen[m.topic]++ % keep_every == 0) out.messages.push_back(m);
  }
  return out;
}

SequenceLog rescale(const SequenceLog& log, double factor, const std::set<std::string>& topics) {
  if (!(factor > 0.0) || factor > 1.0) {
    throw Error(Errc::FactorOutOfRange, "resolution factor " + util::format_number(factor) + " outside (0, 1]");
  }
  SequenceLog out = log;
  for (auto& m : out.messages) {
    if (!m.image || !topics.count(m.topic)) continue;
    m.image->width = std::max(1, static_cast<int>(std::lround(m.image->width * factor)));
    m.image->height = std::max(1, static_cast<int>(std::lround(m.image->height * factor)));
  }
  return out;
}

bool PrepParams::is_identity(double source_rate) const {
  const bool same_rate = !target_rate || *target_rate == source_rate;
  const bool same_size = !resolution_factor || *resolution_factor == 1.0;
  return same_rate && same_size;
}

PrepParams prep_params_for(const config::MappingConfiguration& config, const config::DatasetSpec& dataset,
                           const SequenceLog& source) {
  PrepParams params;
  if (const auto it = config.dataset_params.find(config::dataset_keys::kFrameRate); it != config.dataset_params.end()) {
    const auto rate = util::parse_double(it->second);
    if (!rate) throw Error(Errc::InvalidSpec, "frame_rate is not numeric: " + it->second);
    if (*rate != dataset.native_rate) params.target_rate = *rate;
  }
  if (const auto it = config.dataset_params.find(config::dataset_keys::kResolutionFactor);
      it != config.dataset_params.end()) {
    const auto factor = util::parse_double(it->second);
    if (!factor) throw Error(Errc::InvalidSpec, "resolution_factor is not numeric: " + it->second);
    if (*factor != 1.0) params.resolution_factor = *factor;
  }
  params.topics = source.image_topics();
  return params;
}

std::string prep_cache_key(Id dataset_id, const std::string& sequence, const PrepParams& params) {
  std::string canonical = "dataset=" + std::to_string(dataset_id) + ";sequence=" + sequence;
  canonical += ";rate=" + (params.target_rate ? util::format_number(*params.target_rate) : std::string("-"));
  canonical += ";factor=" + (params.resolution_factor ? util::format_number(*params.resolution_factor) : std::string("-"));
  canonical += ";topics=";
  for (const auto& topic : params.topics) canonical += topic + ",";
  return "d" + std::to_string(dataset_id) + "-" + util::hex64(util::fnv1a(canonical));
}

}  // namespace slamhive::dataprep

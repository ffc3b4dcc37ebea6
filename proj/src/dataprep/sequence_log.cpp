#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "slamhive/dataprep.hpp"
#include "slamhive/layout.hpp"
#include "slamhive/util.hpp"

namespace slamhive::dataprep {

namespace fs = std::filesystem;

std::set<std::string> SequenceLog::image_topics() const {
  std::set<std::string> topics;
  for (const auto& m : messages)
    if (m.image) topics.insert(m.topic);
  return topics;
}

std::size_t SequenceLog::count(const std::string& topic) const {
  std::size_t n = 0;
  for (const auto& m : messages)
    if (m.topic == topic) ++n;
  return n;
}

void SequenceLog::validate() const {
  std::map<std::string, double> last;
  for (const auto& m : messages) {
    if (!std::isfinite(m.t)) throw Error(Errc::MalformedLog, "non-finite timestamp on " + m.topic);
    const auto [it, inserted] = last.emplace(m.topic, m.t);
    if (!inserted) {
      if (m.t < it->second) throw Error(Errc::MalformedLog, "timestamps decrease on topic " + m.topic);
      it->second = m.t;
    }
  }
}

SequenceLog read_sequence_log(const fs::path& dir) {
  const auto path = dir / sequence_files::kMessages;
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingDataset, "no message table at " + path.string());
  SequenceLog log;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line_number == 1 || util::trim(line).empty()) continue;  // header
    const auto cells = util::split(line, ',');
    if (cells.size() != 5) {
      throw Error(Errc::MalformedLog, path.string() + ":" + std::to_string(line_number) + ": expected 5 columns");
    }
    Message m;
    const auto t = util::parse_double(cells[0]);
    if (!t) throw Error(Errc::MalformedLog, path.string() + ":" + std::to_string(line_number) + ": bad timestamp");
    m.t = *t;
    m.topic = cells[1];
    if (!util::trim(cells[2]).empty()) {
      const auto w = util::parse_integer(cells[2]);
      const auto h = util::parse_integer(cells[3]);
      if (!w || !h) throw Error(Errc::MalformedLog, path.string() + ":" + std::to_string(line_number) + ": bad image size");
      m.image = ImageDims{static_cast<int>(*w), static_cast<int>(*h)};
    }
    m.blob = util::trim(cells[4]);
    log.messages.push_back(std::move(m));
  }
  log.validate();
  return log;
}

void write_sequence_log(const fs::path& dir, const SequenceLog& log) {
  fs::create_directories(dir);
  std::ostringstream out;
  out << "timestamp,topic,width,height,blob\n";
  for (const auto& m : log.messages) {
    out << util::format_number(m.t) << ',' << m.topic << ',';
    if (m.image) out << m.image->width << ',' << m.image->height;
    else out << ',';
    out << ',' << m.blob << '\n';
  }
  util::write_file(dir / sequence_files::kMessages, out.str());
}

}  // namespace slamhive::dataprep

#include "spheresel/schedule_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "spheresel/error.hpp"

namespace spheresel::eta {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

template <class T>
T parse_number(const std::string& text, const char* what, int line_no) {
  std::istringstream ss(text);
  T value{};
  ss >> value;
  if (ss.fail() || !ss.eof()) {
    throw ConfigError("schedule line " + std::to_string(line_no) + ": bad " + what + " '" +
                      text + "'");
  }
  return value;
}

}  // namespace

void write_schedule_csv(std::ostream& out, const EtaSchedule& schedule,
                        const std::string& comment) {
  schedule.validate();
  if (!comment.empty()) {
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  out << kScheduleHeader << '\n';
  char buf[256];
  for (const auto& e : schedule.entries) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%lld,%.6f,%.17g,", schedule.k, schedule.alpha,
                  e.size, e.eta, e.beta_target);
    out << buf << to_string(e.solver) << '\n';
  }
}

void write_schedule_file(const std::string& path, const EtaSchedule& schedule,
                         const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_schedule_csv(out, schedule, comment);
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

EtaSchedule read_schedule_csv(std::istream& in) {
  EtaSchedule schedule;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kScheduleHeader) {
        throw ConfigError("schedule header must be '" + std::string(kScheduleHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 6) {
      throw ConfigError("schedule line " + std::to_string(line_no) + ": expected 6 fields");
    }
    const auto k = parse_number<long long>(f[0], "k", line_no);
    const auto alpha = parse_number<double>(f[1], "alpha", line_no);
    if (schedule.entries.empty()) {
      schedule.k = k;
      schedule.alpha = alpha;
    } else if (k != schedule.k || alpha != schedule.alpha) {
      throw ConfigError("schedule line " + std::to_string(line_no) + ": k/alpha changed");
    }
    ScheduleEntry e;
    e.size = parse_number<long long>(f[2], "s", line_no);
    e.eta = parse_number<double>(f[3], "eta", line_no);
    e.beta_target = parse_number<double>(f[4], "beta_target", line_no);
    e.solver = solver_kind_from_string(f[5]);
    schedule.entries.push_back(e);
  }
  if (!header_seen) throw ConfigError("schedule file has no header");
  schedule.validate();
  return schedule;
}

EtaSchedule read_schedule_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open schedule '" + path + "'");
  return read_schedule_csv(in);
}

}  // namespace spheresel::eta

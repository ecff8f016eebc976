#include "spheresel/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "spheresel/error.hpp"

namespace spheresel::samplers {

GaussianSampler::GaussianSampler(std::vector<double> means, std::vector<double> variances,
                                 std::uint64_t seed)
    : means_(std::move(means)) {
  if (means_.empty() || means_.size() != variances.size()) {
    throw ConfigError("GaussianSampler: means and variances must be nonempty and equal length");
  }
  sds_.reserve(variances.size());
  streams_.reserve(variances.size());
  for (std::size_t i = 0; i < variances.size(); ++i) {
    if (!(variances[i] >= 0.0) || !std::isfinite(variances[i])) {
      throw ConfigError("GaussianSampler: variances must be finite and >= 0");
    }
    sds_.push_back(std::sqrt(variances[i]));
    streams_.emplace_back(rng::derive_seed(seed, i));
  }
}

double GaussianSampler::draw_one(int system) {
  const auto i = static_cast<std::size_t>(system);
  return means_[i] + sds_[i] * streams_[i].next();
}

PermutedSampler::PermutedSampler(Sampler& inner, std::vector<int> perm)
    : inner_(inner), perm_(std::move(perm)) {
  std::vector<int> sorted = perm_;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != static_cast<int>(i)) throw ConfigError("PermutedSampler: not a permutation");
  }
  if (static_cast<int>(perm_.size()) != inner_.systems()) {
    throw ConfigError("PermutedSampler: permutation size differs from system count");
  }
}

double PermutedSampler::draw_one(int system) {
  return inner_.draw_one(perm_[static_cast<std::size_t>(system)]);
}

RecordingSampler::RecordingSampler(Sampler& inner)
    : inner_(inner), next_index_(static_cast<std::size_t>(inner.systems()), 0) {}

double RecordingSampler::draw_one(int system) {
  const double value = inner_.draw_one(system);
  log_.push_back({system, next_index_[static_cast<std::size_t>(system)]++, value});
  return value;
}

void RecordingSampler::write_csv(std::ostream& out, const std::string& comment) const {
  if (!comment.empty()) {
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
  }
  out << "system_id,index,value\n";
  char buf[96];
  for (const auto& o : log_) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.17g\n", o.system + 1, o.index + 1, o.value);
    out << buf;
  }
}

void RecordingSampler::write_file(const std::string& path, const std::string& comment) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_csv(out, comment);
}

ReplaySampler::ReplaySampler(int systems, const std::vector<Observation>& observations) {
  if (systems < 1) throw ConfigError("ReplaySampler: need at least one system");
  values_.resize(static_cast<std::size_t>(systems));
  cursor_.assign(static_cast<std::size_t>(systems), 0);
  std::vector<std::vector<std::pair<long long, double>>> indexed(values_.size());
  for (const auto& o : observations) {
    if (o.system < 0 || o.system >= systems || o.index < 0) {
      throw ConfigError("ReplaySampler: observation outside the system range");
    }
    indexed[static_cast<std::size_t>(o.system)].emplace_back(o.index, o.value);
  }
  for (std::size_t i = 0; i < indexed.size(); ++i) {
    auto& rows = indexed[i];
    std::sort(rows.begin(), rows.end());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].first != static_cast<long long>(j)) {
        throw ConfigError("ReplaySampler: system " + std::to_string(i + 1) +
                          " has missing or duplicate indices");
      }
      values_[i].push_back(rows[j].second);
    }
  }
}

ReplaySampler ReplaySampler::from_csv(std::istream& in, int systems) {
  std::vector<Observation> obs;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "system_id,index,value") {
        throw ConfigError("replay header must be 'system_id,index,value'");
      }
      header_seen = true;
      continue;
    }
    Observation o;
    int id = 0;
    long long index = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(line);
    ss >> id >> c1 >> index >> c2 >> o.value;
    if (ss.fail() || c1 != ',' || c2 != ',') throw ConfigError("bad replay line '" + line + "'");
    o.system = id - 1;
    o.index = index - 1;
    obs.push_back(o);
  }
  if (!header_seen) throw ConfigError("replay file has no header");
  return ReplaySampler(systems, obs);
}

ReplaySampler ReplaySampler::from_file(const std::string& path, int systems) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open replay file '" + path + "'");
  return from_csv(in, systems);
}

double ReplaySampler::draw_one(int system) {
  const auto i = static_cast<std::size_t>(system);
  if (cursor_[i] >= values_[i].size()) {
    throw std::out_of_range("replay exhausted for system " + std::to_string(system + 1));
  }
  return values_[i][cursor_[i]++];
}

}  // namespace spheresel::samplers

#pragma once

// Schedule table files: CSV with header `k,alpha,s,eta,beta_target,solver`,
// one row per level in descending s. Lines starting with '#' are comments.

#include <iosfwd>
#include <string>

#include "spheresel/eta.hpp"

namespace spheresel::eta {

inline constexpr const char* kScheduleHeader = "k,alpha,s,eta,beta_target,solver";

// η is written with 6 decimals; beta_target with 17 significant digits.
void write_schedule_csv(std::ostream& out, const EtaSchedule& schedule,
                        const std::string& comment = {});
void write_schedule_file(const std::string& path, const EtaSchedule& schedule,
                         const std::string& comment = {});

// Throws ConfigError on malformed input.
EtaSchedule read_schedule_csv(std::istream& in);
EtaSchedule read_schedule_file(const std::string& path);

}  // namespace spheresel::eta

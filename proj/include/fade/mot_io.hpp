#pragma once

#include <string>
#include <vector>

#include "fade/metrics.hpp"

namespace fade {

// MOTChallenge text rows: frame,id,x,y,w,h,conf,class,visibility
// (1-based frames, pixel units, comma-separated).
std::vector<Trajectory> parse_mot(const std::string& path);
void write_mot(const std::vector<Trajectory>& trajectories, const std::string& path);

std::string format_mot(const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> parse_mot_text(const std::string& text, const std::string& origin);

// shortest decimal text that parses back to the same double
std::string fmt_double(double v);

}  // namespace fade

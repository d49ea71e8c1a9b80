// Copyright 2026 The GaitForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitforge/sim.hpp"

namespace gaitforge::sim {

struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Walls are planar segments in mm. Waypoints are optional intermediate
/// targets visited in order before the goal.
struct Maze {
  std::vector<Segment> walls;
  Pose start;
  Vec2 goal;
  double goal_tolerance = 1.0;
  std::vector<Vec2> waypoints;
  double margin = RobotGeometry{}.half_width();
};

class MazeFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline double point_segment_distance(Vec2 p, const Segment& s) {
  const double vx = s.b.x - s.a.x;
  const double vy = s.b.y - s.a.y;
  const double len2 = vx * vx + vy * vy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.x - s.a.x) * vx + (p.y - s.a.y) * vy) / len2, 0.0, 1.0);
  }
  return std::hypot(p.x - (s.a.x + t * vx), p.y - (s.a.y + t * vy));
}

inline bool segments_intersect(const Segment& s, const Segment& t) {
  const double d1 = cross(t.a, t.b, s.a);
  const double d2 = cross(t.a, t.b, s.b);
  const double d3 = cross(s.a, s.b, t.a);
  const double d4 = cross(s.a, s.b, t.b);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace detail

inline double segment_distance(const Segment& s, const Segment& t) {
  if (detail::segments_intersect(s, t)) return 0.0;
  return std::min({detail::point_segment_distance(s.a, t), detail::point_segment_distance(s.b, t),
                   detail::point_segment_distance(t.a, s), detail::point_segment_distance(t.b, s)});
}

/// True iff the body centre moving along p0-p1 comes within the inflation
/// margin of any wall. The inflated boundary itself counts as a collision.
inline bool segment_collides(Vec2 p0, Vec2 p1, const Maze& maze) {
  constexpr double kBoundaryEps = 1e-9;
  const Segment path{p0, p1};
  return std::any_of(maze.walls.begin(), maze.walls.end(), [&](const Segment& w) {
    return segment_distance(path, w) <= maze.margin + kBoundaryEps;
  });
}

inline void validate(const Maze& maze) {
  if (!(maze.goal_tolerance > 0.0)) throw MazeFormatError("goal tolerance must be positive");
  for (const auto& w : maze.walls) {
    if (detail::point_segment_distance(maze.goal, w) <= maze.margin) {
      throw MazeFormatError("goal lies inside an (inflated) wall");
    }
  }
}

/// Line format, units mm:
///   wall x0 y0 x1 y1
///   start x y psi
///   goal x y tol
///   waypoint x y
/// '#' starts a comment.
inline Maze parse_maze(std::istream& in) {
  Maze maze;
  bool have_start = false;
  bool have_goal = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    auto fail = [&](const std::string& what) {
      throw MazeFormatError("maze line " + std::to_string(lineno) + ": " + what);
    };
    if (kind == "wall") {
      Segment s;
      if (!(ls >> s.a.x >> s.a.y >> s.b.x >> s.b.y)) fail("expected 'wall x0 y0 x1 y1'");
      maze.walls.push_back(s);
    } else if (kind == "start") {
      if (!(ls >> maze.start.x >> maze.start.y >> maze.start.psi)) fail("expected 'start x y psi'");
      have_start = true;
    } else if (kind == "goal") {
      if (!(ls >> maze.goal.x >> maze.goal.y >> maze.goal_tolerance)) fail("expected 'goal x y tol'");
      have_goal = true;
    } else if (kind == "waypoint") {
      Vec2 w;
      if (!(ls >> w.x >> w.y)) fail("expected 'waypoint x y'");
      maze.waypoints.push_back(w);
    } else {
      fail("unknown record '" + kind + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing tokens");
  }
  if (!have_start) throw MazeFormatError("maze has no start record");
  if (!have_goal) throw MazeFormatError("maze has no goal record");
  validate(maze);
  return maze;
}

inline Maze load_maze(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MazeFormatError("cannot open maze file " + path);
  return parse_maze(in);
}

}  // namespace gaitforge::sim

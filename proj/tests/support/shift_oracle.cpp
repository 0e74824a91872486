#include "shift_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace oracle {

namespace {

constexpr double kPi = 3.14159265358979323846;

double direction_angle(int dx, int dy) {
  double a = std::atan2(static_cast<double>(dy), static_cast<double>(dx)) * 180.0 / kPi;
  if (a < 0.0) a += 360.0;
  return a;
}

bool is_side(int dx, int dy) { return dx == 0 || dy == 0; }

double angular_distance(double a, double b) {
  double d = std::fabs(a - b);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace

int sector_of(double ox, double oy) {
  const double ax = std::fabs(ox), ay = std::fabs(oy);
  if (ox != 0.0 && oy != 0.0 && ax != ay) {
    double a = std::atan2(oy, ox);
    if (a < 0.0) a += 2.0 * kPi;
    const int s = static_cast<int>(a / (kPi / 4.0));
    return s >= 8 ? 7 : s;
  }
  // Exactly on a sector boundary: resolved by the half-open convention
  // [k*45, (k+1)*45). Worked out by hand per axis/diagonal.
  if (ox == 0.0 && oy == 0.0) return 0;
  if (oy == 0.0) return ox > 0.0 ? 0 : 4;
  if (ox == 0.0) return oy > 0.0 ? 2 : 6;
  if (ox > 0.0) return oy > 0.0 ? 1 : 7;
  return oy > 0.0 ? 3 : 5;
}

std::vector<std::pair<int, int>> ranking_for_sector(int sector) {
  const std::vector<std::pair<int, int>> dirs = {{1, 0},  {1, 1},   {0, 1},  {-1, 1},
                                                 {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  const double low = 45.0 * sector;
  const double high = std::fmod(45.0 * (sector + 1), 360.0);
  const double side_angle = (sector % 2 == 0) ? low : high;
  const double corner_angle = (sector % 2 == 0) ? high : low;
  const double center = 45.0 * sector + 22.5;

  auto dir_at = [&](double angle) {
    for (auto d : dirs) {
      if (angular_distance(direction_angle(d.first, d.second), angle) < 1e-9) return d;
    }
    return std::pair<int, int>{0, 0};
  };

  const auto side = dir_at(side_angle);
  const auto corner = dir_at(corner_angle);
  // the other corner flanking the bounding side
  const double flank1 = std::fmod(side_angle + 45.0, 360.0);
  const double flank2 = std::fmod(side_angle + 315.0, 360.0);
  const auto other_flank =
      angular_distance(flank1, corner_angle) < 1e-9 ? dir_at(flank2) : dir_at(flank1);

  std::vector<std::pair<int, int>> ranked = {side, corner, other_flank};
  std::vector<std::pair<int, int>> rest;
  for (auto d : dirs) {
    if (d != side && d != corner && d != other_flank) rest.push_back(d);
  }
  std::sort(rest.begin(), rest.end(), [&](auto a, auto b) {
    const double da = angular_distance(direction_angle(a.first, a.second), center);
    const double db = angular_distance(direction_angle(b.first, b.second), center);
    if (std::fabs(da - db) > 1e-9) return da < db;
    return is_side(a.first, a.second) && !is_side(b.first, b.second);
  });
  ranked.insert(ranked.end(), rest.begin(), rest.end());
  return ranked;
}

Outcome resolve(long kx, long ky, double d,
                const std::vector<std::pair<double, double>>& positions,
                const std::map<Node, std::vector<int>>& members) {
  Outcome out;
  out.state.assign(positions.size(), State::Kept);
  out.final_node.assign(positions.size(), {0, 0});

  std::set<Node> taken;
  std::vector<Node> conflict_nodes;
  for (const auto& [node, objs] : members) {
    taken.insert(node);
    for (int i : objs) out.final_node[static_cast<std::size_t>(i)] = node;
    if (objs.size() > 1) conflict_nodes.push_back(node);
  }
  std::sort(conflict_nodes.begin(), conflict_nodes.end(),
            [](const Node& a, const Node& b) {
              if (a.second != b.second) return a.second < b.second;
              return a.first < b.first;
            });

  for (const Node& g : conflict_nodes) {
    const double cx = d * static_cast<double>(g.first);
    const double cy = d * static_cast<double>(g.second);

    auto dist = [&](int i) {
      const long double dx =
          static_cast<long double>(positions[static_cast<std::size_t>(i)].first) - cx;
      const long double dy =
          static_cast<long double>(positions[static_cast<std::size_t>(i)].second) - cy;
      return std::sqrt(dx * dx + dy * dy);
    };

    std::vector<int> objs = members.at(g);
    std::sort(objs.begin(), objs.end(), [&](int a, int b) {
      const long double da = dist(a), db = dist(b);
      if (da != db) return da < db;
      return a < b;
    });

    std::vector<Node> free_list;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Node n{g.first + dx, g.second + dy};
        if (n.first < 0 || n.first >= kx || n.second < 0 || n.second >= ky) continue;
        if (!taken.count(n)) free_list.push_back(n);
      }
    }

    for (std::size_t m = 1; m < objs.size(); ++m) {
      const int i = objs[m];
      if (free_list.empty()) {
        out.state[static_cast<std::size_t>(i)] = State::Deleted;
        continue;
      }
      const double ox = positions[static_cast<std::size_t>(i)].first - cx;
      const double oy = positions[static_cast<std::size_t>(i)].second - cy;
      const auto ranking = ranking_for_sector(sector_of(ox, oy));
      Node chosen{-1, -1};
      for (auto [dx, dy] : ranking) {
        const Node n{g.first + dx, g.second + dy};
        if (std::find(free_list.begin(), free_list.end(), n) != free_list.end()) {
          chosen = n;
          break;
        }
      }
      out.state[static_cast<std::size_t>(i)] = State::Shifted;
      out.final_node[static_cast<std::size_t>(i)] = chosen;
      free_list.erase(std::remove(free_list.begin(), free_list.end(), chosen), free_list.end());
      taken.insert(chosen);
    }
  }
  return out;
}

}  // namespace oracle

#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

// Brute-force conflict resolution oracle, written straight from the
// pseudocode with its own data structures. Deliberately naive: distances via
// long double accumulation, sector membership via atan2 with hand-resolved
// half-open boundaries, neighbor rankings derived geometrically at runtime
// instead of a frozen table.
namespace oracle {

using Node = std::pair<long, long>;  // (x, y)

enum class State { Kept, Shifted, Deleted };

struct Outcome {
  std::vector<State> state;      // per object
  std::vector<Node> final_node;  // meaningless for deleted objects
};

// Which 45-degree sector around the node center contains the offset?
int sector_of(double ox, double oy);

// The eight neighbor offsets ranked most-preferred-first for a sector:
// bounding side, bounding corner, the side's other flanking corner, then the
// rest by angular distance from the sector center (sides beat corners on
// ties).
std::vector<std::pair<int, int>> ranking_for_sector(int sector);

// positions: per-object original coordinates. members: node -> object
// indices binned there. Grid nodes are (0..kx-1, 0..ky-1) with centers at
// d * node.
Outcome resolve(long kx, long ky, double d,
                const std::vector<std::pair<double, double>>& positions,
                const std::map<Node, std::vector<int>>& members);

}  // namespace oracle

#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rescuesim::terrain {

/// Regular-grid heightmap. Node (row, col) sits at
/// (origin.x + col * cell_size, origin.y + row * cell_size); heights are
/// bilinearly interpolated inside cells. Immutable after construction.
class TerrainGrid {
 public:
  TerrainGrid(double cell_size, Eigen::Vector2d origin, Eigen::MatrixXd heights);

  double cell_size() const noexcept { return cell_size_; }
  const Eigen::Vector2d& origin() const noexcept { return origin_; }
  const Eigen::MatrixXd& heights() const noexcept { return heights_; }
  Eigen::Index rows() const noexcept { return heights_.rows(); }
  Eigen::Index cols() const noexcept { return heights_.cols(); }

  double min_x() const noexcept { return origin_.x(); }
  double min_y() const noexcept { return origin_.y(); }
  double max_x() const noexcept { return origin_.x() + static_cast<double>(cols() - 1) * cell_size_; }
  double max_y() const noexcept { return origin_.y() + static_cast<double>(rows() - 1) * cell_size_; }

  bool contains(double x, double y) const noexcept;

  bool operator==(const TerrainGrid&) const = default;

 private:
  double cell_size_;
  Eigen::Vector2d origin_;
  Eigen::MatrixXd heights_;
};

/// Bilinear height. Throws BoundsError outside the grid.
double height_at(const TerrainGrid& grid, double x, double y);

/// Surface inclination in degrees, [0, 90), from a central-difference
/// gradient of the interpolated surface (one-sided at the grid border).
double slope_at(const TerrainGrid& grid, double x, double y);

/// Distance along `direction` (unit) from `origin` to the first terrain hit,
/// or nullopt when nothing is hit within `max_range` or the ray leaves the
/// grid first. An origin at or below the surface returns 0.
std::optional<double> raycast(const TerrainGrid& grid, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& direction, double max_range);

// Scenario terrain builders. Layout values are the defaults shipped with the
// scenario files; all lengths in meters.

struct Flat {};
struct Slope {
  double angle_deg = 0.0;
};
struct Stair {
  double rise = 0.0;
  double run = 0.0;
  int count = 0;
};
struct WalledRoom {};

using ScenarioKind = std::variant<Flat, Slope, Stair, WalledRoom>;

struct Layout {
  double cell_size = 0.02;
  double width = 3.0;       // along y
  double approach = 2.0;    // flat run before a slope or stair
  double ramp_run = 2.0;    // horizontal length of a slope
  double landing = 3.0;     // flat run after the top of a slope or stair
  double room_size = 6.0;   // flat / walled room side length
  double wall_height = 1.0;
  double wall_thickness = 0.1;
};

TerrainGrid build_scenario_terrain(const ScenarioKind& kind, const Layout& layout = {});

/// atan(total rise / total run) for a stair; the construction angle for a slope;
/// zero otherwise.
double effective_slope_deg(const ScenarioKind& kind);

// `terrain v1 <rows> <cols> <cell_size> <origin_x> <origin_y>` followed by one
// line of whitespace-separated heights per row (row 0 first).
TerrainGrid read_terrain(std::istream& in);
TerrainGrid load_terrain(const std::string& path);
void write_terrain(std::ostream& out, const TerrainGrid& grid);

}  // namespace rescuesim::terrain

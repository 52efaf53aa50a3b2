#include "rescuesim/terrain.hpp"

#include "rescuesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rescuesim::terrain {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kEdgeTolerance = 1e-9;

// Fractional grid coordinate, snapped onto a node when within rounding noise
// so that node queries return the stored height exactly.
double grid_coord(double value, double origin, double cell) {
  const double f = (value - origin) / cell;
  const double r = std::round(f);
  return std::abs(f - r) < 1e-9 ? r : f;
}

struct CellIndex {
  Eigen::Index i0;
  double t;
};

CellIndex locate(double f, Eigen::Index n) {
  auto i0 = static_cast<Eigen::Index>(std::floor(f));
  i0 = std::clamp<Eigen::Index>(i0, 0, n - 2);
  return {i0, f - static_cast<double>(i0)};
}

std::string fmt_point(double x, double y) {
  std::ostringstream s;
  s << "(" << x << ", " << y << ")";
  return s.str();
}

}  // namespace

TerrainGrid::TerrainGrid(double cell_size, Eigen::Vector2d origin, Eigen::MatrixXd heights)
    : cell_size_(cell_size), origin_(std::move(origin)), heights_(std::move(heights)) {
  if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_)) {
    throw ValidationError("terrain cell_size must be positive and finite");
  }
  if (!origin_.allFinite()) throw ValidationError("terrain origin must be finite");
  if (heights_.rows() < 2 || heights_.cols() < 2) {
    throw ValidationError("terrain needs at least 2x2 nodes");
  }
  if (!heights_.allFinite()) throw ValidationError("terrain heights must be finite");
}

bool TerrainGrid::contains(double x, double y) const noexcept {
  return x >= min_x() - kEdgeTolerance && x <= max_x() + kEdgeTolerance &&
         y >= min_y() - kEdgeTolerance && y <= max_y() + kEdgeTolerance;
}

double height_at(const TerrainGrid& grid, double x, double y) {
  if (!grid.contains(x, y)) {
    throw BoundsError("terrain query out of bounds at " + fmt_point(x, y));
  }
  const double cell = grid.cell_size();
  const auto cx = locate(grid_coord(x, grid.min_x(), cell), grid.cols());
  const auto cy = locate(grid_coord(y, grid.min_y(), cell), grid.rows());
  const auto& h = grid.heights();
  const double tx = std::clamp(cx.t, 0.0, 1.0);
  const double ty = std::clamp(cy.t, 0.0, 1.0);
  const double h00 = h(cy.i0, cx.i0);
  const double h01 = h(cy.i0, cx.i0 + 1);
  const double h10 = h(cy.i0 + 1, cx.i0);
  const double h11 = h(cy.i0 + 1, cx.i0 + 1);
  return (1.0 - ty) * ((1.0 - tx) * h00 + tx * h01) + ty * ((1.0 - tx) * h10 + tx * h11);
}

double slope_at(const TerrainGrid& grid, double x, double y) {
  if (!grid.contains(x, y)) {
    throw BoundsError("slope query out of bounds at " + fmt_point(x, y));
  }
  const double e = 0.5 * grid.cell_size();
  const double x0 = std::max(x - e, grid.min_x());
  const double x1 = std::min(x + e, grid.max_x());
  const double y0 = std::max(y - e, grid.min_y());
  const double y1 = std::min(y + e, grid.max_y());
  const double gx = (height_at(grid, x1, y) - height_at(grid, x0, y)) / (x1 - x0);
  const double gy = (height_at(grid, x, y1) - height_at(grid, x, y0)) / (y1 - y0);
  return std::atan(std::hypot(gx, gy)) / kDeg;
}

std::optional<double> raycast(const TerrainGrid& grid, const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& direction, double max_range) {
  if (!(max_range > 0.0)) throw ValidationError("raycast max_range must be positive");
  if (std::abs(direction.norm() - 1.0) > 1e-6) {
    throw ValidationError("raycast direction must be a unit vector");
  }
  auto clearance = [&](double t) -> std::optional<double> {
    const Eigen::Vector3d p = origin + t * direction;
    if (!grid.contains(p.x(), p.y())) return std::nullopt;
    return p.z() - height_at(grid, p.x(), p.y());
  };

  const auto c0 = clearance(0.0);
  if (!c0) return std::nullopt;
  if (*c0 <= 0.0) return 0.0;

  const double step = 0.25 * grid.cell_size();
  double t_prev = 0.0;
  while (t_prev < max_range) {
    const double t = std::min(t_prev + step, max_range);
    const auto c = clearance(t);
    if (!c) return std::nullopt;
    if (*c <= 0.0) {
      double lo = t_prev;
      double hi = t;
      while (hi - lo > 1e-7) {
        const double mid = 0.5 * (lo + hi);
        // Both ends are inside the grid, so the midpoint is too.
        if (*clearance(mid) <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      return hi;
    }
    t_prev = t;
  }
  return std::nullopt;
}

namespace {

Eigen::Index node_count(double length, double cell) {
  return static_cast<Eigen::Index>(std::lround(length / cell)) + 1;
}

template <typename HeightFn>
TerrainGrid make_grid(double length, double width, double cell, HeightFn&& fn) {
  const Eigen::Index cols = node_count(length, cell);
  const Eigen::Index rows = node_count(width, cell);
  Eigen::MatrixXd h(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      h(r, c) = fn(r, c);
    }
  }
  return TerrainGrid(cell, Eigen::Vector2d::Zero(), std::move(h));
}

void validate_layout(const Layout& l) {
  if (!(l.cell_size > 0.0) || !(l.width > 0.0) || !(l.approach >= 0.0) ||
      !(l.ramp_run > 0.0) || !(l.landing > 0.0) || !(l.room_size > 0.0) ||
      !(l.wall_height >= 0.0) || !(l.wall_thickness > 0.0)) {
    throw ValidationError("invalid terrain layout parameters");
  }
}

}  // namespace

TerrainGrid build_scenario_terrain(const ScenarioKind& kind, const Layout& layout) {
  validate_layout(layout);
  const double cell = layout.cell_size;

  if (std::holds_alternative<Flat>(kind)) {
    return make_grid(layout.room_size, layout.room_size, cell,
                     [](Eigen::Index, Eigen::Index) { return 0.0; });
  }

  if (std::holds_alternative<WalledRoom>(kind)) {
    const double size = layout.room_size;
    const double wall = layout.wall_thickness;
    return make_grid(size, size, cell, [&](Eigen::Index r, Eigen::Index c) {
      const double x = static_cast<double>(c) * cell;
      const double y = static_cast<double>(r) * cell;
      const bool in_wall = x < wall || y < wall || x > size - wall || y > size - wall;
      return in_wall ? layout.wall_height : 0.0;
    });
  }

  if (const auto* s = std::get_if<Slope>(&kind)) {
    if (!(s->angle_deg > 0.0 && s->angle_deg < 90.0)) {
      throw ValidationError("slope angle must be in (0, 90) degrees");
    }
    const double grade = std::tan(s->angle_deg * kDeg);
    const double length = layout.approach + layout.ramp_run + layout.landing;
    return make_grid(length, layout.width, cell, [&](Eigen::Index, Eigen::Index c) {
      const double x = static_cast<double>(c) * cell;
      return std::clamp(x - layout.approach, 0.0, layout.ramp_run) * grade;
    });
  }

  const auto& st = std::get<Stair>(kind);
  if (!(st.rise > 0.0) || !(st.run > 0.0) || st.count < 1) {
    throw ValidationError("stair needs rise > 0, run > 0 and count >= 1");
  }
  const double length = layout.approach + static_cast<double>(st.count) * st.run + layout.landing;
  return make_grid(length, layout.width, cell, [&](Eigen::Index, Eigen::Index c) {
    const double x = static_cast<double>(c) * cell;
    // Riser k sits at approach + k * run; the tread after it is at (k + 1) * rise.
    const double steps = std::floor((x - layout.approach) / st.run + 1e-9) + 1.0;
    return std::clamp(steps, 0.0, static_cast<double>(st.count)) * st.rise;
  });
}

double effective_slope_deg(const ScenarioKind& kind) {
  if (const auto* s = std::get_if<Slope>(&kind)) return s->angle_deg;
  if (const auto* st = std::get_if<Stair>(&kind)) {
    const double total_rise = st->rise * st->count;
    const double total_run = st->run * st->count;
    return std::atan(total_rise / total_run) / kDeg;
  }
  return 0.0;
}

TerrainGrid read_terrain(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("missing terrain header", "");
  std::istringstream hs(header);
  std::string magic, version;
  long rows = 0, cols = 0;
  double cell = 0.0, ox = 0.0, oy = 0.0;
  if (!(hs >> magic >> version >> rows >> cols >> cell >> ox >> oy) || magic != "terrain" ||
      version != "v1") {
    throw ParseError("bad terrain header", header);
  }
  if (rows < 2 || cols < 2) throw ParseError("terrain needs at least 2x2 nodes", header);

  Eigen::MatrixXd h(rows, cols);
  std::string line;
  for (long r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw ParseError("terrain has fewer rows than declared", std::to_string(r));
    }
    std::istringstream ls(line);
    for (long c = 0; c < cols; ++c) {
      if (!(ls >> h(r, c))) throw ParseError("terrain row is short", line);
    }
    std::string extra;
    if (ls >> extra) throw ParseError("terrain row is long", line);
  }
  return TerrainGrid(cell, Eigen::Vector2d(ox, oy), std::move(h));
}

TerrainGrid load_terrain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open terrain file " + path);
  return read_terrain(in);
}

void write_terrain(std::ostream& out, const TerrainGrid& grid) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "terrain v1 " << grid.rows() << ' ' << grid.cols() << ' ' << grid.cell_size() << ' '
      << grid.origin().x() << ' ' << grid.origin().y() << '\n';
  const auto& h = grid.heights();
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      if (c) out << ' ';
      out << h(r, c);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace rescuesim::terrain

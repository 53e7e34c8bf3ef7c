#include "ctbc/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ctbc/rng.hpp"

namespace ctbc {

StairParams stair_params(double level) {
  if (!(level >= 0.0 && level <= 9.0))
    throw std::out_of_range("stair_params: level must be in [0, 9]");
  StairParams p;
  p.step_height = 0.08 + level * (0.12 / 9.0);
  p.step_width = 0.50 - level * (0.22 / 9.0);
  return p;
}

double Profile::height_at(double x, bool* clamped) const {
  if (clamped) *clamped = false;
  if (segments.empty()) return 0.0;
  if (x < x_min()) {
    if (clamped) *clamped = true;
    return segments.front().h0;
  }
  if (x >= x_max()) {
    if (clamped) *clamped = x > x_max();
    return segments.back().h1;
  }
  // binary search for the segment with x in [x0, x1)
  size_t lo = 0, hi = segments.size() - 1;
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (x < segments[mid].x1 && x >= segments[mid].x0) { lo = hi = mid; break; }
    if (x >= segments[mid].x1) lo = mid + 1; else hi = mid;
  }
  const ProfileSegment& s = segments[lo];
  if (s.x1 == s.x0) return s.h1;
  const double t = (x - s.x0) / (s.x1 - s.x0);
  return s.h0 + t * (s.h1 - s.h0);
}

namespace {
// closest point on segment (ax,az)-(bx,bz) to (px,pz)
inline void closest_on_segment(double ax, double az, double bx, double bz,
                               double px, double pz, SurfacePoint& best) {
  const double dx = bx - ax, dz = bz - az;
  const double len2 = dx * dx + dz * dz;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - ax) * dx + (pz - az) * dz) / len2, 0.0, 1.0);
  const double cx = ax + t * dx, cz = az + t * dz;
  const double d = std::hypot(px - cx, pz - cz);
  if (!best.valid || d < best.dist) {
    best.valid = true;
    best.x = cx;
    best.z = cz;
    best.dist = d;
  }
}
}  // namespace

SurfacePoint closest_surface_point(const Profile& profile, double px, double pz,
                                   double radius) {
  SurfacePoint best;
  const double lo = px - radius, hi = px + radius;
  double prev_h = profile.segments.empty() ? 0.0 : profile.segments.front().h0;
  for (size_t i = 0; i < profile.segments.size(); ++i) {
    const ProfileSegment& s = profile.segments[i];
    if (s.x1 < lo) { prev_h = s.h1; continue; }
    if (s.x0 > hi) break;
    // vertical face between previous segment end and this start
    if (i > 0 && std::abs(s.h0 - prev_h) > 1e-12)
      closest_on_segment(s.x0, prev_h, s.x0, s.h0, px, pz, best);
    closest_on_segment(s.x0, s.h0, s.x1, s.h1, px, pz, best);
    prev_h = s.h1;
  }
  return best;
}

double TerrainGrid::height_at(int col, double x, bool* clamped) const {
  if (col < 0) col = 0;
  if (col >= int(columns.size())) col = int(columns.size()) - 1;
  return columns[col].height_at(x, clamped);
}

std::vector<double> TerrainGrid::query_profile(int col, double x0, double x1, int n) const {
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = x0 + (x1 - x0) * (n <= 1 ? 0.0 : double(i) / (n - 1));
    out.push_back(height_at(col, x));
  }
  return out;
}

namespace {

void append_flat(Profile& p, double x0, double x1, double h) {
  if (x1 > x0) p.segments.push_back({x0, x1, h, h});
}

// One curriculum cell appended to a column profile; returns end height.
double append_cell(Profile& p, CellType type, int level, double x0,
                   double h0, const GridSpec& spec, Rng& rng) {
  const double x1 = x0 + spec.cell_size;
  switch (type) {
    case CellType::SmoothSlope: {
      const double grade = (spec.slope_deg_min +
                            (spec.slope_deg_max - spec.slope_deg_min) * level / 9.0) *
                           M_PI / 180.0;
      const double h1 = h0 + spec.cell_size * std::tan(grade);
      p.segments.push_back({x0, x1, h0, h1});
      return h1;
    }
    case CellType::RoughSlope: {
      const double grade = (spec.slope_deg_min +
                            (spec.slope_deg_max - spec.slope_deg_min) * level / 9.0) *
                           M_PI / 180.0;
      const double amp = spec.rough_noise_min +
                         (spec.rough_noise_max - spec.rough_noise_min) * level / 9.0;
      const double slope = std::tan(grade);
      const int n = std::max(1, int(std::round(spec.cell_size / spec.sample_ds)));
      double hx = h0;
      for (int i = 0; i < n; ++i) {
        const double xa = x0 + spec.cell_size * i / n;
        const double xb = x0 + spec.cell_size * (i + 1) / n;
        double hb = h0 + slope * (xb - x0);
        if (i + 1 < n) hb += rng.uniform(-amp, amp);
        p.segments.push_back({xa, xb, hx, hb});
        hx = hb;
      }
      return hx;
    }
    case CellType::Stairs: {
      const StairParams sp = stair_params(level);
      double x = x0, h = h0;
      // leading tread, then riser + tread repeated to the cell edge
      double next_riser = x0 + sp.step_width;
      while (next_riser < x1 - 1e-9) {
        append_flat(p, x, next_riser, h);
        x = next_riser;
        h += sp.step_height;  // exact vertical face
        next_riser += sp.step_width;
      }
      append_flat(p, x, x1, h);
      return h;
    }
    case CellType::Discrete: {
      const StairParams sp = stair_params(level);
      // two raised blocks and one pit per cell
      const double block_h = rng.uniform(0.3, 0.5) * sp.step_height;
      const double pit_d = rng.uniform(0.5, 1.0) * spec.pit_depth_max;
      const double bw1 = rng.uniform(0.12, 0.22);
      const double bw2 = rng.uniform(0.12, 0.22);
      const double pw = rng.uniform(0.15, 0.25);
      double x = x0;
      append_flat(p, x, x0 + 0.10, h0);
      x = x0 + 0.10;
      append_flat(p, x, x + bw1, h0 + block_h);
      x += bw1;
      append_flat(p, x, x + 0.08, h0);
      x += 0.08;
      append_flat(p, x, x + pw, h0 - pit_d);
      x += pw;
      append_flat(p, x, x + 0.08, h0);
      x += 0.08;
      append_flat(p, x, std::min(x + bw2, x1), h0 + block_h);
      x = std::min(x + bw2, x1);
      append_flat(p, x, x1, h0);
      return h0;
    }
  }
  return h0;
}

}  // namespace

TerrainGrid generate(uint64_t seed, const GridSpec& spec) {
  TerrainGrid g;
  g.spec = spec;
  g.col_types.resize(spec.n_cols);
  // 1 smooth slope, 1 rough slope, 6 stairs, 2 discrete (10-column layout);
  // other sizes keep the same proportions by truncation.
  for (int c = 0; c < spec.n_cols; ++c) {
    CellType t = CellType::Stairs;
    if (!spec.stairs_only) {
      if (c == 0) t = CellType::SmoothSlope;
      else if (c == 1) t = CellType::RoughSlope;
      else if (c >= spec.n_cols - 2) t = CellType::Discrete;
    }
    g.col_types[c] = t;
  }
  Rng root(seed);
  g.columns.resize(spec.n_cols);
  for (int c = 0; c < spec.n_cols; ++c) {
    Rng col_rng = root.spawn(uint64_t(c) + 1);
    Profile& p = g.columns[c];
    double h = 0.0;
    for (int r = 0; r < spec.n_rows; ++r)
      h = append_cell(p, g.col_types[c], r, r * spec.cell_size, h, spec, col_rng);
  }
  const int n_samples = int(std::floor(spec.n_rows * spec.cell_size / spec.sample_ds)) + 1;
  g.heights.assign(spec.n_cols, std::vector<double>(n_samples, 0.0));
  for (int c = 0; c < spec.n_cols; ++c)
    for (int i = 0; i < n_samples; ++i)
      g.heights[c][i] = g.columns[c].height_at(i * spec.sample_ds);
  return g;
}

void TerrainGrid::export_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("terrain: cannot write " + path);
  out.precision(9);
  for (const auto& row : heights) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

void TerrainGrid::export_pgm(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("terrain: cannot write " + path);
  double lo = 1e30, hi = -1e30;
  for (const auto& row : heights)
    for (double h : row) { lo = std::min(lo, h); hi = std::max(hi, h); }
  const double span = (hi > lo) ? hi - lo : 1.0;
  const int w = int(heights.front().size()), h = int(heights.size());
  out << "P5\n" << w << " " << h << "\n65535\n";
  for (const auto& row : heights)
    for (double v : row) {
      const uint16_t g = uint16_t(std::lround((v - lo) / span * 65535.0));
      const unsigned char bytes[2] = {(unsigned char)(g >> 8), (unsigned char)(g & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 2);
    }
}

Profile make_flat_profile(double length) {
  Profile p;
  p.segments.push_back({0.0, length, 0.0, 0.0});
  return p;
}

Profile make_stairs_profile(double approach, double step_h, double step_w,
                            int n_steps, double runout) {
  Profile p;
  double x = 0.0, h = 0.0;
  append_flat(p, x, approach, h);
  x = approach;
  for (int i = 0; i < n_steps; ++i) {
    h += step_h;
    append_flat(p, x, x + step_w, h);
    x += step_w;
  }
  append_flat(p, x, x + runout, h);
  return p;
}

Profile make_pit_profile(double approach, double depth, double width, double runout) {
  Profile p;
  append_flat(p, 0.0, approach, 0.0);
  append_flat(p, approach, approach + width, -depth);
  append_flat(p, approach + width, approach + width + runout, 0.0);
  return p;
}

}  // namespace ctbc

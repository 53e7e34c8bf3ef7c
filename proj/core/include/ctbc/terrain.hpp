#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctbc {

enum class CellType { SmoothSlope, RoughSlope, Stairs, Discrete };

struct StairParams {
  double step_height = 0.0;  // m
  double step_width = 0.0;   // m
};

// Linear stair difficulty map: level 0 -> (0.08, 0.50), level 9 -> (0.20, 0.28).
// Throws std::out_of_range outside [0, 9].
StairParams stair_params(double level);

// Piecewise-linear height profile along x. Consecutive segments share their
// x boundary; a height mismatch there is an exact vertical face (stair riser).
struct ProfileSegment {
  double x0 = 0.0, x1 = 0.0;  // [x0, x1)
  double h0 = 0.0, h1 = 0.0;  // heights at x0 and x1
};

struct Profile {
  std::vector<ProfileSegment> segments;  // x-sorted, contiguous
  double x_min() const { return segments.front().x0; }
  double x_max() const { return segments.back().x1; }
  // Piecewise evaluation, exact vertical faces (a riser belongs to the
  // segment on its right). Out-of-range x is clamped; *clamped set if given.
  double height_at(double x, bool* clamped = nullptr) const;
};

// Closest point on the surface polyline (treads plus vertical riser faces)
// to (px, pz), searched within [px - radius, px + radius].
struct SurfacePoint {
  double x = 0.0, z = 0.0;
  double dist = 0.0;
  bool valid = false;
};
SurfacePoint closest_surface_point(const Profile& profile, double px, double pz,
                                   double radius);

struct GridSpec {
  int n_cols = 10;
  int n_rows = 10;
  double cell_size = 0.8;    // m per cell edge
  double sample_ds = 0.05;   // m lattice spacing for the exported heightfield
  bool stairs_only = false;  // replace every column with stairs (curriculum preset)
  double slope_deg_min = 5.0, slope_deg_max = 20.0;
  double rough_noise_min = 0.01, rough_noise_max = 0.05;  // m
  double pit_depth_max = 0.10;  // m, discrete-obstacle pits
};

// 10x10 curriculum grid. Each column is one terrain type; rows stack along x
// with difficulty = row index (level 0..9). Column layout: 1 smooth slope,
// 1 rough slope, 6 stairs, 2 discrete.
struct TerrainGrid {
  GridSpec spec;
  std::vector<CellType> col_types;          // size n_cols
  std::vector<Profile> columns;             // per-column profile, x in [0, n_rows*cell]
  std::vector<std::vector<double>> heights; // [col][sample], lattice sample_ds

  double height_at(int col, double x, bool* clamped = nullptr) const;
  std::vector<double> query_profile(int col, double x0, double x1, int n) const;

  // Start x of a level's cell and the level of an x position.
  double cell_start(int level) const { return level * spec.cell_size; }

  void export_csv(const std::string& path) const;
  void export_pgm(const std::string& path) const;  // 16-bit grayscale
};

// Deterministic in (seed, spec).
TerrainGrid generate(uint64_t seed, const GridSpec& spec);

// Standalone evaluation profiles.
Profile make_flat_profile(double length);
// Flat approach, then n_steps risers of step_h spaced step_w, then flat runout.
Profile make_stairs_profile(double approach, double step_h, double step_w,
                            int n_steps, double runout);
// Flat approach, pit of given depth/width, flat runout.
Profile make_pit_profile(double approach, double depth, double width, double runout);

}  // namespace ctbc

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spd/dfg.hpp"
#include "spd/sim.hpp"

namespace spd {

// D2Q9 direction i has velocity (kCx[i], kCy[i]); y grows with the row index.
inline constexpr int kCx[9] = {0, 1, 0, -1, 0, 1, -1, -1, 1};
inline constexpr int kCy[9] = {0, 0, 1, 0, -1, 1, 1, -1, -1};
inline constexpr int kOpposite[9] = {0, 3, 4, 1, 2, 7, 8, 5, 6};

enum CellTag : std::uint32_t { kInterior = 0, kWall = 1, kInlet = 2, kOutlet = 3 };

struct CorpusFile {
  std::string file;
  std::string source;
};

/// SPD sources of the worked examples and the LBM kernel family for a grid
/// `width` cells wide. The shipped corpus/ directory is build_corpus(720).
std::vector<CorpusFile> build_corpus(int width = 720);
ModuleLibrary corpus_library(int width = 720);

/// Name of the top design with n lanes and m cascaded PEs.
std::string lbm_top_name(int n, int m);
/// Declared delay of the translation stage for n lanes.
std::int64_t trans_delay(int width, int n);

using Cell = std::array<float, 9>;

struct LbmGrid {
  int width = 0, height = 0;
  std::vector<Cell> f;  // row-major, index y * width + x
  std::vector<std::uint32_t> tag;
  float one_tau = 1.0f, rho_in = 1.0f, rho_out = 1.0f;

  std::size_t cells() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool operator==(const LbmGrid&) const = default;
};

enum class Topology {
  Streamed,  // neighbours taken along the row-major stream; off-stream taps read 0
  Periodic,  // torus
};

/// Collision stage of one cell, evaluated in the kernel's operation order.
Cell lbm_collide(const Cell& f, float one_tau);
/// Boundary stage of one cell.
Cell lbm_boundary(const Cell& f, std::uint32_t tag, float rho_in, float rho_out);

LbmGrid lbm_step(const LbmGrid& g, Topology topo = Topology::Streamed);
LbmGrid lbm_oracle(const LbmGrid& g, int steps, Topology topo = Topology::Streamed);

/// Uniform state whose cells are a bitwise fixed point of lbm_collide.
LbmGrid lbm_equilibrium_grid(int width, int height, float rho, float ux, float uy, float one_tau);
/// Channel test case: walls on the first/last row, inlet on the first column,
/// outlet on the last, deterministic perturbation of a resting fluid.
LbmGrid lbm_channel_grid(int width, int height);
/// Same perturbed state with interior tags only.
LbmGrid lbm_interior_grid(int width, int height);

/// Total mass (sum of all distributions) with compensated summation.
double lbm_mass(const LbmGrid& g);

StreamSet lbm_to_streams(const LbmGrid& g, int n);
/// Rebuilds a grid from kernel outputs; geometry and constants come from `like`.
LbmGrid lbm_from_streams(const StreamSet& out, const LbmGrid& like, int n);

struct VerifyReport {
  bool pass = false;
  int passes = 0;
  std::uint64_t cycles = 0;
  // First mismatch when !pass.
  int step = -1;
  std::size_t cell = 0;
  std::string field;
  std::string message;
};

/// Simulates the (n, m) top from `lib` for `steps` time steps (steps / m
/// passes) and compares every pass bit-exactly with the streamed oracle.
VerifyReport verify_kernel(const ModuleLibrary& lib, int n, int m, const LbmGrid& grid, int steps);

}  // namespace spd

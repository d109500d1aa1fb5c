#pragma once
// binary persistence for realized noise paths. the data file is a fixed
// little-endian header {dim, K, dt, n_steps, n_modes, seed} followed by the
// raw N(0, dt) increments in mode-major order (all steps of stream 0, then
// stream 1, ...); a JSON sidecar <file>.json records the amplitude rule and
// the path's time origin, everything needed to rebuild the basis and to
// extend reads past the stored horizon from the generator.

#include <cstdint>
#include <string>

#include "spde/noise.hpp"

namespace spde {

// write increments for relative steps [0, n_steps) of every stream;
// n_steps <= 0 means the path's advertised horizon
void write_path(const NoisePath& path, const std::string& file, std::int64_t n_steps = 0);

// rebuild the path from file + sidecar. reads inside the stored horizon are
// served from the buffer, reads beyond fall back to the counter generator;
// for files produced by write_path the two agree bitwise.
NoisePath load_path(const std::string& file);

}  // namespace spde

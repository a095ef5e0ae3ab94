#pragma once

/// @file snapshot_io.hpp
/// @brief Binary field snapshots and trajectory sidecars.
///
/// Record layout, all little-endian:
///   magic "NSSTSNP1" | f64 L | u32 dim | u32 N | u32 components | f64 time |
///   u32 role | u32 mean count | f64 mean[...] |
///   f64 samples[components * N^dim] (physical space, component-major, x1 fastest) |
///   u32 crc32 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nsstab/ns_integrator.hpp"
#include "nsstab/spectral_field.hpp"

namespace nsstab {

/// A snapshot failed its checksum or is structurally damaged.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

std::vector<std::uint8_t> encode_state(const FlowState& state);
FlowState decode_state(const std::vector<std::uint8_t>& bytes);

void write_state(const std::filesystem::path& path, const FlowState& state);
FlowState read_state(const std::filesystem::path& path);

/// Field without a role or mean (stored as role full3d/base2d by dimension, no mean).
void write_field(const std::filesystem::path& path, const SpectralField& field, double time);
SpectralField read_field(const std::filesystem::path& path, double* time = nullptr);

/// snapshots/NNNN.snap for every stored state plus trajectory.json with times,
/// means and the norm series.
void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj);

/// Writes bytes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace nsstab

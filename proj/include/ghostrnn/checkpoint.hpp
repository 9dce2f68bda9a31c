#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "ghostrnn/trainer.hpp"

namespace ghostrnn {

/// Checkpoint layout, all integers little-endian:
///
///   "GIRNN01\n"
///   u32 line count, then per line: u32 byte length + UTF-8 "key=value"
///   per parameter block in zip_parameters order:
///     u64 element count + that many f32 values, row-major
///
/// Parameters are narrowed to 32-bit floats on save.
inline constexpr std::string_view kCheckpointMagic = "GIRNN01\n";

struct Checkpoint {
    GiRnnModel model;
    std::map<std::string, std::string> metadata;
};

std::string encode_checkpoint(const GiRnnModel& model,
                              const std::map<std::string, std::string>& extra = {});
Checkpoint decode_checkpoint(std::string_view bytes);

/// Speckle file: "GISPK01\n", the same metadata block (seed, distribution,
/// prng, height, width, count), then u64 element count + f32 values with
/// patterns back to back, each row-major.
inline constexpr std::string_view kSpeckleMagic = "GISPK01\n";

std::string encode_speckles(const SpeckleSequence& speckles);
SpeckleSequence decode_speckles(std::string_view bytes);
void save_speckles(const std::filesystem::path& path, const SpeckleSequence& speckles);
SpeckleSequence load_speckles(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const GiRnnModel& model,
                     const std::map<std::string, std::string>& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ghostrnn

#pragma once

// Binary parameter checkpoints.
//
// Layout (all integers and floats little-endian):
//   char[4]  magic      "STWR" (Siamese encoder) or "DSSM" (baseline)
//   u32      version    = 1
//   u32      vocab, hidden, output
//   f32[]    tensors in declaration order, row-major
// A DSSM checkpoint stores the query tower's tensors followed by the item tower's.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "semret/encoder.hpp"

namespace semret::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write(std::ostream& out, const encoder::EncoderParams& params);
void write(std::ostream& out, const encoder::DssmParams& params);
encoder::EncoderParams read_encoder(std::istream& in);
encoder::DssmParams read_dssm(std::istream& in);

void save(const std::filesystem::path& path, const encoder::EncoderParams& params);
void save(const std::filesystem::path& path, const encoder::DssmParams& params);
encoder::EncoderParams load_encoder(const std::filesystem::path& path);
encoder::DssmParams load_dssm(const std::filesystem::path& path);

/// Model version tag: "stwr-" or "dssm-" followed by the fnv1a64 of the
/// serialized checkpoint in hex.
std::string digest(const encoder::EncoderParams& params);
std::string digest(const encoder::DssmParams& params);

/// Rounds every tensor through f32, i.e. what a save/load cycle produces.
encoder::EncoderParams quantized(encoder::EncoderParams params);
encoder::DssmParams quantized(encoder::DssmParams params);

}  // namespace semret::checkpoint

#include "semret/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semret/binary_io.hpp"

namespace semret::checkpoint {

using encoder::DssmParams;
using encoder::EncoderParams;
using encoder::EncoderShape;

namespace {

constexpr std::array<char, 4> kEncoderMagic{'S', 'T', 'W', 'R'};
constexpr std::array<char, 4> kDssmMagic{'D', 'S', 'S', 'M'};

void write_header(std::ostream& out, const std::array<char, 4>& magic, const EncoderShape& s) {
  out.write(magic.data(), 4);
  binio::write_u32(out, kFormatVersion);
  binio::write_u32(out, s.vocab);
  binio::write_u32(out, s.hidden);
  binio::write_u32(out, s.output);
}

EncoderShape read_header(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  in.read(got.data(), 4);
  if (!in || got != magic)
    throw FormatError("bad checkpoint magic, expected " + std::string(magic.data(), 4));
  const auto version = binio::read_u32(in);
  if (version != kFormatVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  EncoderShape s;
  s.vocab = binio::read_u32(in);
  s.hidden = binio::read_u32(in);
  s.output = binio::read_u32(in);
  if (s.vocab < 2 || s.hidden == 0 || s.output == 0) throw FormatError("invalid checkpoint shape");
  return s;
}

void write_tensors(std::ostream& out, const EncoderParams& p) {
  p.visit_tensors([&](std::string_view, std::span<const double> t) {
    for (double v : t) binio::write_f32(out, static_cast<float>(v));
  });
}

EncoderParams read_tensors(std::istream& in, const EncoderShape& shape) {
  auto p = EncoderParams::zeros(shape);
  p.visit_tensors([&](std::string_view name, std::span<double> t) {
    for (auto& v : t) v = binio::read_f32(in);
    if (!in) throw FormatError("truncated checkpoint in tensor " + std::string(name));
  });
  return p;
}

template <class Params>
std::string serialized(const Params& p) {
  std::ostringstream os(std::ios::binary);
  write(os, p);
  return std::move(os).str();
}

std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
    v >>= 4;
  }
  return s;
}

void quantize(EncoderParams& p) {
  p.visit_tensors([](std::string_view, std::span<double> t) {
    for (auto& v : t) v = static_cast<double>(static_cast<float>(v));
  });
}

}  // namespace

void write(std::ostream& out, const EncoderParams& params) {
  write_header(out, kEncoderMagic, params.shape);
  write_tensors(out, params);
}

void write(std::ostream& out, const DssmParams& params) {
  if (!(params.query_tower.shape == params.item_tower.shape))
    throw encoder::ShapeError("DSSM towers must share one shape");
  write_header(out, kDssmMagic, params.query_tower.shape);
  write_tensors(out, params.query_tower);
  write_tensors(out, params.item_tower);
}

EncoderParams read_encoder(std::istream& in) {
  const auto shape = read_header(in, kEncoderMagic);
  auto p = read_tensors(in, shape);
  p.validate();
  return p;
}

DssmParams read_dssm(std::istream& in) {
  const auto shape = read_header(in, kDssmMagic);
  DssmParams p;
  p.query_tower = read_tensors(in, shape);
  p.item_tower = read_tensors(in, shape);
  p.query_tower.validate();
  p.item_tower.validate();
  return p;
}

void save(const std::filesystem::path& path, const EncoderParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(out, params);
}

void save(const std::filesystem::path& path, const DssmParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(out, params);
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_encoder(in);
}

DssmParams load_dssm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_dssm(in);
}

std::string digest(const EncoderParams& params) {
  return "stwr-" + hex64(fnv1a64(serialized(params)));
}

std::string digest(const DssmParams& params) {
  return "dssm-" + hex64(fnv1a64(serialized(params)));
}

EncoderParams quantized(EncoderParams params) {
  quantize(params);
  return params;
}

DssmParams quantized(DssmParams params) {
  quantize(params.query_tower);
  quantize(params.item_tower);
  return params;
}

}  // namespace semret::checkpoint

#include "semret/embedding_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "semret/binary_io.hpp"

namespace semret::index {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'M', 'B', '1'};

std::filesystem::path sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

}  // namespace

void write_embeddings(std::ostream& out, std::uint32_t dim, const std::vector<EmbeddingRecord>& records,
                      const std::string& model_version) {
  out.write(kMagic.data(), 4);
  binio::write_u32(out, kEmbeddingFormatVersion);
  binio::write_u32(out, dim);
  binio::write_u64(out, records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dim) throw std::invalid_argument("record " + std::to_string(r.id) + " has wrong dimension");
    binio::write_u64(out, r.id);
    for (float v : r.vector) binio::write_f32(out, v);
  }
  binio::write_u32(out, static_cast<std::uint32_t>(model_version.size()));
  out.write(model_version.data(), static_cast<std::streamsize>(model_version.size()));
  if (!out) throw std::runtime_error("failed writing embeddings");
}

EmbeddingFile read_embeddings(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != kMagic) throw std::runtime_error("not an EMB1 embedding file");
  const auto version = binio::read_u32(in);
  if (version != kEmbeddingFormatVersion)
    throw std::runtime_error("unsupported embedding format version " + std::to_string(version));
  EmbeddingFile f;
  f.dim = binio::read_u32(in);
  const auto count = binio::read_u64(in);
  if (!in) throw std::runtime_error("truncated embedding header");
  f.records.resize(count);
  for (auto& r : f.records) {
    r.id = binio::read_u64(in);
    r.vector.resize(f.dim);
    for (auto& v : r.vector) v = binio::read_f32(in);
    if (!in) throw std::runtime_error("truncated embedding records");
  }
  const auto len = binio::read_u32(in);
  f.model_version.resize(len);
  in.read(f.model_version.data(), len);
  if (!in) throw std::runtime_error("truncated model version");
  for (auto& r : f.records) r.model_version = f.model_version;
  return f;
}

void save_embeddings(const std::filesystem::path& path, std::uint32_t dim,
                     const std::vector<EmbeddingRecord>& records, const std::string& model_version) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_embeddings(out, dim, records, model_version);
}

EmbeddingFile load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_embeddings(in);
}

void save_snapshot(const std::filesystem::path& path, const IndexSnapshot& snapshot) {
  std::vector<EmbeddingRecord> records;
  records.reserve(snapshot.size());
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    const auto v = snapshot.vector_at(i);
    records.push_back({snapshot.ids()[i], std::vector<float>(v.begin(), v.end()), snapshot.model_version()});
  }
  std::sort(records.begin(), records.end(),
            [](const EmbeddingRecord& a, const EmbeddingRecord& b) { return a.id < b.id; });
  save_embeddings(path, static_cast<std::uint32_t>(snapshot.dim()), records, snapshot.model_version());
  const auto& p = snapshot.params();
  nlohmann::json j{{"snapshot_version", snapshot.version()},
                   {"model_version", snapshot.model_version()},
                   {"count", snapshot.size()},
                   {"dim", snapshot.dim()},
                   {"hnsw", {{"M", p.M}, {"ef_construction", p.ef_construction}, {"ef_search", p.ef_search}, {"seed", p.seed}}}};
  std::ofstream out(sidecar(path), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + sidecar(path).string());
  out << j.dump(2) << '\n';
}

std::shared_ptr<const IndexSnapshot> load_snapshot(const std::filesystem::path& path) {
  auto file = load_embeddings(path);
  HnswParams params;
  std::uint64_t version = 1;
  if (std::ifstream meta(sidecar(path)); meta) {
    const auto j = nlohmann::json::parse(meta);
    version = j.value("snapshot_version", version);
    if (j.contains("hnsw")) {
      const auto& h = j["hnsw"];
      params.M = h.value("M", params.M);
      params.ef_construction = h.value("ef_construction", params.ef_construction);
      params.ef_search = h.value("ef_search", params.ef_search);
      params.seed = h.value("seed", params.seed);
    }
  }
  return IndexSnapshot::build(std::move(file.records), params, version);
}

}  // namespace semret::index

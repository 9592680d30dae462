#include "socnav/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace socnav {

void CheckpointWriter::add(const std::string& name, const std::vector<int>& shape,
                           const float* data) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  Entry e;
  e.name = name;
  e.shape = shape;
  e.data.assign(data, data + n);
  entries_.push_back(std::move(e));
}

void CheckpointWriter::set_meta(const std::string& json_text) { meta_ = json_text; }

void CheckpointWriter::set_rng_state(const std::vector<uint64_t>& states) {
  rng_ = states;
}

void CheckpointWriter::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "socnav-ckpt-v1";
  header["meta"] = nlohmann::json::parse(meta_);
  header["rng"] = rng_;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    entries.push_back({{"name", e.name}, {"shape", e.shape}, {"dtype", "f32"}});
  }
  header["entries"] = entries;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  const uint32_t len = static_cast<uint32_t>(text.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(text.data(), text.size());
  for (const auto& e : entries_) {
    os.write(reinterpret_cast<const char*>(e.data.data()),
             static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

CheckpointReader::CheckpointReader(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (!is) throw std::runtime_error("checkpoint: truncated header in " + path);

  nlohmann::json header = nlohmann::json::parse(text);
  if (header.at("format").get<std::string>() != "socnav-ckpt-v1")
    throw std::runtime_error("checkpoint: unknown format in " + path);
  meta_ = header.at("meta").dump();
  rng_ = header.value("rng", std::vector<uint64_t>{});
  for (const auto& j : header.at("entries")) {
    Entry e;
    e.shape = j.at("shape").get<std::vector<int>>();
    int64_t n = 1;
    for (int d : e.shape) n *= d;
    e.data.resize(n);
    is.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw std::runtime_error("checkpoint: truncated data in " + path);
    entries_.emplace_back(j.at("name").get<std::string>(), std::move(e));
  }
}

bool CheckpointReader::has(const std::string& name) const {
  for (const auto& [n, e] : entries_)
    if (n == name) return true;
  return false;
}

const CheckpointReader::Entry& CheckpointReader::find(const std::string& name) const {
  for (const auto& [n, e] : entries_)
    if (n == name) return e;
  throw std::runtime_error("checkpoint: missing entry " + name);
}

const std::vector<int>& CheckpointReader::shape(const std::string& name) const {
  return find(name).shape;
}

const std::vector<float>& CheckpointReader::data(const std::string& name) const {
  return find(name).data;
}

Tensor CheckpointReader::tensor(const std::string& name) const {
  const Entry& e = find(name);
  return Tensor(e.shape, e.data);
}

std::vector<std::string> CheckpointReader::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [n, e] : entries_) out.push_back(n);
  return out;
}

}  // namespace socnav

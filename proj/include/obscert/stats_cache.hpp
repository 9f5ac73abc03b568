#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "obscert/deadzone.hpp"

namespace obscert {

/// Versioned binary cache of ScenarioStats records keyed by a config hash.
/// Layout: magic, version, config hash, model name, N, n_y, n_targets, count,
/// then count records of (id, a[n_y], b[n_y], dz[n_targets]).
struct StatsCacheHeader {
  std::uint32_t version = 1;
  std::uint64_t config_hash = 0;
  std::string model_name;
  std::uint32_t horizon = 0;
  std::uint32_t n_y = 0;
  std::uint32_t n_targets = 0;
};

namespace detail {

inline constexpr char kCacheMagic[8] = {'O', 'B', 'S', 'C', 'A', 'C', 'H', 'E'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return static_cast<bool>(in);
}

}  // namespace detail

inline void save_stats_cache(const std::string& path, const StatsCacheHeader& header,
                             const std::vector<ScenarioStats>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open cache file for writing: " + path);
  out.write(detail::kCacheMagic, sizeof detail::kCacheMagic);
  detail::write_pod(out, header.version);
  detail::write_pod(out, header.config_hash);
  const std::uint32_t name_len = static_cast<std::uint32_t>(header.model_name.size());
  detail::write_pod(out, name_len);
  out.write(header.model_name.data(), name_len);
  detail::write_pod(out, header.horizon);
  detail::write_pod(out, header.n_y);
  detail::write_pod(out, header.n_targets);
  const std::uint64_t count = records.size();
  detail::write_pod(out, count);
  for (const ScenarioStats& st : records) {
    detail::write_pod(out, st.id);
    for (double v : st.a) detail::write_pod(out, v);
    for (double v : st.b) detail::write_pod(out, v);
    for (double v : st.dz) detail::write_pod(out, v);
  }
  if (!out) throw std::runtime_error("failed writing cache file: " + path);
}

/// Loads a cache; returns nullopt when the file is absent, malformed, or its
/// config hash / shape fields do not match (a mismatched cache is rejected,
/// never silently reused).
inline std::optional<std::vector<ScenarioStats>> load_stats_cache(
    const std::string& path, const StatsCacheHeader& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kCacheMagic, sizeof magic) != 0) return std::nullopt;
  StatsCacheHeader h;
  std::uint32_t name_len = 0;
  if (!detail::read_pod(in, h.version) || h.version != expected.version) return std::nullopt;
  if (!detail::read_pod(in, h.config_hash)) return std::nullopt;
  if (!detail::read_pod(in, name_len) || name_len > 4096) return std::nullopt;
  h.model_name.resize(name_len);
  in.read(h.model_name.data(), name_len);
  if (!in || !detail::read_pod(in, h.horizon) || !detail::read_pod(in, h.n_y) ||
      !detail::read_pod(in, h.n_targets))
    return std::nullopt;
  if (h.config_hash != expected.config_hash || h.model_name != expected.model_name ||
      h.horizon != expected.horizon || h.n_y != expected.n_y ||
      h.n_targets != expected.n_targets)
    return std::nullopt;
  std::uint64_t count = 0;
  if (!detail::read_pod(in, count)) return std::nullopt;
  std::vector<ScenarioStats> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    ScenarioStats st;
    if (!detail::read_pod(in, st.id)) return std::nullopt;
    st.a.resize(h.n_y);
    st.b.resize(h.n_y);
    st.dz.resize(h.n_targets);
    for (double& v : st.a)
      if (!detail::read_pod(in, v)) return std::nullopt;
    for (double& v : st.b)
      if (!detail::read_pod(in, v)) return std::nullopt;
    for (double& v : st.dz)
      if (!detail::read_pod(in, v)) return std::nullopt;
    records.push_back(std::move(st));
  }
  return records;
}

}  // namespace obscert

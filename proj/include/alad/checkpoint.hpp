#pragma once

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "alad/anogan.hpp"
#include "alad/data.hpp"
#include "alad/errors.hpp"
#include "alad/networks.hpp"
#include "alad/tensor.hpp"

namespace alad {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format stores IEEE-754 doubles little-endian");

// Single-file checkpoint: a plain-text manifest (ordered key=value lines and
// an array directory) followed by the raw float64 payload. Ordering is
// preserved on load so save(load(f)) is byte-identical to f.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> manifest;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : manifest)
      if (k == key) return v;
    throw ConfigError("checkpoint manifest is missing key '" + key + "'");
  }
  bool has(const std::string& key) const {
    for (const auto& [k, v] : manifest)
      if (k == key) return true;
    return false;
  }
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : manifest)
      if (k == key) {
        v = value;
        return;
      }
    manifest.emplace_back(key, value);
  }
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out << "ALADCKPT1\n";
  for (const auto& [k, v] : c.manifest) out << k << "=" << v << "\n";
  out << "arrays=" << c.arrays.size() << "\n";
  for (const auto& [name, t] : c.arrays) {
    out << "a " << name << " " << t.rank();
    for (std::size_t d : t.shape()) out << " " << d;
    out << "\n";
  }
  out << "@BIN\n";
  for (const auto& [name, t] : c.arrays)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw ConfigError("error while writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ALADCKPT1")
    throw ConfigError("not a checkpoint file: " + path);

  Checkpoint c;
  std::vector<std::pair<std::string, Shape>> dir;
  bool in_dir = false;
  while (std::getline(in, line)) {
    if (line == "@BIN") break;
    if (line.rfind("a ", 0) == 0 && in_dir) {
      std::istringstream ss(line.substr(2));
      std::string name;
      std::size_t rank = 0;
      ss >> name >> rank;
      Shape shape(rank);
      for (std::size_t i = 0; i < rank; ++i) ss >> shape[i];
      if (!ss) throw ConfigError("malformed array directory line: " + line);
      dir.emplace_back(name, std::move(shape));
      continue;
    }
    const auto pos = line.find('=');
    if (pos == std::string::npos) throw ConfigError("malformed manifest line: " + line);
    const std::string key = line.substr(0, pos);
    if (key == "arrays") {
      in_dir = true;
      continue;
    }
    c.manifest.emplace_back(key, line.substr(pos + 1));
  }

  for (auto& [name, shape] : dir) {
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw ConfigError("truncated checkpoint payload: " + path);
    c.arrays.emplace_back(name, std::move(t));
  }
  return c;
}

inline std::string fingerprint_hash(const std::string& text) {
  return detail::hex64(detail::fnv1a(text.data(), text.size()));
}

// ---- bundle <-> checkpoint -------------------------------------------------

namespace detail {

template <typename Bundle>
void collect_common(Bundle& b, Checkpoint& c) {
  for (Param* p : b.all_params()) c.arrays.emplace_back(p->name, p->value);
  for (std::size_t k = 0; k < b.ema.size(); ++k)
    c.arrays.emplace_back("ema/" + b.ema.params()[k]->name, b.ema.shadow(k));
  for (auto& [name, t] : b.buffers()) c.arrays.emplace_back("buf/" + name, *t);
}

template <typename Bundle>
void restore_common(Bundle& b, const Checkpoint& c) {
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& [n, t] : c.arrays)
      if (n == name) return t;
    throw ConfigError("checkpoint is missing array '" + name + "'");
  };
  auto assign = [&](const std::string& name, Tensor& dst) {
    const Tensor& src = find(name);
    if (!src.same_shape(dst))
      throw ConfigError("checkpoint array '" + name + "' has shape " + shape_str(src.shape()) +
                        ", expected " + shape_str(dst.shape()));
    dst = src;
  };
  for (Param* p : b.all_params()) assign(p->name, p->value);
  for (std::size_t k = 0; k < b.ema.size(); ++k)
    assign("ema/" + b.ema.params()[k]->name, b.ema.shadow_mut(k));
  for (auto& [name, t] : b.buffers()) assign("buf/" + name, *t);
}

}  // namespace detail

inline Checkpoint make_checkpoint(NetworkBundle& b, const TrainConfig& cfg, std::size_t epoch) {
  Checkpoint c;
  c.set("format_version", "1");
  c.set("model", "alad");
  c.set("dataset", b.dataset);
  c.set("fingerprint", fingerprint_hash(b.fingerprint_text()));
  c.set("input_dim", std::to_string(b.input_dim));
  c.set("latent_dim", std::to_string(b.latent_dim));
  c.set("seed", std::to_string(cfg.seed));
  c.set("epoch", std::to_string(epoch));
  c.set("cfg.batch_size", std::to_string(cfg.batch_size));
  c.set("cfg.alpha", format_double(cfg.alpha));
  c.set("cfg.beta1", format_double(cfg.beta1));
  c.set("cfg.lrelu_slope", format_double(cfg.lrelu_slope));
  c.set("cfg.ema_decay", format_double(cfg.ema_decay));
  c.set("cfg.use_sn", b.use_sn ? "1" : "0");
  c.set("cfg.use_dzz", b.use_dzz ? "1" : "0");
  detail::collect_common(b, c);
  return c;
}

inline Checkpoint make_checkpoint(AnoganBundle& b, const TrainConfig& cfg, std::size_t epoch) {
  Checkpoint c;
  c.set("format_version", "1");
  c.set("model", "anogan");
  c.set("dataset", b.dataset);
  c.set("fingerprint", fingerprint_hash(b.fingerprint_text()));
  c.set("input_dim", std::to_string(b.input_dim));
  c.set("latent_dim", std::to_string(b.latent_dim));
  c.set("seed", std::to_string(cfg.seed));
  c.set("epoch", std::to_string(epoch));
  c.set("cfg.batch_size", std::to_string(cfg.batch_size));
  c.set("cfg.alpha", format_double(cfg.alpha));
  c.set("cfg.beta1", format_double(cfg.beta1));
  c.set("cfg.lrelu_slope", format_double(cfg.lrelu_slope));
  c.set("cfg.ema_decay", format_double(cfg.ema_decay));
  detail::collect_common(b, c);
  return c;
}

/// Fails if the checkpoint was produced by a different architecture.
template <typename Bundle>
void load_into(Bundle& b, const Checkpoint& c) {
  const std::string want = fingerprint_hash(b.fingerprint_text());
  if (c.get("fingerprint") != want)
    throw ConfigError("architecture fingerprint mismatch: checkpoint " + c.get("fingerprint") +
                      " vs model " + want);
  detail::restore_common(b, c);
}

}  // namespace alad

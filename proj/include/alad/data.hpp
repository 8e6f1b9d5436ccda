#pragma once

#include <algorithm>
#include <cstdint>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alad/errors.hpp"
#include "alad/rng.hpp"
#include "alad/tensor.hpp"

namespace alad {

struct LabeledDataset {
  Tensor X;                    // [N x d]
  std::vector<std::uint8_t> y; // 1 = anomalous
  std::vector<std::string> feature_names;
  std::vector<bool> continuous;  // columns eligible for min-max scaling
  double nominal_fraction = 0.0;
  std::string provenance;

  std::size_t n() const { return X.rows(); }
  std::size_t dim() const { return X.cols(); }

  void finish() {
    std::size_t nom = 0;
    for (auto v : y) nom += (v == 0);
    nominal_fraction = y.empty() ? 0.0 : static_cast<double>(nom) / static_cast<double>(y.size());
    if (!X.all_finite()) throw DataError("dataset contains non-finite values");
    if (y.size() != X.rows()) throw DataError("label count does not match row count");
  }

  LabeledDataset select(const std::vector<std::size_t>& rows) const {
    LabeledDataset out;
    out.X = Tensor({rows.size(), dim()});
    out.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < dim(); ++c) out.X(i, c) = X(rows[i], c);
      out.y[i] = y[rows[i]];
    }
    out.feature_names = feature_names;
    out.continuous = continuous;
    out.provenance = provenance;
    out.finish();
    return out;
  }
};

struct NoveltySplit {
  LabeledDataset train;       // nominal only
  LabeledDataset validation;  // nominal only
  LabeledDataset test;        // mixed, labeled
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, std::size_t row, std::size_t col) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() )
    throw DataError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                    ": cannot parse numeric value '" + s + "'");
  return v;
}

inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace detail

// ---- KDD99 ------------------------------------------------------------

inline const std::vector<std::string>& kdd99_column_names() {
  static const std::vector<std::string> names = {
      "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
      "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
      "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
      "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
      "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
      "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
      "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
      "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
      "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};
  return names;
}

/// 0-based indices of the 7 symbolic columns among the 41 features.
inline const std::vector<std::size_t>& kdd99_categorical_columns() {
  static const std::vector<std::size_t> cols = {1, 2, 3, 6, 11, 20, 21};
  return cols;
}

/// Position of `value` in a sorted vocabulary; unseen values are an error.
inline std::size_t one_hot_index(const std::vector<std::string>& vocab, const std::string& value,
                                 const std::string& column) {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), value);
  if (it == vocab.end() || *it != value)
    throw DataError("unseen categorical value '" + value + "' in column " + column);
  return static_cast<std::size_t>(it - vocab.begin());
}

/// KDDCup99-10% loader: one-hot encodes the 7 symbolic columns (vocabulary
/// fixed from the whole file, sorted), keeps the 34 numeric columns raw
/// (scaling is fit later on the training split only), and inverts labels:
/// "normal." traffic is the anomaly class here. Two passes over the file so
/// half a million rows never sit in memory as strings.
inline LabeledDataset load_kdd99(const std::string& path) {
  const auto& cat_cols = kdd99_categorical_columns();
  const auto& names = kdd99_column_names();
  const std::size_t ncols = names.size();  // 41 features + trailing label in the file

  auto for_each_row = [&](auto&& fn) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open kdd99 file: " + path);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = detail::split_csv_line(line);
      if (fields.size() != ncols + 1)
        throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(ncols + 1) +
                        " fields, got " + std::to_string(fields.size()));
      fn(row, fields);
      ++row;
    }
    return row;
  };

  // pass 1: vocabulary and row count
  std::map<std::size_t, std::set<std::string>> vocab_sets;
  const std::size_t n_rows = for_each_row([&](std::size_t, std::vector<std::string>& fields) {
    for (std::size_t c : cat_cols) vocab_sets[c].insert(fields[c]);
  });
  if (n_rows == 0) throw DataError("kdd99 file has no rows: " + path);

  std::map<std::size_t, std::vector<std::string>> vocab;
  for (auto& [c, s] : vocab_sets) vocab[c] = std::vector<std::string>(s.begin(), s.end());

  LabeledDataset ds;
  std::size_t width = 0;
  for (std::size_t c = 0; c < ncols; ++c) {
    if (vocab.count(c)) {
      for (const auto& v : vocab[c]) {
        ds.feature_names.push_back(names[c] + "=" + v);
        ds.continuous.push_back(false);
      }
      width += vocab[c].size();
    } else {
      ds.feature_names.push_back(names[c]);
      ds.continuous.push_back(true);
      ++width;
    }
  }

  // pass 2: encode in place
  ds.X = Tensor({n_rows, width});
  ds.y.resize(n_rows);
  for_each_row([&](std::size_t r, std::vector<std::string>& fields) {
    std::string label = fields.back();
    if (!label.empty() && label.back() == '.') label.pop_back();
    ds.y[r] = label == "normal" ? 1 : 0;
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (auto it = vocab.find(c); it != vocab.end()) {
        ds.X(r, out_c + one_hot_index(it->second, fields[c], names[c])) = 1.0;
        out_c += it->second.size();
      } else {
        ds.X(r, out_c++) = detail::parse_double(fields[c], r, c);
      }
    }
  });
  std::uint64_t h = detail::fnv1a(ds.X.data(), ds.X.size() * sizeof(double));
  ds.provenance = "kdd99:" + path + ":onehot" + std::to_string(width) + ":" + detail::hex64(h);
  ds.finish();
  return ds;
}

// ---- Arrhythmia ---------------------------------------------------------

/// Anomalous diagnostic classes: the small arrhythmia groups.
inline bool arrhythmia_anomalous_class(int cls) {
  switch (cls) {
    case 3: case 4: case 5: case 7: case 8: case 9: case 14: case 15: return true;
    default: return false;
  }
}

/// 0-based feature columns dropped from the 279-attribute layout: sex plus
/// the four vector-angle measurements that are mostly missing, leaving 274
/// numeric columns (see README for the format contract).
inline const std::vector<std::size_t>& arrhythmia_dropped_columns() {
  static const std::vector<std::size_t> cols = {1, 10, 11, 12, 13};
  return cols;
}

/// Arrhythmia loader. Accepts the original 280-field rows (279 attributes +
/// class) or a preprocessed 275-field layout (274 features + class). Values
/// are used raw; missing entries ('?') are imputed to 0.
inline LabeledDataset load_arrhythmia(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open arrhythmia file: " + path);

  LabeledDataset ds;
  std::vector<std::vector<double>> rows;
  std::vector<std::uint8_t> labels;
  std::string line;
  std::size_t r = 0;
  const auto& dropped = arrhythmia_dropped_columns();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 280 && fields.size() != 275)
      throw DataError("row " + std::to_string(r) + ": expected 280 or 275 fields, got " +
                      std::to_string(fields.size()));
    const std::size_t nfeat = fields.size() - 1;
    std::vector<double> vals;
    vals.reserve(274);
    for (std::size_t c = 0; c < nfeat; ++c) {
      if (fields.size() == 280 &&
          std::find(dropped.begin(), dropped.end(), c) != dropped.end())
        continue;
      vals.push_back(fields[c] == "?" ? 0.0 : detail::parse_double(fields[c], r, c));
    }
    if (vals.size() != 274)
      throw DataError("row " + std::to_string(r) + ": produced " + std::to_string(vals.size()) +
                      " features, expected 274");
    const int cls = static_cast<int>(detail::parse_double(fields.back(), r, nfeat));
    labels.push_back(arrhythmia_anomalous_class(cls) ? 1 : 0);
    rows.push_back(std::move(vals));
    ++r;
  }
  if (rows.empty()) throw DataError("arrhythmia file has no rows: " + path);

  ds.X = Tensor({rows.size(), 274});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < 274; ++c) ds.X(i, c) = rows[i][c];
  ds.y = std::move(labels);
  ds.feature_names.resize(274);
  for (std::size_t c = 0; c < 274; ++c) ds.feature_names[c] = "a" + std::to_string(c);
  ds.continuous.assign(274, false);  // used raw, never rescaled
  std::uint64_t h = detail::fnv1a(ds.X.data(), ds.X.size() * sizeof(double));
  ds.provenance = "arrhythmia:" + path + ":raw274:" + detail::hex64(h);
  ds.finish();
  return ds;
}

// ---- synthetic 2-D task --------------------------------------------------

inline constexpr double kToyMeanX = 2.0;
inline constexpr double kToySigma = 0.3;

/// Nominal points from a symmetric two-component Gaussian mixture with means
/// (+-2, 0) and sigma 0.3; anomalous points uniform on [-5,5]^2 outside the
/// 3-sigma balls around both means.
inline LabeledDataset gen_toy2d(std::size_t n_nominal, std::size_t n_anomalous, Rng& rng) {
  if (n_nominal < 1) throw ArgumentError("gen_toy2d: need at least one nominal point");
  LabeledDataset ds;
  ds.X = Tensor({n_nominal + n_anomalous, 2});
  ds.y.resize(n_nominal + n_anomalous);
  for (std::size_t i = 0; i < n_nominal; ++i) {
    const double mx = rng.bernoulli(0.5) ? kToyMeanX : -kToyMeanX;
    ds.X(i, 0) = mx + kToySigma * rng.normal();
    ds.X(i, 1) = kToySigma * rng.normal();
    ds.y[i] = 0;
  }
  const double excl = 3.0 * kToySigma;
  for (std::size_t i = 0; i < n_anomalous; ++i) {
    double x0, x1;
    while (true) {
      x0 = rng.uniform(-5.0, 5.0);
      x1 = rng.uniform(-5.0, 5.0);
      const double dp = std::hypot(x0 - kToyMeanX, x1);
      const double dm = std::hypot(x0 + kToyMeanX, x1);
      if (dp >= excl && dm >= excl) break;
    }
    ds.X(n_nominal + i, 0) = x0;
    ds.X(n_nominal + i, 1) = x1;
    ds.y[n_nominal + i] = 1;
  }
  ds.feature_names = {"x0", "x1"};
  ds.continuous.assign(2, false);
  ds.provenance = "toy2d";
  ds.finish();
  return ds;
}

// ---- novelty split --------------------------------------------------------

/// Tabular protocol: shuffle, send 50% of all records to the mixed test set,
/// filter the rest to nominal-only and cut 75/25 into train/validation.
inline NoveltySplit split_novelty(const LabeledDataset& ds, std::uint64_t seed) {
  const std::size_t n = ds.n();
  if (n == 0) throw ConfigError("split_novelty: empty dataset");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = Rng(seed).fork(17);  // decoupled from training draws
  rng.shuffle(idx);

  const std::size_t n_test = n / 2;
  std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
  std::vector<std::size_t> nominal_idx;
  for (std::size_t i = n_test; i < n; ++i)
    if (ds.y[idx[i]] == 0) nominal_idx.push_back(idx[i]);
  if (nominal_idx.empty()) throw ConfigError("split_novelty: no nominal samples to train on");

  const std::size_t n_train = (nominal_idx.size() * 3) / 4;
  std::vector<std::size_t> train_idx(nominal_idx.begin(), nominal_idx.begin() + n_train);
  std::vector<std::size_t> val_idx(nominal_idx.begin() + n_train, nominal_idx.end());

  NoveltySplit split;
  split.train = ds.select(train_idx);
  split.validation = ds.select(val_idx);
  split.test = ds.select(test_idx);
  split.seed = seed;
  return split;
}

/// Min-max scaling of the continuous columns, fit on the training split and
/// applied to all three splits. Constant columns map to 0.
inline void scale_to_train(NoveltySplit& split) {
  const auto& cont = split.train.continuous;
  if (cont.empty()) return;
  const std::size_t d = split.train.dim();
  std::vector<double> lo(d, 0.0), hi(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    if (!cont[c]) continue;
    double mn = split.train.X(0, c), mx = mn;
    for (std::size_t r = 1; r < split.train.n(); ++r) {
      mn = std::min(mn, split.train.X(r, c));
      mx = std::max(mx, split.train.X(r, c));
    }
    lo[c] = mn;
    hi[c] = mx;
  }
  for (LabeledDataset* part : {&split.train, &split.validation, &split.test}) {
    for (std::size_t c = 0; c < d; ++c) {
      if (!cont[c]) continue;
      const double range = hi[c] - lo[c];
      for (std::size_t r = 0; r < part->n(); ++r)
        part->X(r, c) = range > 0.0 ? (part->X(r, c) - lo[c]) / range : 0.0;
    }
  }
}

/// Seeded fraction of a dataset's rows, order-preserving.
inline LabeledDataset subsample(const LabeledDataset& ds, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) throw ArgumentError("subsample fraction in (0,1]");
  if (fraction == 1.0) return ds.select([&] {
    std::vector<std::size_t> all(ds.n());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }());
  std::vector<std::size_t> idx(ds.n());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng(seed).fork(23);
  rng.shuffle(idx);
  const std::size_t keep = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * ds.n()));
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return ds.select(idx);
}

// ---- cache (binary column store + manifest) -------------------------------

inline void save_dataset_cache(const LabeledDataset& ds, const std::string& prefix) {
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot write " + prefix + ".bin");
  const std::size_t n = ds.n(), d = ds.dim();
  std::vector<double> col(n);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < n; ++r) col[r] = ds.X(r, c);
    bin.write(reinterpret_cast<const char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  bin.write(reinterpret_cast<const char*>(ds.y.data()), static_cast<std::streamsize>(n));
  bin.close();

  std::uint64_t h = detail::fnv1a(ds.X.data(), ds.X.size() * sizeof(double));
  h = detail::fnv1a(ds.y.data(), ds.y.size(), h);
  std::ofstream man(prefix + ".manifest");
  if (!man) throw DataError("cannot write " + prefix + ".manifest");
  man << "rows=" << n << "\ncols=" << d << "\nhash=" << detail::hex64(h)
      << "\nprovenance=" << ds.provenance << "\n";
  man << "continuous=";
  for (std::size_t c = 0; c < d; ++c) man << (ds.continuous.empty() ? '0' : (ds.continuous[c] ? '1' : '0'));
  man << "\nfeatures=";
  for (std::size_t c = 0; c < ds.feature_names.size(); ++c)
    man << (c ? ";" : "") << ds.feature_names[c];
  man << "\n";
}

inline LabeledDataset load_dataset_cache(const std::string& prefix) {
  std::ifstream man(prefix + ".manifest");
  if (!man) throw DataError("cannot open " + prefix + ".manifest");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(man, line)) {
    auto pos = line.find('=');
    if (pos != std::string::npos) kv[line.substr(0, pos)] = line.substr(pos + 1);
  }
  const std::size_t n = std::stoull(kv.at("rows"));
  const std::size_t d = std::stoull(kv.at("cols"));

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw DataError("cannot open " + prefix + ".bin");
  LabeledDataset ds;
  ds.X = Tensor({n, d});
  std::vector<double> col(n);
  for (std::size_t c = 0; c < d; ++c) {
    bin.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!bin) throw DataError("truncated cache blob: " + prefix + ".bin");
    for (std::size_t r = 0; r < n; ++r) ds.X(r, c) = col[r];
  }
  ds.y.resize(n);
  bin.read(reinterpret_cast<char*>(ds.y.data()), static_cast<std::streamsize>(n));
  if (!bin) throw DataError("truncated cache blob: " + prefix + ".bin");

  std::uint64_t h = detail::fnv1a(ds.X.data(), ds.X.size() * sizeof(double));
  h = detail::fnv1a(ds.y.data(), ds.y.size(), h);
  if (detail::hex64(h) != kv.at("hash")) throw DataError("cache hash mismatch for " + prefix);

  ds.provenance = kv.count("provenance") ? kv.at("provenance") : "";
  if (kv.count("continuous")) {
    const std::string& s = kv.at("continuous");
    ds.continuous.resize(std::min(s.size(), d));
    for (std::size_t c = 0; c < ds.continuous.size(); ++c) ds.continuous[c] = s[c] == '1';
  }
  if (kv.count("features") && !kv.at("features").empty()) {
    std::stringstream ss(kv.at("features"));
    std::string name;
    while (std::getline(ss, name, ';')) ds.feature_names.push_back(name);
  }
  ds.finish();
  return ds;
}

}  // namespace alad

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "alad/data.hpp"
#include "fixtures.hpp"

using namespace alad;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("alad_data_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("kdd99 loader: one-hot width, label inversion, vocabulary") {
  TempDir tmp;
  const std::string path = tmp.file("kdd.csv");
  fixtures::write_kdd99_like(path, 400, 1);
  LabeledDataset ds = load_kdd99(path);

  CHECK(ds.dim() == 121);  // 34 numeric + 3+66+11+2+2+1+2 one-hot
  CHECK(ds.n() == 400);
  CHECK(ds.feature_names.size() == 121);
  CHECK(ds.X.all_finite());

  // every anomalous row is a "normal." record
  std::ifstream in(path);
  std::string line;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    const bool is_normal = line.find(",normal.") != std::string::npos;
    CHECK(static_cast<bool>(ds.y[r]) == is_normal);
    ++r;
  }

  // each categorical column contributes exactly its vocabulary size
  std::size_t onehot = 0;
  for (const std::string& name : ds.feature_names)
    if (name.find('=') != std::string::npos) ++onehot;
  CHECK(onehot == 87);
  std::size_t continuous = 0;
  for (bool c : ds.continuous) continuous += c;
  CHECK(continuous == 34);

  // one-hot rows sum to exactly 7 across the encoded columns
  for (std::size_t row = 0; row < 5; ++row) {
    double s = 0.0;
    for (std::size_t c = 0; c < ds.dim(); ++c)
      if (!ds.continuous[c]) s += ds.X(row, c);
    CHECK(s == doctest::Approx(7.0));
  }
}

TEST_CASE("kdd99 loader: malformed rows and unseen categories") {
  TempDir tmp;
  const std::string path = tmp.file("bad.csv");
  {
    std::ofstream out(path);
    out << "1,tcp,http,SF,0,0,0\n";  // far too few fields
  }
  CHECK_THROWS_WITH_AS(load_kdd99(path), doctest::Contains("row 0"), DataError);

  CHECK_THROWS_AS(load_kdd99(tmp.file("missing.csv")), DataError);

  const std::vector<std::string> vocab = {"icmp", "tcp", "udp"};
  CHECK(one_hot_index(vocab, "tcp", "protocol_type") == 1);
  CHECK_THROWS_WITH_AS(one_hot_index(vocab, "sctp", "protocol_type"), doctest::Contains("sctp"),
                       DataError);
}

TEST_CASE("arrhythmia loader: shape, anomaly rate, imputation") {
  TempDir tmp;
  const std::string path = tmp.file("arrhythmia.data");
  fixtures::write_arrhythmia_like(path, 452, 2);
  LabeledDataset ds = load_arrhythmia(path);

  CHECK(ds.n() == 452);
  CHECK(ds.dim() == 274);
  CHECK(ds.X.all_finite());  // '?' imputed to 0, never NaN

  double frac = 0.0;
  for (auto v : ds.y) frac += v;
  frac /= static_cast<double>(ds.n());
  CHECK(frac >= 0.14);
  CHECK(frac <= 0.16);

  // preprocessed 275-field layout loads identically in shape
  const std::string pre = tmp.file("arrhythmia_275.csv");
  {
    std::ofstream out(pre);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 274; ++c) out << c << ",";
      out << (r == 0 ? 3 : 1) << "\n";
    }
  }
  LabeledDataset ds2 = load_arrhythmia(pre);
  CHECK(ds2.n() == 5);
  CHECK(ds2.dim() == 274);
  CHECK(ds2.y[0] == 1);
  CHECK(ds2.y[1] == 0);

  const std::string bad = tmp.file("bad_width.csv");
  {
    std::ofstream out(bad);
    out << "1,2,3,4\n";
  }
  CHECK_THROWS_AS(load_arrhythmia(bad), DataError);
}

TEST_CASE("toy generator: labels, exclusion zone, symmetry") {
  Rng rng(3);
  LabeledDataset all_nominal = gen_toy2d(300, 0, rng);
  for (auto v : all_nominal.y) CHECK(v == 0);

  Rng rng2(4);
  LabeledDataset ds = gen_toy2d(4000, 500, rng2);
  const double excl = 3.0 * 0.3;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!ds.y[i]) continue;
    const double dp = std::hypot(ds.X(i, 0) - 2.0, ds.X(i, 1));
    const double dm = std::hypot(ds.X(i, 0) + 2.0, ds.X(i, 1));
    CHECK(dp >= excl);
    CHECK(dm >= excl);
    CHECK(std::fabs(ds.X(i, 0)) <= 5.0);
    CHECK(std::fabs(ds.X(i, 1)) <= 5.0);
  }

  // symmetric mixture: nominal x-mean within 3 sigma_x / sqrt(n) of zero
  double mean = 0.0;
  std::size_t n_nom = 0;
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (!ds.y[i]) {
      mean += ds.X(i, 0);
      ++n_nom;
    }
  mean /= static_cast<double>(n_nom);
  const double sigma_x = std::sqrt(4.0 + 0.09);  // mode offset dominates
  CHECK(std::fabs(mean) <= 3.0 * sigma_x / std::sqrt(static_cast<double>(n_nom)));
}

TEST_CASE("novelty split: contamination-free training side, determinism") {
  Rng rng(5);
  LabeledDataset ds = gen_toy2d(800, 200, rng);
  NoveltySplit split = split_novelty(ds, 42);

  CHECK(split.test.n() == 500);  // floor(1000 / 2)
  for (auto v : split.train.y) CHECK(v == 0);
  for (auto v : split.validation.y) CHECK(v == 0);

  const std::size_t n_nominal_rest = split.train.n() + split.validation.n();
  CHECK(split.train.n() == (n_nominal_rest * 3) / 4);

  NoveltySplit split2 = split_novelty(ds, 42);
  REQUIRE(split2.train.n() == split.train.n());
  for (std::size_t i = 0; i < split.train.X.size(); ++i)
    CHECK(split.train.X[i] == split2.train.X[i]);

  NoveltySplit split3 = split_novelty(ds, 43);
  bool differs = split3.train.n() != split.train.n();
  if (!differs)
    for (std::size_t i = 0; i < split.train.X.size() && !differs; ++i)
      differs = split.train.X[i] != split3.train.X[i];
  CHECK(differs);

  // all-anomalous data cannot form a training split
  LabeledDataset bad = ds;
  for (auto& v : bad.y) v = 1;
  CHECK_THROWS_AS(split_novelty(bad, 1), ConfigError);
}

TEST_CASE("min-max scaling fits on train only") {
  TempDir tmp;
  const std::string path = tmp.file("kdd.csv");
  fixtures::write_kdd99_like(path, 300, 6);
  LabeledDataset ds = load_kdd99(path);
  NoveltySplit split = split_novelty(ds, 7);
  scale_to_train(split);

  for (std::size_t c = 0; c < split.train.dim(); ++c) {
    if (!split.train.continuous[c]) continue;
    double mn = split.train.X(0, c), mx = mn;
    for (std::size_t r = 1; r < split.train.n(); ++r) {
      mn = std::min(mn, split.train.X(r, c));
      mx = std::max(mx, split.train.X(r, c));
    }
    // train columns occupy [0,1] exactly (or collapse to 0 when constant)
    CHECK(mn >= 0.0);
    CHECK(mx <= 1.0);
    if (mx > mn) {
      CHECK(mn == doctest::Approx(0.0));
      CHECK(mx == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("subsample: seeded, order-preserving, sized") {
  Rng rng(8);
  LabeledDataset ds = gen_toy2d(200, 50, rng);
  LabeledDataset a = subsample(ds, 0.1, 9);
  LabeledDataset b = subsample(ds, 0.1, 9);
  CHECK(a.n() == 25);
  for (std::size_t i = 0; i < a.X.size(); ++i) CHECK(a.X[i] == b.X[i]);
  CHECK_THROWS_AS(subsample(ds, 0.0, 1), ArgumentError);
}

TEST_CASE("cache round-trip is bit-exact and hash-checked") {
  TempDir tmp;
  Rng rng(10);
  LabeledDataset ds = gen_toy2d(123, 45, rng);
  ds.feature_names = {"x0", "x1"};
  const std::string prefix = tmp.file("toy_cache");
  save_dataset_cache(ds, prefix);
  LabeledDataset back = load_dataset_cache(prefix);

  REQUIRE(back.n() == ds.n());
  REQUIRE(back.dim() == ds.dim());
  for (std::size_t i = 0; i < ds.X.size(); ++i) CHECK(back.X[i] == ds.X[i]);
  for (std::size_t i = 0; i < ds.y.size(); ++i) CHECK(back.y[i] == ds.y[i]);
  CHECK(back.provenance == ds.provenance);
  CHECK(back.feature_names == ds.feature_names);

  // corrupting the payload trips the manifest hash
  {
    std::fstream f(prefix + ".bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(16);
    char byte = 0x5A;
    f.write(&byte, 1);
  }
  CHECK_THROWS_WITH_AS(load_dataset_cache(prefix), doctest::Contains("hash"), DataError);
}

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "hpo/pipeline/data.hpp"
#include "hpo/pipeline/model.hpp"
#include "naive_ops.hpp"
#include "temp_dir.hpp"

using namespace hpo;
using hpo::testing::naive_dihist;
using hpo::testing::naive_fbncc;
using hpo::testing::naive_lnorm;
using hpo::testing::naive_lpool;
using hpo::testing::random_bank;
using hpo::testing::random_map;
using hpo::testing::relative_error;

namespace {

FeatureMap<double> filled(Index H, Index W, Index C, double v) {
  FeatureMap<double> x(H, W, C);
  x.pixels().setConstant(v);
  return x;
}

FilterBank<double> ones_bank(Index S, Index C) {
  FilterBank<double> f;
  f.size = S;
  f.channels = C;
  f.weights = RowMatrix<double>::Ones(1, S * S * C);
  return f;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.outer.filters = {FilterStrategy::random_uniform, 0, 3, 0.0, 11};
  c.outer.max_filters = 6;
  c.outer.pooling = OuterPooling::lpool_lnorm;
  c.outer.lpool = {2, 2, 2.0};
  c.outer.lnorm = {0.5, 2};
  return c;
}

}  // namespace

TEST_CASE("feature map layout is channel fastest") {
  FeatureMap<double> x(2, 3, 2);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 2; ++k) x(i, j, k) = 100 * i + 10 * j + k;
  CHECK(x.flat()(0) == 0);
  CHECK(x.flat()(1) == 1);
  CHECK(x.flat()(2) == 10);
  CHECK(x.flat()(6) == 100);
  RowMatrix<double> cols = im2col(x, 2);
  REQUIRE(cols.rows() == 2);
  REQUIRE(cols.cols() == 8);
  // Patch at (0, 1): (0,1,*), (0,2,*), (1,1,*), (1,2,*).
  std::vector<double> want{10, 11, 20, 21, 110, 111, 120, 121};
  for (Index d = 0; d < 8; ++d) CHECK(cols(1, d) == want[static_cast<std::size_t>(d)]);
  CHECK_THROWS_AS(FeatureMap<double>(0, 2, 1), PipelineError);
}

TEST_CASE("fbncc") {
  SUBCASE("mean subtraction zeroes a constant patch") {
    for (bool rho : {false, true}) {
      auto y = fbncc(filled(2, 2, 1, 1.0), ones_bank(2, 1), {0.3, rho, true});
      REQUIRE(y.rows() == 1);
      REQUIRE(y.cols() == 1);
      CHECK(y(0, 0, 0) == 0.0);
    }
  }
  SUBCASE("3x3x1 with two 2x2 filters against the loop oracle") {
    std::mt19937_64 rng(5);
    auto x = random_map(rng, 3, 3, 1);
    auto f = random_bank(rng, 2, 2, 1);
    for (bool rho : {false, true})
      for (bool eps : {false, true}) {
        FbnccParams<double> p{0.05, rho, eps};
        auto y = fbncc(x, f, p);
        CHECK(y.rows() == 2);
        CHECK(y.channels() == 2);
        CHECK(relative_error(y, naive_fbncc(x, f, p)) <= 1e-6);
      }
  }
  SUBCASE("hard cutoff above every patch energy gives raw correlation over sqrt(beta)") {
    std::mt19937_64 rng(6);
    auto x = random_map(rng, 5, 4, 2);
    auto f = random_bank(rng, 3, 2, 2);
    const double beta = 1e4;
    auto y = fbncc(x, f, {beta, true, false});
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j)
        for (Index k = 0; k < 3; ++k) {
          double dot = 0;
          for (Index a = 0; a < 2; ++a)
            for (Index b = 0; b < 2; ++b)
              for (Index c = 0; c < 2; ++c) dot += f.weights(k, (a * 2 + b) * 2 + c) * x(i + a, j + b, c);
          CHECK(y(i, j, k) == doctest::Approx(dot / std::sqrt(beta)).epsilon(1e-12));
        }
  }
  SUBCASE("scale covariance with a vanishing cutoff") {
    std::mt19937_64 rng(7);
    auto x = random_map(rng, 6, 6, 2);
    auto f = random_bank(rng, 4, 3, 2);
    FbnccParams<double> p{1e-8, false, false};
    const auto y = fbncc(x, f, p);
    for (double c : {0.5, 3.0, 40.0}) {
      FeatureMap<double> xs = x;
      xs.pixels() *= c;
      CHECK(relative_error(fbncc(xs, f, p), y) <= 1e-6);
    }
  }
  SUBCASE("errors") {
    std::mt19937_64 rng(8);
    auto x = random_map(rng, 3, 3, 1);
    CHECK_THROWS_AS(fbncc(x, random_bank(rng, 1, 2, 1), {0.0, false, true}), PipelineError);
    CHECK_THROWS_AS(fbncc(x, random_bank(rng, 1, 2, 2), {1.0, false, true}), PipelineError);
    CHECK_THROWS_AS(fbncc(x, random_bank(rng, 1, 4, 1), {1.0, false, true}), PipelineError);
  }
}

TEST_CASE("lpool") {
  auto y = lpool(filled(2, 2, 1, 1.0), {2, 1, 2.0});
  REQUIRE(y.size() == 1);
  CHECK(y(0, 0, 0) == doctest::Approx(2.0));
  CHECK(lpool(filled(2, 2, 1, 0.25), {2, 1, 1.0})(0, 0, 0) == doctest::Approx(1.0));

  std::mt19937_64 rng(9);
  auto x = random_map(rng, 6, 6, 3);
  LpoolParams<double> p{3, 2, 1.7};
  auto z = lpool(x, p);
  CHECK(z.rows() == 2);
  CHECK(z.cols() == 2);
  CHECK(z.channels() == 3);
  CHECK(relative_error(z, naive_lpool(x, p)) <= 1e-6);

  CHECK(lpool(random_map(rng, 7, 8, 1), {2, 2, 2.0}).rows() == 3);
  CHECK_THROWS_AS(lpool(x, {7, 1, 2.0}), PipelineError);
  CHECK_THROWS_AS(lpool(x, {2, 3, 2.0}), PipelineError);
  CHECK_THROWS_AS(lpool(x, {2, 1, 0.0}), PipelineError);
}

TEST_CASE("lnorm") {
  std::mt19937_64 rng(10);
  auto x = random_map(rng, 5, 5, 2);
  SUBCASE("large tau is the identity on the valid region") {
    auto y = lnorm(x, {1e6, 3});
    REQUIRE(y.rows() == 3);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j)
        for (Index k = 0; k < 2; ++k) CHECK(y(i, j, k) == x(i, j, k));
  }
  SUBCASE("a patch of norm 2 is halved") {
    auto y = lnorm(filled(2, 2, 1, 1.0), {1.0, 2});
    REQUIRE(y.size() == 1);
    CHECK(y(0, 0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("loop oracle") {
    LnormParams<double> p{0.7, 2};
    CHECK(relative_error(lnorm(x, p), naive_lnorm(x, p)) <= 1e-6);
    p.size = 4;
    CHECK(relative_error(lnorm(x, p), naive_lnorm(x, p)) <= 1e-6);
  }
  CHECK_THROWS_AS(lnorm(x, {0.0, 2}), PipelineError);
  CHECK_THROWS_AS(lnorm(x, {1.0, 6}), PipelineError);
}

TEST_CASE("dihist") {
  SUBCASE("non-negative input with alpha 0") {
    std::mt19937_64 rng(11);
    auto x = random_map(rng, 6, 6, 2);
    x.pixels() = x.pixels().cwiseAbs();
    DihistParams<double> p;
    auto y = dihist(x, p);
    REQUIRE(y.channels() == 4);
    for (Index r = 0; r < 2; ++r)
      for (Index c = 0; c < 2; ++c)
        for (Index k = 0; k < 2; ++k) {
          double sum = 0;
          for (Index i = 3 * r; i < 3 * r + 3; ++i)
            for (Index j = 3 * c; j < 3 * c + 3; ++j) sum += x(i, j, k);
          CHECK(y(r, c, 2 * k) == doctest::Approx(sum));
          CHECK(y(r, c, 2 * k + 1) == 0.0);
        }
  }
  SUBCASE("hand sum") {
    FeatureMap<double> x(2, 2, 1);
    x(0, 0, 0) = 1;
    x(0, 1, 0) = -1;
    x(1, 0, 0) = 2;
    x(1, 1, 0) = 0;
    DihistParams<double> p;
    p.mode = DihistMode::box;
    p.side = 2;
    auto y = dihist(x, p);
    REQUIRE(y.size() == 2);
    CHECK(y(0, 0, 0) == 3.0);
    CHECK(y(0, 0, 1) == 1.0);
  }
  SUBCASE("loop oracle, both modes") {
    std::mt19937_64 rng(12);
    auto x = random_map(rng, 8, 8, 2);
    DihistParams<double> p;
    p.alpha = 0.1;
    CHECK(relative_error(dihist(x, p), naive_dihist(x, p)) <= 1e-6);
    p.grid = 3;
    CHECK(relative_error(dihist(x, p), naive_dihist(x, p)) <= 1e-6);
    p.mode = DihistMode::box;
    p.subsample = 3;
    p.side = 4;
    auto y = dihist(x, p);
    CHECK(y.rows() == 2);
    CHECK(relative_error(y, naive_dihist(x, p)) <= 1e-6);
  }
  SUBCASE("errors") {
    DihistParams<double> p;
    p.alpha = -0.1;
    CHECK_THROWS_AS(dihist(filled(4, 4, 1, 0.0), p), PipelineError);
    p.alpha = 0;
    p.grid = 3;
    CHECK_THROWS_AS(dihist(filled(2, 4, 1, 0.0), p), PipelineError);
    p.mode = DihistMode::box;
    p.side = 5;
    CHECK_THROWS_AS(dihist(filled(4, 4, 1, 0.0), p), PipelineError);
  }
}

TEST_CASE("operators match loop oracles on random small inputs") {
  const auto r = hpo::testing::run_oracle_suite(2024, 100);
  CHECK(r.fbncc <= 1e-6);
  CHECK(r.lpool <= 1e-6);
  CHECK(r.lnorm <= 1e-6);
  CHECK(r.dihist_grid <= 1e-6);
  CHECK(r.dihist_box <= 1e-6);
}

TEST_CASE("ZCA whitening") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  auto gaussian = [&](Index n, Index d) {
    RowMatrix<double> m(n, d);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  };

  SUBCASE("identity covariance whitens to about the identity") {
    std::vector<double> dist;
    for (Index n : {200, 2000, 50000}) {
      auto w = zca_fit<double>(gaussian(n, 6), 0.0);
      const Eigen::MatrixXd diff = w.transform - Eigen::MatrixXd::Identity(6, 6);
      dist.push_back(diff.jacobiSvd().singularValues()(0));
    }
    CHECK(dist[2] < dist[0]);
    CHECK(dist[2] < 0.05);
  }
  SUBCASE("symmetric transform") {
    RowMatrix<double> p = gaussian(300, 5);
    p.col(1) += 3.0 * p.col(0);
    auto w = zca_fit<double>(p, 0.1);
    CHECK((w.transform - w.transform.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("whitened covariance of 500 correlated patches") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Random(12, 12) + 2.0 * Eigen::MatrixXd::Identity(12, 12);
    RowMatrix<double> p = gaussian(500, 12) * A.transpose();
    p.rowwise() += Eigen::RowVectorXd::LinSpaced(12, -1.0, 1.0);
    auto w = zca_fit<double>(p, 0.0);
    const RowMatrix<double> z = w.apply(p);
    const RowMatrix<double> centered = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 499.0;
    CHECK((cov - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff() <= 0.15);
  }
  SUBCASE("identical patches are rank deficient") {
    RowMatrix<double> same = RowMatrix<double>::Ones(10, 4);
    try {
      zca_fit<double>(same, 0.1);
      FAIL("expected an error");
    } catch (const PipelineError& e) {
      CHECK(std::string(e.what()).find("rank deficient") != std::string::npos);
    }
    CHECK_THROWS_AS(zca_fit<double>(gaussian(1, 3), 0.0), PipelineError);
  }
}

TEST_CASE("filter generation") {
  SUBCASE("random_uniform filters are centred and unit norm") {
    FilterSpec spec{FilterStrategy::random_uniform, 16, 3, 0.0, 99};
    auto bank = generate_filters<double>(spec, 1);
    REQUIRE(bank.count() == 16);
    for (Index k = 0; k < 16; ++k) {
      CHECK(std::abs(bank.weights.row(k).sum()) <= 1e-9);
      CHECK(std::abs(bank.weights.row(k).norm() - 1.0) <= 1e-9);
    }
    CHECK(generate_filters<double>(spec, 1).weights == bank.weights);
    spec.seed = 100;
    CHECK_FALSE(generate_filters<double>(spec, 1).weights == bank.weights);
  }
  SUBCASE("zca_patches on white data are close to centred raw patches") {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g(0.0, 1.0);
    RowMatrix<double> data(40000, 4);
    for (Index i = 0; i < data.size(); ++i) data.data()[i] = g(rng) + 0.5;
    FilterSpec spec{FilterStrategy::zca_patches, 8, 2, 0.0, 3};
    auto bank = generate_filters<double>(spec, 1, &data);
    const Eigen::RowVectorXd mean = data.colwise().mean();
    for (Index k = 0; k < bank.count(); ++k) {
      double best = 1e300;
      for (Index r = 0; r < data.rows(); ++r) {
        const Eigen::RowVectorXd raw = data.row(r) - mean;
        best = std::min(best, (bank.weights.row(k) - raw).norm() / std::max(raw.norm(), 1e-12));
      }
      CHECK(best < 0.05);
    }
  }
  SUBCASE("zca strategies need data of the right shape") {
    FilterSpec spec{FilterStrategy::zca_projection, 4, 2, 0.1, 3};
    CHECK_THROWS_AS(generate_filters<double>(spec, 1), PipelineError);
    RowMatrix<double> wrong = RowMatrix<double>::Random(50, 5);
    CHECK_THROWS_AS(generate_filters<double>(spec, 1, &wrong), PipelineError);
    RowMatrix<double> ok = RowMatrix<double>::Random(50, 4);
    auto bank = generate_filters<double>(spec, 1, &ok);
    CHECK(bank.count() == 4);
    CHECK(bank.weights.allFinite());
    CHECK_THROWS_AS(generate_filters<double>(FilterSpec{FilterStrategy::random_uniform, 0, 2, 0, 0}, 1), PipelineError);
    CHECK_THROWS_AS(generate_filters<double>(FilterSpec{FilterStrategy::random_uniform, 2, 1, 0, 0}, 1), PipelineError);
  }
}

TEST_CASE("outer filter count") {
  OuterLayer o;
  o.filters.size = 2;
  o.pooling = OuterPooling::dihist_grid;
  o.dihist.grid = 2;
  CHECK(outer_filter_count({20, 20, 1}, o) == 2000);
  o.dihist.grid = 3;
  CHECK(outer_filter_count({20, 20, 1}, o) == 888);

  // 14x14 -> fbncc 13x13 -> lpool(2, stride 1) 12x12 -> lnorm(3) 10x10
  o.pooling = OuterPooling::lpool_lnorm;
  o.lpool = {2, 1, 2.0};
  o.lnorm = {1.0, 3};
  CHECK(outer_filter_count({14, 14, 3}, o) == 160);

  o.pooling = OuterPooling::dihist_box;
  o.dihist.subsample = 1;
  o.dihist.side = 2;
  CHECK_THROWS_AS(outer_filter_count({200, 200, 1}, o), PipelineError);
}

TEST_CASE("feature extraction composes the stages") {
  auto data = make_texture_dataset(2, 12, 1);
  PipelineConfig c = small_config();
  Eigen::MatrixXd feats = extract_features(data.images, c);

  FilterSpec spec = c.outer.filters;
  spec.count = 6;
  auto bank = generate_filters<double>(spec, 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto y = lnorm(lpool(fbncc(data.images[i], bank, c.outer.norm), c.outer.lpool), c.outer.lnorm);
    REQUIRE(y.size() == feats.cols());
    CHECK((feats.row(static_cast<Index>(i)).transpose() - y.flat()).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(extract_features(data.images, c) == feats);
}

TEST_CASE("shape algebra predicts the feature width") {
  std::mt19937_64 rng(15);
  auto uni = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
  auto strategy = [&] { return static_cast<FilterStrategy>(uni(0, 2)); };
  int legal = 0, illegal = 0;
  for (int t = 0; t < 60; ++t) {
    const Index side = uni(8, 20);
    auto data = make_texture_dataset(1, side, static_cast<std::uint64_t>(t), 3);
    PipelineConfig c;
    for (Index l = uni(0, 2); l > 0; --l) {
      InterLayer layer;
      layer.filters = {strategy(), uni(1, 3), uni(2, 4), 0.1, static_cast<std::uint64_t>(t)};
      layer.norm = {1.0, uni(0, 1) == 1, uni(0, 1) == 1};
      layer.pool = {uni(2, 4), uni(1, 2), 2.0};
      c.inter.push_back(layer);
    }
    c.outer.filters = {strategy(), 0, uni(2, 4), 0.1, static_cast<std::uint64_t>(t) + 1};
    c.outer.max_filters = uni(1, 5);
    c.outer.pooling = static_cast<OuterPooling>(uni(0, 2));
    c.outer.lpool = {uni(2, 3), uni(1, 2), 1.5};
    c.outer.lnorm = {1.0, uni(2, 3)};
    c.outer.dihist.grid = uni(2, 3);
    c.outer.dihist.subsample = uni(1, 3);
    c.outer.dihist.side = uni(2, 4);

    Index predicted = -1;
    try {
      predicted = feature_width(c, shape_of(data.images[0]));
    } catch (const PipelineError&) {
    }
    if (predicted < 0) {
      ++illegal;
      CHECK_THROWS_AS(extract_features(data.images, c), PipelineError);
      continue;
    }
    ++legal;
    CHECK(predicted <= kFeatureCap);
    CHECK(extract_features(data.images, c).cols() == predicted);
  }
  CHECK(legal > 20);
  CHECK(illegal > 0);
}

TEST_CASE("feature width never exceeds the cap") {
  std::mt19937_64 rng(16);
  auto uni = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
  int legal = 0;
  for (int t = 0; t < 2000; ++t) {
    PipelineConfig c;
    for (Index l = uni(0, 2); l > 0; --l) {
      InterLayer layer;
      layer.filters = {FilterStrategy::random_uniform, uni(16, 256), uni(2, 10), 0.0, 0};
      layer.pool = {uni(2, 8), uni(1, 2), 2.0};
      c.inter.push_back(layer);
    }
    c.outer.filters.size = uni(2, 10);
    c.outer.pooling = static_cast<OuterPooling>(uni(0, 2));
    c.outer.lpool = {uni(2, 8), uni(1, 2), 2.0};
    c.outer.lnorm = {1.0, c.outer.lpool.size};
    c.outer.dihist.grid = uni(2, 3);
    c.outer.dihist.subsample = uni(1, 3);
    c.outer.dihist.side = uni(2, 8);
    Index width = 0;
    try {
      width = feature_width(c, {32, 32, 1});
    } catch (const PipelineError&) {
      continue;
    }
    ++legal;
    REQUIRE(width <= kFeatureCap);
  }
  CHECK(legal > 200);
  // A real extraction at the cap.
  auto data = make_texture_dataset(1, 32, 2, 2);
  PipelineConfig c = small_config();
  c.outer.max_filters = kFeatureCap;
  Eigen::MatrixXd f = extract_features(data.images, c);
  CHECK(f.cols() <= kFeatureCap);
  CHECK(f.cols() > kFeatureCap - 196);
}

TEST_CASE("linear SVM") {
  SUBCASE("separable toy set") {
    Eigen::MatrixXd X(8, 2);
    X << 0, 0, 1, 0, 0, 1, 1, 1, 4, 4, 5, 4, 4, 5, 5, 5;
    std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
    auto m = train_linear_svm<double>(X, y, {1.0, 0.0});
    CHECK(m.predict(X) == y);
    for (std::size_t i = 1; i < m.objective.size(); ++i) CHECK(m.objective[i] <= m.objective[i - 1]);
  }
  SUBCASE("constant columns fall below the cutoff") {
    Eigen::MatrixXd X(6, 3);
    X << 0, 7, 1, 1, 7, 0, 2, 7, 1, 10, 7, 0, 11, 7, 1, 12, 7, 0;
    std::vector<int> y{0, 0, 0, 1, 1, 1};
    auto m = train_linear_svm<double>(X, y, {1.0, 1e-6});
    CHECK(m.keep == std::vector<bool>{true, false, true});
    CHECK(m.weights.rows() == 2);
    CHECK(m.predict(X) == y);
    CHECK_THROWS_AS(train_linear_svm<double>(X, y, {1.0, 1e6}), PipelineError);
  }
  SUBCASE("three Gaussian blobs five sigma apart") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Vector2d means[3] = {{0, 0}, {5, 0}, {2.5, 5 * std::sqrt(3.0) / 2}};
    auto draw = [&](int per) {
      Eigen::MatrixXd X(3 * per, 2);
      std::vector<int> y;
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per; ++i) {
          X.row(c * per + i) = (means[c] + Eigen::Vector2d(g(rng), g(rng))).transpose();
          y.push_back(c);
        }
      return std::pair{X, y};
    };
    auto [Xtr, ytr] = draw(100);
    auto [Xte, yte] = draw(100);
    auto accuracy = [&](const std::vector<int>& pred) {
      int ok = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == yte[i];
      return ok / static_cast<double>(pred.size());
    };
    // Nearest-mean oracle on the true means.
    std::vector<int> oracle;
    for (Index r = 0; r < Xte.rows(); ++r) {
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if ((Xte.row(r).transpose() - means[c]).norm() < (Xte.row(r).transpose() - means[best]).norm()) best = c;
      oracle.push_back(best);
    }
    CHECK(accuracy(oracle) >= 0.95);
    auto m = train_linear_svm<double>(Xtr, ytr, {1.0, 0.0});
    CHECK(accuracy(m.predict(Xte)) >= 0.95);
    REQUIRE(m.objective.size() > 2);
    for (std::size_t i = 1; i < m.objective.size(); ++i) CHECK(m.objective[i] <= m.objective[i - 1]);
    CHECK(m.gradient_norm <= 1e-5);
  }
  SUBCASE("errors") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 2);
    CHECK_THROWS_AS(train_linear_svm<double>(X, {0, 0, 0, 0}, {1.0, 0.0}), PipelineError);
    CHECK_THROWS_AS(train_linear_svm<double>(X, {0, 2, 0, 2}, {1.0, 0.0}), PipelineError);
    CHECK_THROWS_AS(train_linear_svm<double>(X, {0, 1, 0}, {1.0, 0.0}), PipelineError);
    CHECK_THROWS_AS(train_linear_svm<double>(X, {0, 1, 0, 1}, {0.0, 0.0}), PipelineError);
  }
}

TEST_CASE("pipeline loss") {
  PipelineConfig c = small_config();
  c.outer.max_filters = 16;
  c.outer.pooling = OuterPooling::dihist_grid;
  c.outer.dihist.grid = 3;
  SUBCASE("training set as validation set") {
    auto data = make_texture_dataset(20, 16, 21, 10, 0.1);
    const double loss = evaluate_pipeline_loss(c, data, data);
    CHECK(loss >= 0.0);
    CHECK(loss <= 0.05);
    CHECK(evaluate_pipeline_loss(c, data, data) == loss);
  }
  SUBCASE("held-out textures beat chance") {
    auto train = make_texture_dataset(30, 16, 22);
    auto val = make_texture_dataset(20, 16, 23);
    CHECK(evaluate_pipeline_loss(c, train, val) < 0.5);
  }
  SUBCASE("random labels stay near chance") {
    auto train = make_texture_dataset(40, 16, 24);
    auto val = make_texture_dataset(100, 16, 25);
    std::mt19937_64 rng(26);
    for (auto* set : {&train, &val})
      for (int& y : set->labels) y = std::uniform_int_distribution<int>(0, 9)(rng);
    const double loss = evaluate_pipeline_loss(c, train, val);
    // 1000 validation images: standard error of 0.9 is under 0.01.
    CHECK(loss == doctest::Approx(0.9).epsilon(0.05 / 0.9));
  }
  SUBCASE("stage errors surface as PipelineError") {
    auto data = make_texture_dataset(2, 4, 1);
    c.outer.filters.size = 5;
    CHECK_THROWS_AS(evaluate_pipeline_loss(c, data, data), PipelineError);
  }
}

TEST_CASE("CIFAR-10 batches") {
  hpo::testing::TempDir dir;
  const auto path = dir / "data_batch_1.bin";
  std::vector<unsigned char> bytes(2 * 3073);
  bytes[0] = 3;
  bytes[3073] = 9;
  bytes[1 + 5] = 255;                 // red (0, 5) of image 0
  bytes[1 + 1024 + 32 + 1] = 51;      // green (1, 1)
  bytes[3073 + 1 + 2048 + 1023] = 255;  // blue (31, 31) of image 1
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  ImageSet set = load_cifar10_batch(path);
  REQUIRE(set.size() == 2);
  CHECK(set.labels == std::vector<int>{3, 9});
  CHECK(set.images[0](0, 5, 0) == 1.0);
  CHECK(set.images[0](1, 1, 1) == doctest::Approx(0.2));
  CHECK(set.images[1](31, 31, 2) == 1.0);
  CHECK(set.images[1].pixels().sum() == 1.0);

  auto gray = to_grayscale(set.images[0]);
  CHECK(gray.channels() == 1);
  CHECK(gray(0, 5, 0) == doctest::Approx(0.299));
  CHECK(gray(1, 1, 0) == doctest::Approx(0.587 * 0.2));

  {
    std::ofstream out(dir / "short.bin", std::ios::binary);
    out << "abc";
  }
  CHECK_THROWS_AS(load_cifar10_batch(dir / "short.bin"), DataError);
  bytes[0] = 10;
  {
    std::ofstream out(dir / "badlabel.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_cifar10_batch(dir / "badlabel.bin"), DataError);
  CHECK_THROWS_AS(load_cifar10_train(dir.path()), DataError);
}

TEST_CASE("stratified split") {
  std::vector<int> labels;
  for (int i = 0; i < 600; ++i) labels.push_back(i % 10);
  auto [a, b] = stratified_split(labels, 200, 100, 5);
  CHECK(a.size() == 200);
  CHECK(b.size() == 100);
  std::set<std::size_t> all(a.begin(), a.end());
  all.insert(b.begin(), b.end());
  CHECK(all.size() == 300);
  std::map<int, int> per_class;
  for (auto i : a) ++per_class[labels[i]];
  for (auto [k, n] : per_class) CHECK(n == 20);
  CHECK(stratified_split(labels, 200, 100, 5) == std::pair{a, b});
  CHECK_THROWS_AS(stratified_split(labels, 5000, 0, 5), DataError);
}

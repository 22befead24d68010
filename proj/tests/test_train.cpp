#include "microt/train.hpp"

#include "microt/rng.hpp"

#include <doctest.h>

using namespace microt;

namespace {

/// Two well-separated gaussian blobs in the plane.
FeatureMatrix two_blobs(int per_class, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix fm;
  fm.classes = 2;
  fm.X.resize(2 * per_class, 2);
  for (int i = 0; i < 2 * per_class; ++i) {
    const int c = i < per_class ? 0 : 1;
    const double cx = c == 0 ? -2.0 : 2.0;
    fm.X(i, 0) = cx + rng.normal() * 0.5;
    fm.X(i, 1) = rng.normal() * 0.5;
    fm.y.push_back(c);
  }
  return fm;
}

}  // namespace

TEST_CASE("softmax trainer separates blobs") {
  FeatureMatrix train = two_blobs(100, 1);
  FeatureMatrix test = two_blobs(50, 2);
  SoftmaxModel m = train_softmax(train, 0.5, 30, 16, 3);
  CHECK(accuracy(m, test) >= 0.95);
}

TEST_CASE("full-batch probe separates blobs") {
  FeatureMatrix train = two_blobs(100, 5);
  FeatureMatrix test = two_blobs(50, 6);
  CHECK(linear_probe_accuracy(train, test, 0.5, 100, 1) >= 0.95);
}

TEST_CASE("trainer is deterministic under a fixed seed") {
  FeatureMatrix train = two_blobs(40, 9);
  SoftmaxModel a = train_softmax(train, 0.2, 10, 8, 42);
  SoftmaxModel b = train_softmax(train, 0.2, 10, 8, 42);
  CHECK(a.W == b.W);
  CHECK(a.b == b.b);
}

TEST_CASE("pool_features") {
  Tensor img({2, 2, 2}, {1.0, 2.0, 3.0, 4.0, 10.0, 10.0, 10.0, 10.0});
  Tensor pooled = pool_features(img);
  CHECK(pooled.shape == Shape{2});
  CHECK(pooled.data[0] == doctest::Approx(2.5));
  CHECK(pooled.data[1] == doctest::Approx(10.0));

  Tensor vec({3}, {1.0, 2.0, 3.0});
  CHECK((pool_features(vec).data == vec.data).all());
}

TEST_CASE("feature matrix extraction shape") {
  NetSpec spec = parse_net_spec("conv:1:3:3 relu gap");
  BlockNet net = seeded_init(spec, 4);
  SyntheticSpec sspec;
  sspec.classes = 2;
  sspec.samples_per_class = 5;
  Dataset ds = make_synthetic(sspec, 1);
  FeatureMatrix fm = extract_feature_matrix(net, ds);
  CHECK(fm.count() == 10);
  CHECK(fm.dim() == 3);
  CHECK(fm.classes == 2);
}

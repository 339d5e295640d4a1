#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ctxnorm/kernels.hpp"
#include "ctxnorm/reference.hpp"
#include "test_util.hpp"

using namespace ctxnorm;
using testutil::error_code_of;
using testutil::random_batch;

TEST_CASE("batch construction validates shape and values") {
  CHECK(error_code_of([] { Batch(0, 1, 1, 1); }) == "shape-mismatch");
  CHECK(error_code_of([] { Batch(2, 1, 1, 1, {1.0, 2.0, 3.0}); }) == "shape-mismatch");
  CHECK(error_code_of([] { Batch(1, 2, 1, 1, {1.0, std::nan("")}); }) == "non-finite");
  const Batch x(2, 3, 2, 2);
  CHECK(x.size() == 24);
  CHECK(x.spatial() == 4);
}

TEST_CASE("channel moments on constant and symmetric batches") {
  Batch ones(1, 3, 2, 2);
  for (double& v : ones.data) v = 4.5;
  const Moments m = channel_moments(ones);
  for (int c = 0; c < 3; ++c) {
    CHECK(m.mean[c] == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(m.var[c] == doctest::Approx(0.0).epsilon(1e-12));
  }

  const Batch pair(2, 1, 1, 1, {0.0, 2.0});
  const Moments mp = channel_moments(pair);
  CHECK(mp.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mp.var[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("masked moments match the serial oracle") {
  const Batch x = random_batch(4, 2, 1, 1, 7);
  const std::vector<bool> mask{true, false, true, false};
  const Moments got = channel_moments(x, mask);
  const Moments want = ref::channel_moments(x, mask);
  CHECK(testutil::max_abs_diff(got.mean, want.mean) < 1e-12);
  CHECK(testutil::max_abs_diff(got.var, want.var) < 1e-12);
}

TEST_CASE("moments match the serial oracle on randomized shapes") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const Batch x =
        random_batch(dim(rng), dim(rng), dim(rng), dim(rng), 1000 + trial, -5.0, 5.0);
    const Moments got = channel_moments(x);
    const Moments want = ref::channel_moments(x);
    CHECK(testutil::max_rel_diff(got.mean, want.mean, 1e-6) < 1e-10);
    CHECK(testutil::max_rel_diff(got.var, want.var, 1e-6) < 1e-10);
  }
}

TEST_CASE("group moments match the serial oracle on subsets") {
  const Batch x = random_batch(9, 4, 2, 3, 21);
  const std::vector<int> groups[] = {{0}, {8, 1, 5}, {0, 1, 2, 3, 4, 5, 6, 7, 8}};
  for (const auto& g : groups) {
    const Moments got = group_channel_moments(x, g);
    const Moments want = ref::group_channel_moments(x, g);
    CHECK(testutil::max_abs_diff(got.mean, want.mean) < 1e-12);
    CHECK(testutil::max_abs_diff(got.var, want.var) < 1e-12);
  }
}

TEST_CASE("moment error cases") {
  const Batch x = random_batch(3, 2, 1, 1, 3);
  CHECK(error_code_of([&] { channel_moments(x, std::vector<bool>(3, false)); }) ==
        "empty-selection");
  CHECK(error_code_of([&] { channel_moments(x, std::vector<bool>(2, true)); }) ==
        "shape-mismatch");
  CHECK(error_code_of([&] { group_channel_moments(x, std::vector<int>{}); }) ==
        "empty-selection");

  Batch bad = x;
  bad.data[2] = std::numeric_limits<double>::infinity();
  CHECK(error_code_of([&] { channel_moments(bad); }) == "non-finite");
}

TEST_CASE("standardize centers and scales to unit moments") {
  const Batch x = random_batch(6, 3, 2, 2, 5, -3.0, 3.0);
  const Moments m = channel_moments(x);
  const Batch z = standardize(x, m.mean, m.var, 1e-12);
  const Moments zm = channel_moments(z);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(zm.mean[c]) < 1e-6);
    CHECK(std::abs(zm.var[c] - 1.0) < 1e-4);
  }
}

TEST_CASE("standardize hand case and identity parameters") {
  const Batch pair(2, 1, 1, 1, {0.0, 2.0});
  const Batch z = standardize(pair, {1.0}, {1.0}, 3.0);
  CHECK(z.data[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(z.data[1] == doctest::Approx(0.5).epsilon(1e-12));

  const Batch x = random_batch(3, 2, 1, 1, 9);
  const Batch ident = standardize(x, {0.0, 0.0}, {1.0, 1.0}, 1e-12);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(ident.data[i] == doctest::Approx(x.data[i]).epsilon(1e-9));

  CHECK(error_code_of([&] { standardize(x, {0.0, 0.0}, {1.0, 1.0}, 0.0); }) ==
        "bad-epsilon");
  CHECK(error_code_of([&] { standardize(x, {0.0}, {1.0}, 1e-5); }) == "shape-mismatch");
}

TEST_CASE("affine identity, degenerate scale, hand case") {
  const Batch x = random_batch(4, 2, 2, 1, 13);
  const Batch same = affine(x, {1.0, 1.0}, {0.0, 0.0});
  CHECK(same.data == x.data);

  const Batch flat = affine(x, {0.0, 0.0}, {2.5, -1.0});
  for (int n = 0; n < 4; ++n)
    for (int ih = 0; ih < 2; ++ih) {
      CHECK(flat.at(n, 0, ih, 0) == 2.5);
      CHECK(flat.at(n, 1, ih, 0) == -1.0);
    }

  const Batch vals(3, 1, 1, 1, {0.0, 0.5, 1.0});
  const Batch y = affine(vals, {2.0}, {-1.0});
  CHECK(y.data[0] == -1.0);
  CHECK(y.data[1] == 0.0);
  CHECK(y.data[2] == 1.0);

  CHECK(error_code_of([&] { affine(x, {1.0}, {0.0}); }) == "shape-mismatch");
}

TEST_CASE("standardize and affine match the serial oracle") {
  for (int trial = 0; trial < 20; ++trial) {
    const Batch x = random_batch(5, 3, 2, 2, 300 + trial, -4.0, 4.0);
    const Moments m = channel_moments(x);
    const Batch z = standardize(x, m.mean, m.var, 1e-5);
    const Batch zr = ref::standardize(x, m.mean, m.var, 1e-5);
    CHECK(testutil::max_abs_diff(z.data, zr.data) < 1e-12);

    const ChannelVector scale{1.5, -0.5, 2.0}, shift{0.1, 0.0, -3.0};
    const Batch a = affine(x, scale, shift);
    const Batch ar = ref::affine(x, scale, shift);
    CHECK(testutil::max_abs_diff(a.data, ar.data) < 1e-12);
  }
}

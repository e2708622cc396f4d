#undef CHECK
#include <doctest.h>

#include "memseg/dataset.hpp"
#include "memseg/image_io.hpp"
#include "memseg/memory.hpp"
#include "test_util.hpp"

using namespace memseg;
using memseg::testing::seeded_rand;

namespace {

MemoryPool random_pool(std::int64_t n, std::uint64_t seed) {
  MemoryPool pool;
  pool.f1 = seeded_rand({n, 2, 8, 8}, seed);
  pool.f2 = seeded_rand({n, 4, 4, 4}, seed + 1);
  pool.f3 = seeded_rand({n, 8, 2, 2}, seed + 2);
  return pool;
}

FeaturePyramid random_input(std::int64_t b, std::uint64_t seed) {
  return {seeded_rand({b, 2, 8, 8}, seed), seeded_rand({b, 4, 4, 4}, seed + 1),
          seeded_rand({b, 8, 2, 2}, seed + 2), torch::Tensor()};
}

DifferencePyramid constant_candidate(double total) {
  // One element per scale; total split so that d1 carries all of it.
  return {torch::full({1, 1, 1, 1}, total, torch::kFloat32), torch::zeros({1, 1, 1, 1}),
          torch::zeros({1, 1, 1, 1})};
}

}  // namespace

TEST_SUITE("memory") {
  TEST_CASE("difference of scalar features") {
    MemoryPool pool;
    pool.f1 = torch::full({1, 1, 1, 1}, 1.0f);
    pool.f2 = torch::full({1, 1, 1, 1}, 1.0f);
    pool.f3 = torch::full({1, 1, 1, 1}, 1.0f);
    FeaturePyramid in{torch::full({1, 1, 1, 1}, 3.0f), torch::full({1, 1, 1, 1}, 3.0f),
                      torch::full({1, 1, 1, 1}, 3.0f), {}};
    auto d = difference_all(pool, in);
    REQUIRE(d.size() == 1);
    CHECK(d[0].d1.item<float>() == 2.0f);
    CHECK(d[0].d3.item<float>() == 2.0f);
  }

  TEST_CASE("input equal to a memory item gives a zero difference") {
    auto pool = random_pool(3, 10);
    FeaturePyramid in{pool.f1[1].unsqueeze(0), pool.f2[1].unsqueeze(0), pool.f3[1].unsqueeze(0), {}};
    auto d = difference_all(pool, in);
    CHECK(d[1].d1.abs().sum().item<float>() == 0.0f);
    CHECK(d[1].d2.abs().sum().item<float>() == 0.0f);
    auto best = best_difference(d);
    CHECK(best.index[0][0].item<std::int64_t>() == 1);
  }

  TEST_CASE("difference_all matches elementwise absolute difference") {
    auto pool = random_pool(4, 20);
    auto in = random_input(2, 30);
    auto d = difference_all(pool, in);
    REQUIRE(d.size() == 4);
    for (std::int64_t i = 0; i < 4; ++i) {
      auto a = d[static_cast<std::size_t>(i)].d2.accessor<float, 4>();
      auto pa = pool.f2.accessor<float, 4>();
      auto ia = in.f2.accessor<float, 4>();
      for (int b = 0; b < 2; ++b) {
        for (int c = 0; c < 4; ++c) {
          for (int r = 0; r < 4; ++r) {
            for (int q = 0; q < 4; ++q) {
              CHECK(a[b][c][r][q] == std::abs(pa[i][c][r][q] - ia[b][c][r][q]));
            }
          }
        }
      }
      CHECK(d[static_cast<std::size_t>(i)].d1.min().item<float>() >= 0.0f);
    }
  }

  TEST_CASE("argmin selects the smallest total") {
    std::vector<DifferencePyramid> cands{constant_candidate(5.0), constant_candidate(2.0),
                                         constant_candidate(7.0)};
    auto best = best_difference(cands);
    CHECK(best.index[0][0].item<std::int64_t>() == 1);
    CHECK(best.d1.item<float>() == 2.0f);

    std::vector<DifferencePyramid> single{constant_candidate(4.0)};
    CHECK(best_difference(single).index[0][0].item<std::int64_t>() == 0);

    std::vector<DifferencePyramid> tie{constant_candidate(3.0), constant_candidate(1.0),
                                       constant_candidate(1.0)};
    CHECK(best_difference(tie).index[0][0].item<std::int64_t>() == 1);
    CHECK_THROWS_AS(best_difference(std::vector<DifferencePyramid>{}), Error);
  }

  TEST_CASE("best_difference matches brute-force enumeration") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      auto pool = random_pool(8, 100 + 7 * s);
      auto in = random_input(3, 500 + 7 * s);
      auto listed = best_difference(difference_all(pool, in));
      auto streamed = best_difference(pool, in);
      CHECK(torch::equal(listed.index, streamed.index));
      CHECK(torch::equal(listed.d1, streamed.d1));
      for (std::int64_t b = 0; b < 3; ++b) {
        std::int64_t best = -1;
        double best_sum = 0.0;
        for (std::int64_t i = 0; i < 8; ++i) {
          const double total = memseg::testing::oracle_abs_diff_sum(pool.f1, in.f1, i, b) +
                               memseg::testing::oracle_abs_diff_sum(pool.f2, in.f2, i, b) +
                               memseg::testing::oracle_abs_diff_sum(pool.f3, in.f3, i, b);
          if (best < 0 || total < best_sum) {
            best = i;
            best_sum = total;
          }
        }
        for (int k = 0; k < 3; ++k) CHECK(listed.index[b][k].item<std::int64_t>() == best);
        CHECK(torch::equal(listed.d3[b], (pool.f3[best] - in.f3[b]).abs()));
      }
    }
  }

  TEST_CASE("per-scale selection may pick different items per scale") {
    MemoryPool pool;
    pool.f1 = torch::tensor({0.0f, 10.0f}).view({2, 1, 1, 1});
    pool.f2 = torch::tensor({10.0f, 0.0f}).view({2, 1, 1, 1});
    pool.f3 = torch::tensor({10.0f, 0.0f}).view({2, 1, 1, 1});
    FeaturePyramid in{torch::zeros({1, 1, 1, 1}), torch::zeros({1, 1, 1, 1}),
                      torch::zeros({1, 1, 1, 1}), {}};
    auto global = best_difference(pool, in);
    CHECK(global.index[0][0].item<std::int64_t>() == 1);
    MemoryOptions opts;
    opts.per_scale_argmin = true;
    auto per = best_difference(pool, in, opts);
    CHECK(per.index[0][0].item<std::int64_t>() == 0);
    CHECK(per.index[0][1].item<std::int64_t>() == 1);
  }

  TEST_CASE("shape mismatch is rejected") {
    auto pool = random_pool(2, 1);
    auto in = random_input(1, 2);
    in.f2 = seeded_rand({1, 3, 4, 4}, 3);
    CHECK_THROWS_AS(difference_all(pool, in), Error);
    CHECK_THROWS_AS(best_difference(pool, in), Error);
  }

  TEST_CASE("concatenation doubles channels and splits back exactly") {
    auto in = random_input(2, 40);
    auto pool = random_pool(3, 41);
    auto di = best_difference(pool, in);
    auto ci = concat_info(in, di);
    CHECK(ci.c1.size(1) == 4);
    CHECK(ci.c2.size(1) == 8);
    CHECK(ci.c3.size(1) == 16);
    CHECK(torch::equal(ci.c1.slice(1, 0, 2), in.f1));
    CHECK(torch::equal(ci.c1.slice(1, 2, 4), di.d1));
    CHECK(torch::equal(ci.c3.slice(1, 8, 16), di.d3));

    DifferenceInfo zero{torch::zeros_like(in.f1), torch::zeros_like(in.f2), torch::zeros_like(in.f3), {}};
    auto cz = concat_info(in, zero);
    CHECK(cz.c2.slice(1, 4, 8).abs().sum().item<float>() == 0.0f);

    FeaturePyramid big{seeded_rand({2, 64, 64, 64}, 1), seeded_rand({2, 128, 32, 32}, 2),
                       seeded_rand({2, 256, 16, 16}, 3), {}};
    DifferenceInfo dbig{big.f1, big.f2, big.f3, {}};
    CHECK(concat_info(big, dbig).c1.size(1) == 128);

    DifferenceInfo bad{seeded_rand({2, 2, 4, 4}, 9), di.d2, di.d3, {}};
    CHECK_THROWS_AS(concat_info(in, bad), Error);
  }

  TEST_CASE("attention maps of zero and constant differences") {
    DifferenceInfo zero{torch::zeros({1, 4, 16, 16}), torch::zeros({1, 8, 8, 8}),
                        torch::zeros({1, 16, 4, 4}), {}};
    auto mz = attention_maps(zero);
    CHECK(mz.m1.abs().sum().item<float>() == 0.0f);
    CHECK(mz.m2.abs().sum().item<float>() == 0.0f);
    CHECK(mz.m3.abs().sum().item<float>() == 0.0f);

    const float c = 0.7f;
    DifferenceInfo cst{torch::full({1, 4, 16, 16}, c), torch::full({1, 8, 8, 8}, c),
                       torch::full({1, 16, 4, 4}, c), {}};
    auto mc = attention_maps(cst);
    CHECK(memseg::testing::max_abs_diff(mc.m3, torch::full({1, 1, 4, 4}, c)) < 1e-6);
    CHECK(memseg::testing::max_abs_diff(mc.m2, torch::full({1, 1, 8, 8}, c * c)) < 1e-6);
    CHECK(memseg::testing::max_abs_diff(mc.m1, torch::full({1, 1, 16, 16}, c * c * c)) < 1e-6);
  }

  TEST_CASE("attention maps match the step-by-step oracle") {
    for (std::uint64_t s = 0; s < 10; ++s) {
      DifferenceInfo di{seeded_rand({2, 3, 8, 12}, s), seeded_rand({2, 5, 4, 6}, s + 50),
                        seeded_rand({2, 7, 2, 3}, s + 99), {}};
      auto maps = attention_maps(di);
      CHECK(maps.m1.sizes() == torch::IntArrayRef({2, 1, 8, 12}));
      for (std::int64_t b = 0; b < 2; ++b) {
        auto o = memseg::testing::oracle_attention(di.d1, di.d2, di.d3, b);
        auto m1 = maps.m1[b][0].contiguous();
        auto a = m1.accessor<float, 2>();
        double worst = 0.0;
        for (int r = 0; r < 8; ++r) {
          for (int q = 0; q < 12; ++q) worst = std::max(worst, std::abs(a[r][q] - o.m1[r * 12 + q]));
        }
        CHECK(worst < 1e-6);
      }
    }
  }

  TEST_CASE("upsampling matches the half-pixel bilinear oracle") {
    auto x = seeded_rand({1, 1, 3, 5}, 8, torch::kFloat64);
    auto y = upsample_bilinear(x, 6, 10);
    std::vector<double> src(x.data_ptr<double>(), x.data_ptr<double>() + 15);
    auto o = memseg::testing::oracle_bilinear(src, 3, 5, 6, 10);
    auto ya = y.contiguous();
    for (int k = 0; k < 60; ++k) CHECK(ya.data_ptr<double>()[k] == doctest::Approx(o[k]).epsilon(1e-12));
  }

  TEST_CASE("pool sampling is deterministic and exhaustive at full size") {
    auto a = sample_pool_indices(20, 5, 3);
    auto b = sample_pool_indices(20, 5, 3);
    CHECK(a == b);
    auto all = sample_pool_indices(7, 7, 1);
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(sample_pool_indices(3, 4, 0), Error);
  }

  TEST_CASE("build_pool stacks frozen features of sampled images") {
    memseg::testing::TempDir dir("pool");
    for (int i = 0; i < 4; ++i) {
      cv::Mat m(32, 32, CV_8UC3);
      cv::randu(m, 0, 255);
      memseg::testing::write_png(dir / ("c/train/good/" + std::to_string(i) + ".png"), m);
    }
    auto train = scan_dataset(dir.path(), "c", Split::kTrain);
    auto enc = make_toy_encoder(1, 4);
    auto pool = build_pool(enc, train, 4, 32, 9);
    CHECK(pool.size() == 4);
    CHECK(pool.f1.sizes() == torch::IntArrayRef({4, 4, 8, 8}));
    CHECK(pool.sources.size() == 4);
    auto again = build_pool(enc, train, 2, 32, 9);
    auto again2 = build_pool(enc, train, 2, 32, 9);
    CHECK(again.sources == again2.sources);
    CHECK(torch::equal(again.f3, again2.f3));
    CHECK_THROWS_AS(build_pool(enc, train, 5, 32, 9), Error);
  }
}

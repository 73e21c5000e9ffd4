#include "doctest.h"

#include <cmath>

#include "ldt/batchnorm.hpp"
#include "ldt/rng.hpp"
#include "support/oracles.hpp"

using namespace ldt;

namespace {

Tensor random_tensor(Rng& rng, Shape s, double lo = -1.0, double hi = 1.0) {
    Tensor t(s);
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform_open(lo, hi));
    return t;
}

}  // namespace

TEST_CASE("train mode normalizes to zero mean unit variance") {
    Rng rng(1);
    Tensor in = random_tensor(rng, Shape{2, 4, 4, 3}, -2.0, 3.0);
    BatchNormParams p = BatchNormParams::identity(3);
    Tensor out = batchnorm_forward(in, p, Mode::Train, nullptr);
    oracle::ChannelStats st = oracle::channel_stats(out);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::fabs(st.mean[static_cast<size_t>(c)]) < 1e-4);
        CHECK(st.var[static_cast<size_t>(c)] == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("train mode matches the two-pass statistics oracle") {
    Rng rng(2);
    Tensor in = random_tensor(rng, Shape{2, 3, 5, 4}, -1.0, 4.0);
    BatchNormParams p = BatchNormParams::identity(4);
    for (auto& g : p.gamma) g = static_cast<float>(rng.uniform_open(0.5, 2.0));
    for (auto& b : p.beta_shift) b = static_cast<float>(rng.uniform_open(-1.0, 1.0));
    BatchNormParams snapshot = p;
    Tensor out = batchnorm_forward(in, p, Mode::Train, nullptr);

    oracle::ChannelStats st = oracle::channel_stats(in);
    const Shape& s = in.shape();
    for (int64_t b = 0; b < s.b; ++b)
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x)
                for (int64_t c = 0; c < s.c; ++c) {
                    size_t ci = static_cast<size_t>(c);
                    double norm = (static_cast<double>(in.at(b, y, x, c)) - st.mean[ci]) /
                                  std::sqrt(st.var[ci] +
                                            static_cast<double>(snapshot.epsilon));
                    double want = static_cast<double>(snapshot.gamma[ci]) * norm +
                                  static_cast<double>(snapshot.beta_shift[ci]);
                    CHECK(std::fabs(static_cast<double>(out.at(b, y, x, c)) - want) <=
                          1e-5);
                }

    // Running statistics blend with the configured momentum.
    for (int64_t c = 0; c < 4; ++c) {
        size_t ci = static_cast<size_t>(c);
        double want_mean = 0.9 * static_cast<double>(snapshot.running_mean[ci]) +
                           0.1 * st.mean[ci];
        double want_var = 0.9 * static_cast<double>(snapshot.running_var[ci]) +
                          0.1 * st.var[ci];
        CHECK(static_cast<double>(p.running_mean[ci]) ==
              doctest::Approx(want_mean).epsilon(1e-5));
        CHECK(static_cast<double>(p.running_var[ci]) ==
              doctest::Approx(want_var).epsilon(1e-5));
    }
}

TEST_CASE("eval mode with identity statistics is near identity") {
    Rng rng(3);
    Tensor in = random_tensor(rng, Shape{1, 4, 4, 2});
    BatchNormParams p = BatchNormParams::identity(2);
    Tensor out = batchnorm_forward(in, p, Mode::Eval, nullptr);
    for (int64_t i = 0; i < in.size(); ++i)
        CHECK(std::fabs(out.data()[i] - in.data()[i]) <= 1e-4);
    // Eval mode must not touch the running statistics.
    CHECK(p.running_mean[0] == 0.0f);
    CHECK(p.running_var[0] == 1.0f);
}

TEST_CASE("eval mode applies the affine transform from running stats") {
    Tensor in(Shape{1, 1, 2, 1}, {3.0f, 5.0f});
    BatchNormParams p = BatchNormParams::identity(1);
    p.running_mean = {3.0f};
    p.running_var = {4.0f};
    p.gamma = {2.0f};
    p.beta_shift = {10.0f};
    Tensor out = batchnorm_forward(in, p, Mode::Eval, nullptr);
    CHECK(static_cast<double>(out.at(0, 0, 0, 0)) == doctest::Approx(10.0).epsilon(1e-5));
    CHECK(static_cast<double>(out.at(0, 0, 1, 0)) ==
          doctest::Approx(10.0 + 2.0 * 2.0 / std::sqrt(4.0 + 1e-5)).epsilon(1e-5));
}

TEST_CASE("degenerate train batches are rejected") {
    Tensor in(Shape{1, 1, 1, 3});
    BatchNormParams p = BatchNormParams::identity(3);
    CHECK_THROWS_AS(batchnorm_forward(in, p, Mode::Train, nullptr), Error);
    // The same extents are fine in eval mode.
    CHECK_NOTHROW(batchnorm_forward(in, p, Mode::Eval, nullptr));
}

TEST_CASE("parameter validation") {
    Rng rng(4);
    Tensor in = random_tensor(rng, Shape{1, 2, 2, 3});
    BatchNormParams p = BatchNormParams::identity(2);  // wrong channel count
    CHECK_THROWS_AS(batchnorm_forward(in, p, Mode::Train, nullptr), Error);
    BatchNormParams bad_eps = BatchNormParams::identity(3);
    bad_eps.epsilon = 0.0f;
    CHECK_THROWS_AS(batchnorm_forward(in, bad_eps, Mode::Train, nullptr), Error);
    BatchNormParams bad_var = BatchNormParams::identity(3);
    bad_var.running_var[1] = -1.0f;
    CHECK_THROWS_AS(batchnorm_forward(in, bad_var, Mode::Eval, nullptr), Error);
}

TEST_CASE("backward requires a train-mode cache") {
    Rng rng(5);
    Tensor in = random_tensor(rng, Shape{1, 3, 3, 2});
    BatchNormParams p = BatchNormParams::identity(2);
    BatchNormCache cache;
    batchnorm_forward(in, p, Mode::Eval, &cache);
    Tensor up = random_tensor(rng, Shape{1, 3, 3, 2});
    try {
        batchnorm_backward(cache, up);
        FAIL("expected a contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Contract);
    }
}

TEST_CASE("zero upstream gradient zeroes every gradient") {
    Rng rng(6);
    Tensor in = random_tensor(rng, Shape{1, 3, 3, 2});
    BatchNormParams p = BatchNormParams::identity(2);
    BatchNormCache cache;
    batchnorm_forward(in, p, Mode::Train, &cache);
    Tensor up(Shape{1, 3, 3, 2});
    BatchNormGrads g = batchnorm_backward(cache, up);
    for (float v : g.input.values()) CHECK(v == 0.0f);
    for (float v : g.gamma) CHECK(v == 0.0f);
    for (float v : g.beta_shift) CHECK(v == 0.0f);
}

TEST_CASE("near-constant input keeps gradients bounded") {
    Tensor in = Tensor::full(Shape{1, 2, 2, 1}, 0.5f);
    in.at(0, 0, 0, 0) = 0.5001f;
    BatchNormParams p = BatchNormParams::identity(1);
    BatchNormCache cache;
    batchnorm_forward(in, p, Mode::Train, &cache);
    Tensor up = Tensor::full(Shape{1, 2, 2, 1}, 1.0f);
    BatchNormGrads g = batchnorm_backward(cache, up);
    CHECK(all_finite(g.input));
    for (float v : g.gamma) CHECK(std::isfinite(v));
    for (float v : g.beta_shift) CHECK(std::isfinite(v));
}

TEST_CASE("backward matches finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        int64_t h = 2 + static_cast<int64_t>(rng.below(3));
        int64_t w = 2 + static_cast<int64_t>(rng.below(3));
        int64_t c = 1 + static_cast<int64_t>(rng.below(3));
        Tensor in = random_tensor(rng, Shape{1, h, w, c}, -1.5, 1.5);
        BatchNormParams base = BatchNormParams::identity(c);
        for (auto& g : base.gamma) g = static_cast<float>(rng.uniform_open(0.5, 1.5));
        for (auto& b : base.beta_shift)
            b = static_cast<float>(rng.uniform_open(-0.5, 0.5));
        Tensor r = random_tensor(rng, Shape{1, h, w, c});

        // Forward mutates the running statistics, so the objective works on
        // a scratch copy each evaluation.
        auto objective = [&]() {
            BatchNormParams scratch = base;
            Tensor out = batchnorm_forward(in, scratch, Mode::Train, nullptr);
            double s = 0.0;
            for (int64_t i = 0; i < out.size(); ++i)
                s += static_cast<double>(out.data()[i]) *
                     static_cast<double>(r.data()[i]);
            return s;
        };

        BatchNormParams scratch = base;
        BatchNormCache cache;
        batchnorm_forward(in, scratch, Mode::Train, &cache);
        BatchNormGrads g = batchnorm_backward(cache, r);
        const double fd_h = 1e-3;

        for (int probe = 0; probe < 5; ++probe) {
            int64_t ii = static_cast<int64_t>(rng.below(
                static_cast<uint64_t>(in.size())));
            double fd = oracle::central_diff(in.data() + ii, objective, fd_h);
            CHECK(oracle::close(static_cast<double>(g.input.data()[ii]), fd, 1e-2, 1e-4));
        }
        for (size_t ci = 0; ci < base.gamma.size(); ++ci) {
            double fd = oracle::central_diff(&base.gamma[ci], objective, fd_h);
            CHECK(oracle::close(static_cast<double>(g.gamma[ci]), fd, 1e-2, 1e-4));
            fd = oracle::central_diff(&base.beta_shift[ci], objective, fd_h);
            CHECK(oracle::close(static_cast<double>(g.beta_shift[ci]), fd, 1e-2, 1e-4));
        }
    }
}

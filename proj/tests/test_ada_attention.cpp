#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "adaradar/ada_attention.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace adaradar;
using testutil::probe;
using testutil::random_tensor;

namespace {

Var vec(std::vector<double> v)
{
    auto n = v.size();
    return constant(Tensor(Shape{n}, std::move(v)));
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

void zero_projections(MultiHeadSelfAttention& m)
{
    for (auto* p : {&m.w_q, &m.w_k, &m.w_v, &m.w_o}) {
        p->mutable_value().fill(0.0);
    }
}

} // namespace

TEST_CASE("sample_columns identity configuration returns the raw columns")
{
    std::mt19937_64 rng(1);
    Var x = constant(random_tensor({3, 4, 5}, rng));
    Var tokens = sample_columns(x, vec({1.0}), vec({0.0}));
    CHECK(tokens.shape() == Shape{5, 12});
    CHECK(bit_identical(tokens.value(), columns_to_tokens(x).value()));
    for (std::size_t j = 0; j < 5; ++j) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t h = 0; h < 4; ++h) {
                CHECK(tokens.value().at(j, c * 4 + h) == x.value().at(c, h, j));
            }
        }
    }
}

TEST_CASE("sample_columns with zero modulation is zero and blocks gradient")
{
    std::mt19937_64 rng(2);
    Parameter x("x", random_tensor({2, 3, 4}, rng));
    Var out = sample_columns(x.var(), vec({0.0, 0.0}), vec({0.0, 1.0}));
    for (double v : out.value().data()) {
        CHECK(v == 0.0);
    }
    probe(out).backward();
    Tensor g_x = x.grad();
    for (double g : g_x.data()) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("sample_columns two-tap example clamps at the last column")
{
    double a = 1.5, b = -2.0, c = 4.25;
    Var x = constant(Tensor(Shape{1, 1, 3}, {a, b, c}));
    Var out = sample_columns(x, vec({0.5, 0.5}), vec({0.0, 1.0}));
    CHECK(out.shape() == Shape{3, 1});
    CHECK(out.value()[0] == (a + b) / 2);
    CHECK(out.value()[1] == (b + c) / 2);
    CHECK(out.value()[2] == c);
}

TEST_CASE("sample_columns matches the hand-written sampling formula")
{
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({2, 3, 6}, rng);
    std::vector<double> theta{0.4, -0.3, 0.9}, delta{0.25, 1.6, -2.3};
    Var out = sample_columns(constant(x), vec(theta), vec(delta));
    CHECK(max_abs_diff(out.value(), oracle::naive_sample_columns(x, theta, delta)) < 1e-14);
}

TEST_CASE("sample_rows mirrors sample_columns")
{
    std::mt19937_64 rng(4);
    Var x = constant(random_tensor({3, 4, 5}, rng));
    CHECK(bit_identical(sample_rows(x, vec({1.0}), vec({0.0})).value(), rows_to_tokens(x).value()));

    Var xt = permute(x, {0, 2, 1});
    Var theta = vec({0.3, 0.5, 0.2}), delta = vec({0.0, 0.7, -1.4});
    CHECK(max_abs_diff(sample_rows(xt, theta, delta).value(),
                       sample_columns(x, theta, delta).value()) == 0.0);

    Tensor zeroed = sample_rows(x, vec({0.0}), vec({0.3})).value();
    for (double v : zeroed.data()) {
        CHECK(v == 0.0);
    }
    CHECK(sample_rows(x, theta, delta).shape() == Shape{4, 15});
}

TEST_CASE("token round trips")
{
    std::mt19937_64 rng(5);
    Var x = constant(random_tensor({3, 4, 5}, rng));
    CHECK(tokens_to_columns(columns_to_tokens(x), 3, 4, 5).value() == x.value());
    CHECK(tokens_to_rows(rows_to_tokens(x), 3, 4, 5).value() == x.value());
}

TEST_CASE("msa on a single token is the output projection of its value")
{
    std::mt19937_64 rng(6);
    MultiHeadSelfAttention msa("m", 8, 2, rng);
    Tensor t = random_tensor({1, 8}, rng);
    Var out = msa.forward(constant(t));
    Tensor expected = oracle::naive_matmul(oracle::naive_matmul(t, msa.w_v.value()), msa.w_o.value());
    CHECK(max_abs_diff(out.value(), expected) < 1e-12);
}

TEST_CASE("msa is permutation equivariant")
{
    std::mt19937_64 rng(7);
    MultiHeadSelfAttention msa("m", 6, 3, rng);
    Tensor t = random_tensor({5, 6}, rng);
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Tensor tp(Shape{5, 6});
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c = 0; c < 6; ++c) {
            tp.at(i, c) = t.at(perm[i], c);
        }
    }
    Tensor out = msa.forward(constant(t)).value();
    Tensor outp = msa.forward(constant(tp)).value();
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c = 0; c < 6; ++c) {
            CHECK(std::abs(outp.at(i, c) - out.at(perm[i], c)) < 1e-12);
        }
    }
}

TEST_CASE("msa with identity projections matches a brute-force two-token reference")
{
    std::mt19937_64 rng(8);
    MultiHeadSelfAttention msa("m", 4, 1, rng);
    Tensor eye(Shape{4, 4}, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        eye.at(i, i) = 1.0;
    }
    for (auto* p : {&msa.w_q, &msa.w_k, &msa.w_v, &msa.w_o}) {
        p->mutable_value() = eye;
    }
    Tensor t(Shape{2, 4}, {0.5, -1.0, 2.0, 0.0, 1.5, 0.25, -0.5, 1.0});
    // q.k^T by hand: <t0,t0> = 5.25, <t0,t1> = -0.5, <t1,t1> = 3.5625; scaled by 1/2.
    double s00 = 5.25 / 2, s01 = -0.5 / 2, s11 = 3.5625 / 2;
    double a00 = 1.0 / (1.0 + std::exp(s01 - s00));
    double a11 = 1.0 / (1.0 + std::exp(s01 - s11));
    Tensor expected(Shape{2, 4});
    for (std::size_t c = 0; c < 4; ++c) {
        expected.at(0, c) = a00 * t.at(0, c) + (1 - a00) * t.at(1, c);
        expected.at(1, c) = (1 - a11) * t.at(0, c) + a11 * t.at(1, c);
    }
    Tensor out = msa.forward(constant(t)).value();
    CHECK(max_abs_diff(out, expected) < 1e-10);
    CHECK(max_abs_diff(out, oracle::naive_attention(t, eye, eye, eye, eye, 1)) < 1e-10);
}

TEST_CASE("msa agrees with the naive attention oracle and rows sum to one")
{
    std::mt19937_64 rng(9);
    for (auto [n, d, s] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
             {3, 8, 2}, {7, 12, 3}, {16, 16, 4}}) {
        MultiHeadSelfAttention msa("m", d, s, rng);
        Tensor t = random_tensor({n, d}, rng);
        std::vector<Tensor> maps;
        Tensor out = msa.forward(constant(t), &maps).value();
        Tensor ref = oracle::naive_attention(t, msa.w_q.value(), msa.w_k.value(), msa.w_v.value(),
                                             msa.w_o.value(), s);
        CHECK(max_abs_diff(out, ref) < 1e-10);
        REQUIRE(maps.size() == s);
        for (const auto& m : maps) {
            for (std::size_t i = 0; i < n; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    row += m.at(i, j);
                }
                CHECK(std::abs(row - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("msa rejects bad configurations")
{
    std::mt19937_64 rng(10);
    CHECK_THROWS_AS(MultiHeadSelfAttention("m", 6, 4, rng), std::invalid_argument);
    MultiHeadSelfAttention msa("m", 4, 2, rng);
    CHECK_THROWS_AS(msa.forward(constant(Tensor(Shape{3, 5}))), std::invalid_argument);
    // Zero tokens cannot even be represented.
    CHECK_THROWS_AS(Tensor(Shape{0, 4}), std::invalid_argument);
}

TEST_CASE("block with zero projections reduces to the sampled input")
{
    std::mt19937_64 rng(11);
    AdaBlockConfig cfg{4, 6, 5, 2, 3, 3, true};
    AdaAttentionBlock block("b", cfg, rng);
    zero_projections(block.column_attention);
    zero_projections(block.row_attention);
    Var x = constant(random_tensor({4, 6, 5}, rng));
    Var cols = tokens_to_columns(sample_columns(x, block.theta_h.var(), block.delta_h.var()), 4, 6, 5);
    Var expected = tokens_to_rows(sample_rows(cols, block.theta_w.var(), block.delta_w.var()), 4, 6, 5);
    CHECK(bit_identical(block.forward(x).value(), expected.value()));
}

TEST_CASE("block preserves shape and token counts")
{
    std::mt19937_64 rng(12);
    for (auto [c, h, w] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{
             {8, 8, 8}, {16, 8, 4}}) {
        AdaBlockConfig cfg{c, h, w, 4, 3, 3, true};
        AdaAttentionBlock block("b", cfg, rng);
        Var x = constant(random_tensor({c, h, w}, rng));
        CHECK(block.forward(x).shape() == Shape{c, h, w});
        CHECK(sample_columns(x, block.theta_h.var(), block.delta_h.var()).dim(0) == w);
        CHECK(sample_rows(x, block.theta_w.var(), block.delta_w.var()).dim(0) == h);
        CHECK(block.column_attention.d_model() == h * c);
        CHECK(block.row_attention.d_model() == w * c);
    }
    AdaBlockConfig bad{3, 5, 4, 4, 3, 3, true};
    CHECK_THROWS_AS(AdaAttentionBlock("b", bad, rng), std::invalid_argument);
    AdaAttentionBlock ok("b", AdaBlockConfig{4, 4, 4, 2, 1, 1, true}, rng);
    CHECK_THROWS_AS(ok.forward(constant(Tensor(Shape{4, 4, 5}))), std::invalid_argument);
}

TEST_CASE("identity sampling reproduces plain axial attention bit for bit")
{
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 r1(seed), r2(seed);
        AdaAttentionBlock adaptive("b", AdaBlockConfig{4, 6, 5, 2, 1, 1, true}, r1);
        AdaAttentionBlock axial("b", AdaBlockConfig{4, 6, 5, 2, 1, 1, false}, r2);
        CHECK(adaptive.theta_h.value()[0] == 1.0);
        CHECK(adaptive.delta_h.value()[0] == 0.0);
        std::mt19937_64 rng(seed + 100);
        Var x = constant(random_tensor({4, 6, 5}, rng));
        CHECK(bit_identical(adaptive.forward(x).value(), axial.forward(x).value()));
    }
}

TEST_CASE("offset ladder and initial modulation")
{
    CHECK(offset_ladder(1) == Tensor(Shape{1}, {0.0}));
    CHECK(offset_ladder(4) == Tensor(Shape{4}, {0.0, 1.0, -1.0, 2.0}));
    std::mt19937_64 rng(13);
    AdaAttentionBlock block("b", AdaBlockConfig{2, 4, 4, 2, 3, 3, true}, rng);
    for (double v : block.theta_h.value().data()) {
        CHECK(v == doctest::Approx(1.0 / 3.0));
    }
    ParameterList ps;
    block.collect(ps);
    CHECK(ps.size() == 12);
    CHECK_NOTHROW(check_unique_names(ps));
}

TEST_CASE("block forward is deterministic and passes grad_check including theta and delta")
{
    std::mt19937_64 rng(14);
    AdaAttentionBlock block("b", AdaBlockConfig{4, 6, 5, 2, 3, 3, true}, rng);
    // Move offsets off the integer breakpoints of the interpolation.
    block.delta_h.mutable_value() = Tensor(Shape{3}, {0.3, 1.2, -0.7});
    block.delta_w.mutable_value() = Tensor(Shape{3}, {-0.4, 0.6, 1.35});
    block.theta_h.mutable_value() = Tensor(Shape{3}, {0.5, 0.3, 0.4});
    Parameter x("x", random_tensor({4, 6, 5}, rng));
    CHECK(bit_identical(block.forward(x.var()).value(), block.forward(x.var()).value()));

    ParameterList ps{&x};
    block.collect(ps);
    auto rep = grad_check([&] { return probe(block.forward(x.var())); }, ps);
    INFO(rep.summary());
    CHECK(rep.passed);
    CHECK(rep.checked == count_scalars(ps));
}

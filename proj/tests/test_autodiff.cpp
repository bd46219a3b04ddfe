#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "testutil.hpp"
#include "trajcap/autodiff.hpp"
#include "trajcap/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using testutil::check_gradients;
using testutil::rand_t;
using trajcap::Rng;
using trajcap::Tensor;
using trajcap::ad::Tape;
using trajcap::ad::Var;

TEST_CASE("add values and gradients") {
    Rng rng(1);
    Tensor a = rand_t({4}, rng), b = rand_t({4}, rng), c = rand_t({4}, rng);
    Tensor w = rand_t({4}, rng);
    {
        Tape t;
        Var s = t.add({t.leaf(a), t.leaf(b), t.leaf(c)});
        for (int i = 0; i < 4; ++i) CHECK(t.value(s)[i] == doctest::Approx(a[i] + b[i] + c[i]));
    }
    check_gradients({a, b, c}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.add({v[0], v[1], v[2]}), t.leaf(w));
    });
    check_gradients({a, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.add(v[0], v[1]), t.leaf(w));
    });
}

TEST_CASE("sub and mul gradients") {
    Rng rng(2);
    Tensor a = rand_t({5}, rng), b = rand_t({5}, rng), w = rand_t({5}, rng);
    check_gradients({a, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.sub(v[0], v[1]), t.leaf(w));
    });
    check_gradients({a, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.mul(v[0], v[1]), t.leaf(w));
    });
}

TEST_CASE("affine value and gradient") {
    Rng rng(3);
    Tensor a = rand_t({3}, rng), w = rand_t({3}, rng);
    {
        Tape t;
        Var y = t.affine(t.leaf(a), 2.5, -0.75);
        for (int i = 0; i < 3; ++i) CHECK(t.value(y)[i] == doctest::Approx(2.5 * a[i] - 0.75));
    }
    check_gradients({a}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.affine(v[0], 2.5, -0.75), t.leaf(w));
    });
}

TEST_CASE("sigmoid and tanh") {
    Rng rng(4);
    Tensor a = rand_t({6}, rng, 2.0), w = rand_t({6}, rng);
    {
        Tape t;
        Var y = t.sigmoid(t.leaf(Tensor::from({1}, {0.0})));
        CHECK(t.value(y)[0] == doctest::Approx(0.5));
    }
    check_gradients({a}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.sigmoid(v[0]), t.leaf(w));
    });
    check_gradients({a}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.tanh(v[0]), t.leaf(w));
    });
}

TEST_CASE("matvec value and gradients") {
    Rng rng(5);
    Tensor m = rand_t({3, 4}, rng), x = rand_t({4}, rng), w = rand_t({3}, rng);
    {
        Tape t;
        Var y = t.matvec(t.leaf(m), t.leaf(x));
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (int j = 0; j < 4; ++j) s += m.at(i, j) * x.at(j);
            CHECK(t.value(y)[i] == doctest::Approx(s));
        }
    }
    check_gradients({m, x}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.matvec(v[0], v[1]), t.leaf(w));
    });
    Tape t;
    CHECK_THROWS_AS(t.matvec(t.leaf(Tensor({2, 3})), t.leaf(Tensor({2}))),
                    std::invalid_argument);
}

TEST_CASE("dot gradients") {
    Rng rng(6);
    Tensor a = rand_t({7}, rng), b = rand_t({7}, rng);
    check_gradients({a, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(v[0], v[1]);
    });
}

TEST_CASE("conv2d_same identity kernel reproduces input") {
    // 1x1 kernel with identity channel mixing is a per-pixel copy.
    Rng rng(7);
    Tensor x = rand_t({3, 4, 2}, rng);
    Tensor k = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
    Tape t;
    Var y = t.conv2d_same(t.leaf(x), t.leaf(k));
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(t.value(y)[i] == doctest::Approx(x[i]));
}

TEST_CASE("conv2d_same zero-pads the border") {
    // All-ones 3x3 kernel on an all-ones 3x3 single-channel map: interior
    // location sees 9 contributions, corners see 4.
    Tensor x({3, 3, 1}, 1.0);
    Tensor k({3, 3, 1, 1}, 1.0);
    Tape t;
    Var y = t.conv2d_same(t.leaf(x), t.leaf(k));
    CHECK(t.value(y).at(1, 1, 0) == doctest::Approx(9.0));
    CHECK(t.value(y).at(0, 0, 0) == doctest::Approx(4.0));
    CHECK(t.value(y).at(0, 1, 0) == doctest::Approx(6.0));
}

TEST_CASE("conv2d_same gradients") {
    Rng rng(8);
    Tensor x = rand_t({3, 3, 2}, rng), k = rand_t({3, 3, 2, 2}, rng);
    Tensor w = rand_t({3 * 3 * 2}, rng);
    check_gradients({x, k}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.reshape(t.conv2d_same(v[0], v[1]), {18}), t.leaf(w));
    });
    Tape t;
    CHECK_THROWS_AS(t.conv2d_same(t.leaf(Tensor({3, 3, 2})), t.leaf(Tensor({2, 2, 2, 1}))),
                    std::invalid_argument);
}

TEST_CASE("reshape, concat, row gradients") {
    Rng rng(9);
    Tensor a = rand_t({2, 3}, rng), b = rand_t({4}, rng);
    Tensor w = rand_t({10}, rng), wr = rand_t({3}, rng);
    check_gradients({a, b}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.concat({v[0], v[1]}), t.leaf(w));
    });
    check_gradients({a}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.row(v[0], 1), t.leaf(wr));
    });
    Tape t;
    Var m = t.leaf(a);
    CHECK_THROWS_AS(t.row(m, 2), std::invalid_argument);
    CHECK_THROWS_AS(t.reshape(m, {7}), std::invalid_argument);
}

TEST_CASE("softmax values") {
    Tape t;
    Var y = t.softmax(t.leaf(Tensor::from({2}, {0.0, std::log(3.0)})));
    CHECK(t.value(y)[0] == doctest::Approx(0.25));
    CHECK(t.value(y)[1] == doctest::Approx(0.75));
    // Shift invariance.
    Var y2 = t.softmax(t.leaf(Tensor::from({2}, {100.0, 100.0 + std::log(3.0)})));
    CHECK(t.value(y2)[0] == doctest::Approx(0.25));
}

TEST_CASE("softmax gradients") {
    Rng rng(10);
    Tensor a = rand_t({5}, rng, 2.0), w = rand_t({5}, rng);
    check_gradients({a}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.softmax(v[0]), t.leaf(w));
    });
}

TEST_CASE("softmax_last normalises every location") {
    Rng rng(11);
    Tensor a = rand_t({2, 3, 4}, rng, 3.0);
    Tape t;
    Var y = t.softmax_last(t.leaf(a));
    for (int h = 0; h < 2; ++h) {
        for (int w = 0; w < 3; ++w) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) {
                double p = t.value(y).at(h, w, k);
                CHECK(p > 0.0);
                s += p;
            }
            CHECK(s == doctest::Approx(1.0));
        }
    }
    Tensor wv = rand_t({24}, rng);
    check_gradients({a}, [&](Tape& t2, const std::vector<Var>& v) {
        return t2.dot(t2.reshape(t2.softmax_last(v[0]), {24}), t2.leaf(wv));
    });
}

TEST_CASE("cross_entropy value and gradient") {
    Tensor logits = Tensor::from({3}, {1.0, -2.0, 0.5});
    {
        Tape t;
        Var l = t.cross_entropy(t.leaf(logits), 2);
        double lse = std::log(std::exp(1.0) + std::exp(-2.0) + std::exp(0.5));
        CHECK(t.value(l)[0] == doctest::Approx(lse - 0.5));
    }
    check_gradients({logits}, [&](Tape& t, const std::vector<Var>& v) {
        return t.cross_entropy(v[0], 2);
    });
    Tape t;
    CHECK_THROWS_AS(t.cross_entropy(t.leaf(logits), 3), std::invalid_argument);
}

TEST_CASE("convex_combine value and gradients") {
    Rng rng(12);
    Tensor wts = Tensor::from({3}, {0.2, 0.5, 0.3});
    Tensor f1 = rand_t({2, 2}, rng), f2 = rand_t({2, 2}, rng), f3 = rand_t({2, 2}, rng);
    Tensor w = rand_t({4}, rng);
    {
        Tape t;
        Var y = t.convex_combine(t.leaf(wts), {t.leaf(f1), t.leaf(f2), t.leaf(f3)});
        for (std::int64_t i = 0; i < 4; ++i) {
            CHECK(t.value(y)[i] == doctest::Approx(0.2 * f1[i] + 0.5 * f2[i] + 0.3 * f3[i]));
        }
    }
    check_gradients({wts, f1, f2, f3}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.reshape(t.convex_combine(v[0], {v[1], v[2], v[3]}), {4}), t.leaf(w));
    });
}

TEST_CASE("vlad value matches a direct triple loop") {
    Rng rng(13);
    Tensor x = rand_t({2, 3, 4}, rng), a = rand_t({2, 3, 2}, rng, 0.5);
    Tensor c = rand_t({2, 4}, rng);
    Tape t;
    Var y = t.vlad(t.leaf(x), t.leaf(a), t.leaf(c));
    for (int k = 0; k < 2; ++k) {
        for (int d = 0; d < 4; ++d) {
            double s = 0.0;
            for (int h = 0; h < 2; ++h) {
                for (int w = 0; w < 3; ++w) {
                    s += a.at(h, w, k) * (x.at(h, w, d) - c.at(k, d));
                }
            }
            CHECK(t.value(y).at(k, d) == doctest::Approx(s));
        }
    }
}

TEST_CASE("vlad gradients") {
    Rng rng(14);
    Tensor x = rand_t({2, 2, 3}, rng), a = rand_t({2, 2, 2}, rng, 0.5);
    Tensor c = rand_t({2, 3}, rng), w = rand_t({6}, rng);
    check_gradients({x, a, c}, [&](Tape& t, const std::vector<Var>& v) {
        return t.dot(t.reshape(t.vlad(v[0], v[1], v[2]), {6}), t.leaf(w));
    });
}

TEST_CASE("gradients flow through chained ops") {
    // A miniature recurrent-style composition touching most ops at once.
    Rng rng(15);
    Tensor x = rand_t({3}, rng), m = rand_t({3, 3}, rng), w = rand_t({3}, rng);
    check_gradients({x, m, w}, [&](Tape& t, const std::vector<Var>& v) {
        Var h = t.tanh(t.matvec(v[1], v[0]));
        Var z = t.sigmoid(t.matvec(v[1], h));
        Var mixed = t.add(t.mul(z, h), t.mul(t.affine(z, -1.0, 1.0), v[0]));
        return t.dot(t.softmax(mixed), v[2]);
    });
}

TEST_CASE("grad is zero for untouched leaves and backward runs once") {
    Tape t;
    Var a = t.leaf(Tensor::from({2}, {1.0, 2.0}), true);
    Var unused = t.leaf(Tensor::from({2}, {3.0, 4.0}), true);
    Var loss = t.dot(a, a);
    t.backward(loss);
    CHECK(t.grad(unused).max_abs() == 0.0);
    CHECK(t.grad(a)[0] == doctest::Approx(2.0));
    CHECK(t.grad(a)[1] == doctest::Approx(4.0));
    CHECK_THROWS_AS(t.backward(loss), std::invalid_argument);
}

TEST_CASE("no gradient tracking when leaves do not need it") {
    Tape t;
    Var a = t.leaf(Tensor::from({2}, {1.0, 2.0}), false);
    Var y = t.sigmoid(a);
    Var loss = t.dot(y, y);
    t.backward(loss);
    CHECK(t.grad(a).max_abs() == 0.0);
}

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

#include "cymba/checkpoint.hpp"
#include "cymba/ops.hpp"
#include "grad_check.hpp"

using namespace cymba;
using gradcheck::check_gradients;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool rq = true) {
  Array v(numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(lo, hi);
  return Tensor::from_array(std::move(shape), std::move(v), rq);
}

std::vector<Index> random_perm(Index n, Rng& rng) {
  std::vector<Index> p(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
  rng.shuffle(p);
  return p;
}

}  // namespace

TEST_CASE("exp at zero is one") {
  Tensor x = Tensor::zeros({3});
  CHECK(exp(x).value().isApproxToConstant(1.0, 1e-15));
}

TEST_CASE("layer norm of a constant vector is zero") {
  Tensor x = Tensor::full({2, 5}, 3.7);
  Tensor gamma = Tensor::full({5}, 1.0);
  Tensor beta = Tensor::zeros({5});
  Tensor y = layer_norm(x, gamma, beta, 1e-5);
  CHECK(y.value().abs().maxCoeff() == 0.0);
}

TEST_CASE("single voxel impulse response enumerates the kernel") {
  Rng rng(11);
  Tensor x = Tensor::zeros({1, 5, 5, 5});
  const Index cx = 2, cy = 2, cz = 2;
  x.raw_value()[(cx * 5 + cy) * 5 + cz] = 1.0;
  Tensor w = random_tensor({1, 1, 3, 3, 3}, rng);
  Conv3dSpec spec;
  spec.kernel = {3, 3, 3};
  spec.padding = {1, 1, 1};
  Tensor y = conv3d(x, w, nullptr, spec);
  REQUIRE(y.shape() == Shape{1, 5, 5, 5});
  // Response support is the 3x3x3 box centered at the impulse; position
  // c + 1 - k reads kernel tap k (correlation places taps mirrored).
  for (Index px = 0; px < 5; ++px)
    for (Index py = 0; py < 5; ++py)
      for (Index pz = 0; pz < 5; ++pz) {
        const double got = y.value()[(px * 5 + py) * 5 + pz];
        const Index kx = cx + 1 - px, ky = cy + 1 - py, kz = cz + 1 - pz;
        const bool inside =
            kx >= 0 && kx < 3 && ky >= 0 && ky < 3 && kz >= 0 && kz < 3;
        const double want = inside ? w.value()[(kx * 3 + ky) * 3 + kz] : 0.0;
        CHECK(got == doctest::Approx(want).epsilon(1e-15));
      }
}

TEST_CASE("convolution against the direct summation oracle") {
  Rng rng(12);
  const Index ci = 2, co = 3, L = 4, W = 5, H = 3;
  Tensor x = random_tensor({ci, L, W, H}, rng);
  Tensor w = random_tensor({co, ci, 3, 1, 3}, rng);
  Tensor b = random_tensor({co}, rng);
  Conv3dSpec spec;
  spec.kernel = {3, 1, 3};
  spec.dilation = {1, 1, 2};
  spec.padding = {1, 0, 2};
  Tensor y = conv3d(x, w, &b, spec);
  REQUIRE(y.shape() == Shape{co, L, W, H});
  auto xat = [&](Index c, Index px, Index py, Index pz) -> double {
    if (px < 0 || px >= L || py < 0 || py >= W || pz < 0 || pz >= H) return 0.0;
    return x.value()[((c * L + px) * W + py) * H + pz];
  };
  for (Index o = 0; o < co; ++o)
    for (Index px = 0; px < L; ++px)
      for (Index py = 0; py < W; ++py)
        for (Index pz = 0; pz < H; ++pz) {
          double acc = b.value()[o];
          for (Index c = 0; c < ci; ++c)
            for (Index kx = 0; kx < 3; ++kx)
              for (Index kz = 0; kz < 3; ++kz)
                acc += w.value()[(((o * ci + c) * 3 + kx) * 1 + 0) * 3 + kz] *
                       xat(c, px - 1 + kx, py, pz - 2 + 2 * kz);
          const double got = y.value()[((o * L + px) * W + py) * H + pz];
          CHECK(got == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("convolution with the identity kernel is the identity") {
  Rng rng(13);
  const Index c = 3;
  Tensor x = random_tensor({c, 4, 4, 4}, rng);
  Tensor w = Tensor::zeros({c, c, 3, 3, 3});
  for (Index i = 0; i < c; ++i)
    w.raw_value()[((i * c + i) * 9 + 4) * 3 + 1] = 1.0;  // center tap (1,1,1)
  Conv3dSpec spec;
  spec.kernel = {3, 3, 3};
  spec.padding = {1, 1, 1};
  Tensor y = conv3d(x, w, nullptr, spec);
  CHECK((y.value() - x.value()).abs().maxCoeff() == 0.0);
}

TEST_CASE("product rule at a point") {
  Tensor x = Tensor::scalar(3.0, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = mul(x, x);
    tape.backward(y);
  }
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("softmax mass is conserved so its sum has zero gradient") {
  Rng rng(14);
  Tensor v = random_tensor({5, 3}, rng);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sum_all(softmax0(v));
    tape.backward(loss);
  }
  CHECK(v.grad().abs().maxCoeff() < 1e-14);
}

TEST_CASE("permutation routing round-trips bitwise") {
  Rng rng(15);
  for (int it = 0; it < 8; ++it) {
    const Index rows = rng.uniform_int(1, 5);
    const Index cols = rng.uniform_int(1, 24);
    Tensor x = random_tensor({rows, cols}, rng, -10.0, 10.0, false);
    auto perm = random_perm(cols, rng);
    Tensor y = unpermute_cols(permute_cols(x, perm), perm);
    CHECK((y.value() == x.value()).all());
    auto rperm = random_perm(rows, rng);
    Tensor z = unpermute_rows(permute_rows(x, rperm), rperm);
    CHECK((z.value() == x.value()).all());
  }
}

TEST_CASE("shape mismatch failures name the op and both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(mul(a, b), doctest::Contains("(4)"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(sub(a, b), doctest::Contains("(2,3)"), std::invalid_argument);
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                  std::invalid_argument);
}

TEST_CASE("gradients of every primitive match central differences") {
  Rng rng(16);
  int tensors_checked = 0;

  auto unary_case = [&](auto op, double lo, double hi) {
    for (int it = 0; it < 4; ++it) {
      Tensor x = random_tensor({2, 7}, rng, lo, hi);
      check_gradients([&] { return mean_all(op(x)); }, {x}, rng, 6);
      ++tensors_checked;
    }
  };
  unary_case([](const Tensor& t) { return exp(t); }, -1.0, 1.0);
  unary_case([](const Tensor& t) { return log(t); }, 0.5, 2.0);
  unary_case([](const Tensor& t) { return reciprocal(t); }, 0.5, 2.0);
  unary_case([](const Tensor& t) { return square(t); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return neg(t); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return gelu(t); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return softplus(t); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return tanh(t); }, -2.0, 2.0);
  // relu and clamp kink at isolated points; keep probes off the kink.
  unary_case([](const Tensor& t) { return relu(t); }, 0.1, 2.0);
  unary_case([](const Tensor& t) { return clamp(t, -0.5, 0.5); }, 0.6, 2.0);
  unary_case([](const Tensor& t) { return add_scalar(t, 1.7); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return mul_scalar(t, -0.8); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return square(softmax0(t)); }, -2.0, 2.0);
  unary_case([](const Tensor& t) { return sum_all(t); }, -2.0, 2.0);

  auto binary_case = [&](auto op, Shape sa, Shape sb) {
    for (int it = 0; it < 4; ++it) {
      Tensor a = random_tensor(sa, rng);
      Tensor b = random_tensor(sb, rng);
      check_gradients([&] { return mean_all(op(a, b)); }, {a, b}, rng, 6);
      tensors_checked += 2;
    }
  };
  binary_case([](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4}, {3, 4});
  binary_case([](const Tensor& a, const Tensor& b) { return sub(a, b); }, {3, 4}, {3, 4});
  binary_case([](const Tensor& a, const Tensor& b) { return mul(a, b); }, {3, 4}, {3, 4});
  // Broadcast along the leading axis.
  binary_case([](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4}, {4});
  binary_case([](const Tensor& a, const Tensor& b) { return mul(a, b); }, {3, 4}, {4});
  binary_case([](const Tensor& a, const Tensor& b) { return matmul(a, b); }, {3, 4}, {4, 2});
  binary_case([](const Tensor& a, const Tensor& b) { return add_per_row(a, b); }, {3, 4},
              {3});

  for (int it = 0; it < 4; ++it) {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor gamma = random_tensor({6}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({6}, rng);
    check_gradients([&] { return mean_all(square(layer_norm(x, gamma, beta, 1e-5))); },
                    {x, gamma, beta}, rng, 8);
    tensors_checked += 3;
  }
  for (int it = 0; it < 4; ++it) {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor gamma = random_tensor({4}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({4}, rng);
    check_gradients([&] { return mean_all(square(channel_norm(x, gamma, beta, 1e-5))); },
                    {x, gamma, beta}, rng, 8);
    tensors_checked += 3;
  }

  for (int it = 0; it < 3; ++it) {
    Tensor x = random_tensor({2, 4, 3, 4}, rng);
    Tensor w = random_tensor({3, 2, 3, 3, 1}, rng);
    Tensor b = random_tensor({3}, rng);
    Conv3dSpec spec;
    spec.kernel = {3, 3, 1};
    spec.padding = {1, 1, 0};
    check_gradients([&] { return mean_all(square(conv3d(x, w, &b, spec))); }, {x, w, b},
                    rng, 8);
    tensors_checked += 3;
  }
  for (int it = 0; it < 3; ++it) {
    Tensor x = random_tensor({2, 2, 2, 2}, rng);
    Tensor w = random_tensor({2, 3, 2, 2, 2}, rng);
    Tensor b = random_tensor({3}, rng);
    check_gradients(
        [&] { return mean_all(square(conv_transpose3d(x, w, &b, {2, 2, 2}))); },
        {x, w, b}, rng, 8);
    tensors_checked += 3;
  }

  for (int it = 0; it < 3; ++it) {
    Tensor a = random_tensor({2, 5}, rng);
    Tensor b = random_tensor({3, 5}, rng);
    check_gradients([&] { return mean_all(square(concat0({a, b}))); }, {a, b}, rng, 6);
    check_gradients([&] { return mean_all(square(slice0(b, 1, 2))); }, {b}, rng, 4);
    check_gradients([&] { return mean_all(exp(transpose(a))); }, {a}, rng, 4);
    check_gradients([&] { return mean_all(square(reshape(a, {5, 2}))); }, {a}, rng, 4);
    check_gradients([&] { return mean_all(square(repeat_inner(a, 3))); }, {a}, rng, 4);
    tensors_checked += 6;
  }

  for (int it = 0; it < 3; ++it) {
    Tensor x = random_tensor({3, 8}, rng);
    auto perm = random_perm(8, rng);
    check_gradients([&] { return mean_all(square(permute_cols(x, perm))); }, {x}, rng, 4);
    check_gradients([&] { return mean_all(square(unpermute_cols(x, perm))); }, {x}, rng,
                    4);
    tensors_checked += 2;
  }

  std::vector<std::uint16_t> labels = {0, 2, 1, 3, 0, 1};
  for (int it = 0; it < 3; ++it) {
    Tensor scores = random_tensor({4, 6}, rng);
    Tensor wts = random_tensor({4}, rng, 0.2, 2.0);
    check_gradients([&] { return cross_entropy(scores, labels, nullptr); }, {scores},
                    rng, 6);
    check_gradients([&] { return cross_entropy(scores, labels, &wts); }, {scores, wts},
                    rng, 6);
    check_gradients([&] { return lovasz_softmax(softmax0(scores), labels); }, {scores},
                    rng, 6);
    tensors_checked += 4;
  }

  CHECK(tensors_checked >= 100);
}

TEST_CASE("tensor snapshots serialize header then little-endian payload") {
  Tensor t = Tensor::from_array({2, 3}, (Array(6) << 1, -2, 3.5, 0, 42.25, -0.125).finished());
  std::ostringstream out;
  write_tensor(out, t);
  const std::string bytes = out.str();
  REQUIRE(bytes.size() == 4 + 8 + 2 * 8 + 6 * 8);
  CHECK(bytes.substr(0, 4) == "CYT1");
  auto u64_at = [&](size_t off) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(bytes[off + static_cast<size_t>(i)]);
    return v;
  };
  CHECK(u64_at(4) == 2);    // rank
  CHECK(u64_at(12) == 2);   // extents
  CHECK(u64_at(20) == 3);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 28, 8);
  CHECK(first == 1.0);

  std::istringstream in(bytes);
  Tensor back = read_tensor(in);
  CHECK(back.shape() == t.shape());
  CHECK((back.value() == t.value()).all());
}

TEST_CASE("truncated or mislabeled snapshots are rejected") {
  Tensor t = Tensor::from_array({3}, (Array(3) << 1, 2, 3).finished());
  std::ostringstream out;
  write_tensor(out, t);
  std::string bytes = out.str();
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(read_tensor(in), std::runtime_error);
  }
  {
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_AS(read_tensor(in), std::runtime_error);
  }
}

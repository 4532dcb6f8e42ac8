#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "cymba/blocks.hpp"
#include "cymba/diffusion.hpp"
#include "cymba/rng.hpp"
#include "cymba/ssen.hpp"
#include "cymba/vae.hpp"

#include "grad_check.hpp"

using namespace cymba;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array data(numel(shape));
  for (Index i = 0; i < data.size(); ++i) data[i] = rng.uniform(lo, hi);
  return Tensor::from_array(std::move(shape), std::move(data), true);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  return (a.value() - b.value()).abs().maxCoeff();
}

std::vector<Tensor> leaves_of(const ParamStore& ps) {
  std::vector<Tensor> out;
  for (const auto& item : ps.items) out.push_back(item.second);
  return out;
}

// Direct 1-D cross-correlation along one axis of a (C, L, W, H) volume with
// same-extent zero padding, matching the factorized convolution's stages.
Array conv_along_axis(const Array& in, Index cin, Index cout,
                      const std::array<Index, 3>& ext, const Array& w, const Array& b,
                      Index k, Index dil, int axis) {
  const Index L = ext[0], W = ext[1], H = ext[2];
  const Index pad = dil * (k - 1) / 2;
  Array out = Array::Zero(cout * L * W * H);
  auto at = [&](const Array& a, Index c, Index x, Index y, Index z) {
    return a[((c * L + x) * W + y) * H + z];
  };
  for (Index co = 0; co < cout; ++co)
    for (Index x = 0; x < L; ++x)
      for (Index y = 0; y < W; ++y)
        for (Index z = 0; z < H; ++z) {
          double acc = b[co];
          for (Index ci = 0; ci < cin; ++ci)
            for (Index j = 0; j < k; ++j) {
              Index sx = x, sy = y, sz = z;
              (axis == 0 ? sx : axis == 1 ? sy : sz) += dil * j - pad;
              if (sx < 0 || sx >= L || sy < 0 || sy >= W || sz < 0 || sz >= H) continue;
              acc += w[(co * cin + ci) * k + j] * at(in, ci, sx, sy, sz);
            }
          out[((co * L + x) * W + y) * H + z] = acc;
        }
  return out;
}

void make_identity_conv(Conv3& conv, Index c, Index k, int axis) {
  Array& w = conv.w.raw_value();
  w.setZero();
  const Index center = (k - 1) / 2;
  // Weight layout (Cout, Cin, kx, ky, kz); only one kernel axis has extent k.
  for (Index ch = 0; ch < c; ++ch) w[(ch * c + ch) * k + center] = 1.0;
  (void)axis;
  conv.b.raw_value().setZero();
}

}  // namespace

TEST_CASE("linear layers start inside the fan-in bound with zero bias") {
  Rng rng(3);
  Linear lin(7, 5, rng);
  CHECK(lin.w.value().abs().maxCoeff() <= 1.0 / std::sqrt(7.0));
  CHECK(lin.b.value().abs().maxCoeff() == 0.0);
  Linear nobias(3, 2, rng, false);
  CHECK_FALSE(nobias.b.defined());
  Tensor x = random_tensor({4, 3}, rng);
  CHECK(nobias.forward(x).shape() == Shape{4, 2});

  Conv3 conv(3, 4, {3, 3, 3}, rng);
  CHECK(conv.w.value().abs().maxCoeff() <= 1.0 / std::sqrt(81.0));
  CHECK(conv.b.value().abs().maxCoeff() == 0.0);
}

TEST_CASE("strided convolutions require kernel == stride") {
  Rng rng(4);
  CHECK_THROWS_AS(Conv3(2, 2, {3, 3, 3}, rng, {2, 2, 2}), std::invalid_argument);
  CHECK_THROWS_AS(Conv3(2, 2, {4, 1, 1}, rng), std::invalid_argument);
}

TEST_CASE("channel norm zeroes constant channels and standardizes the rest") {
  ChannelNorm3 norm(2);
  Array v(2 * 4);
  v << 1, 2, 3, 4, 5, 5, 5, 5;
  Tensor vol = Tensor::from_array({2, 2, 2, 1}, std::move(v));
  Tensor out = norm.forward(vol);
  const double var = 1.25;
  const double s = 1.0 / std::sqrt(var + 1e-5);
  CHECK(out.value()[0] == doctest::Approx((1 - 2.5) * s).epsilon(1e-12));
  CHECK(out.value()[3] == doctest::Approx((4 - 2.5) * s).epsilon(1e-12));
  for (Index i = 4; i < 8; ++i) CHECK(out.value()[i] == 0.0);
}

TEST_CASE("factorized convolution matches three direct 1-D sweeps") {
  Rng rng(11);
  const Index cin = 2, cout = 3, k = 3, dil = 2;
  DdrBlock ddr(cin, cout, k, dil, rng);
  for (auto& t : {&ddr.along_z.b, &ddr.along_y.b, &ddr.along_x.b})
    for (Index i = 0; i < t->size(); ++i) t->raw_value()[i] = rng.uniform(-0.5, 0.5);

  const std::array<Index, 3> ext{3, 4, 3};
  Tensor vol = random_tensor({cin, ext[0], ext[1], ext[2]}, rng);
  Tensor got = ddr.forward(vol);

  Array h = conv_along_axis(vol.value(), cin, cout, ext, ddr.along_z.w.value(),
                            ddr.along_z.b.value(), k, dil, 2);
  h = conv_along_axis(h, cout, cout, ext, ddr.along_y.w.value(),
                      ddr.along_y.b.value(), k, dil, 1);
  h = conv_along_axis(h, cout, cout, ext, ddr.along_x.w.value(),
                      ddr.along_x.b.value(), k, dil, 0);
  CHECK(got.shape() == Shape{cout, ext[0], ext[1], ext[2]});
  CHECK((got.value() - h).abs().maxCoeff() < 1e-12);
}

TEST_CASE("factorized convolution carries 3 k c^2 weights") {
  Rng rng(5);
  DdrBlock ddr(8, 8, 3, 1, rng);
  ParamStore ps;
  ddr.collect(ps, "ddr");
  Index weights = 0, biases = 0;
  for (const auto& item : ps.items)
    (item.first.ends_with(".w") ? weights : biases) += item.second.size();
  CHECK(weights == 3 * 3 * 8 * 8);
  CHECK(biases == 3 * 8);
}

TEST_CASE("identity kernels make the factorized convolution the identity") {
  Rng rng(6);
  const Index c = 3;
  DdrBlock ddr(c, c, 3, 1, rng);
  make_identity_conv(ddr.along_z, c, 3, 2);
  make_identity_conv(ddr.along_y, c, 3, 1);
  make_identity_conv(ddr.along_x, c, 3, 0);
  Tensor vol = random_tensor({c, 3, 2, 4}, rng);
  CHECK(max_abs_diff(ddr.forward(vol), vol) == 0.0);
}

TEST_CASE("the conv cascade with a zeroed closing conv is the identity") {
  Rng rng(7);
  Cscb cscb(3, 4, 2, rng);
  cscb.tail.zero_init();
  Tensor vol = random_tensor({3, 3, 3, 2}, rng);
  CHECK(max_abs_diff(cscb.forward(vol), vol) == 0.0);
}

TEST_CASE("the multi-conv block with a zeroed projection is the identity") {
  Rng rng(8);
  MultiConvBlock blk(3, rng);
  blk.proj.zero_init();
  Tensor vol = random_tensor({3, 2, 3, 2}, rng);
  CHECK(max_abs_diff(blk.forward(vol), vol) == 0.0);
}

TEST_CASE("the dilated fusion block with zeroed closing convs is the identity") {
  Rng rng(9);
  Ddcb ddcb(2, 3, rng);
  ddcb.d1.along_x.zero_init();
  ddcb.d2.along_x.zero_init();
  ddcb.d3.along_x.zero_init();
  Tensor vol = random_tensor({2, 3, 3, 3}, rng);
  CHECK(max_abs_diff(ddcb.forward(vol), vol) == 0.0);
}

TEST_CASE("blocks preserve or map shapes as documented") {
  Rng rng(10);
  Tensor vol = random_tensor({4, 4, 6, 2}, rng);
  CHECK(Cscb(4, 3, 1, rng).forward(vol).shape() == vol.shape());
  CHECK(Ddcb(4, 3, rng).forward(vol).shape() == vol.shape());
  CHECK(MultiConvBlock(4, rng).forward(vol).shape() == vol.shape());
  CHECK(DdrBlock(4, 7, 3, 1, rng).forward(vol).shape() == Shape{7, 4, 6, 2});

  const Dims d{4, 6, 2};
  ScanOrder ro = make_scan_order(ScanKind::Cartesian, d);
  ScanOrder co = make_scan_order(ScanKind::Cylinder, d);
  CylinderScanBlock blk(4, 3, 0, true, rng);
  CHECK(blk.forward(vol, ro, co, 0).shape() == vol.shape());
}

TEST_CASE("zeroed readout projections reduce the scan branch to its mlp path") {
  Rng rng(12);
  const Index dim = 4, state = 3;
  TripleScanBranch branch(dim, state, rng);
  branch.scan_fwd.c_proj.w.raw_value().setZero();
  branch.scan_bwd.c_proj.w.raw_value().setZero();
  branch.scan_slice.c_proj.w.raw_value().setZero();

  const Dims d{2, 3, 2};
  ScanOrder order = make_scan_order(ScanKind::Cylinder, d);
  Tensor rows = random_tensor({dim, d.volume()}, rng);

  Tensor got = branch.forward(rows, order, 77);

  Tensor tokens = transpose(rows);
  Tensor z = add(branch.ln_in.forward(tokens), tokens);
  Tensor want = transpose(add(branch.mlp.forward(branch.ln_mid.forward(z)), z));
  CHECK(max_abs_diff(got, want) == 0.0);
}

// Re-derives the whole scan branch with plain loops: explicit reordering,
// naive selective scan, hand-rolled layer norm and mlp.
TEST_CASE("the scan branch matches a from-scratch reimplementation") {
  Rng rng(13);
  const Index dim = 4, state = 3;
  const Dims d{3, 2, 2};
  const Index V = d.volume();
  TripleScanBranch branch(dim, state, rng);

  for (ScanKind kind : {ScanKind::Cartesian, ScanKind::Cylinder}) {
    ScanOrder order = make_scan_order(kind, d);
    Tensor rows = random_tensor({dim, V}, rng);
    const std::uint64_t seed = 99;
    Tensor got = branch.forward(rows, order, seed);

    auto ln = [&](const std::vector<double>& tok, const Tensor& gamma,
                  const Tensor& beta) {
      double mean = 0;
      for (double x : tok) mean += x;
      mean /= static_cast<double>(tok.size());
      double var = 0;
      for (double x : tok) var += (x - mean) * (x - mean);
      var /= static_cast<double>(tok.size());
      const double s = 1.0 / std::sqrt(var + 1e-5);
      std::vector<double> out(tok.size());
      for (size_t c = 0; c < tok.size(); ++c)
        out[c] = (tok[c] - mean) * s * gamma.value()[static_cast<Index>(c)] +
                 beta.value()[static_cast<Index>(c)];
      return out;
    };

    // z in storage order: token residual around the input norm.
    std::vector<std::vector<double>> z(static_cast<size_t>(V),
                                       std::vector<double>(static_cast<size_t>(dim)));
    for (Index v = 0; v < V; ++v) {
      std::vector<double> tok(static_cast<size_t>(dim));
      for (Index c = 0; c < dim; ++c) tok[static_cast<size_t>(c)] = rows.value()[c * V + v];
      std::vector<double> n = ln(tok, branch.ln_in.gamma, branch.ln_in.beta);
      for (Index c = 0; c < dim; ++c)
        z[static_cast<size_t>(v)][static_cast<size_t>(c)] =
            n[static_cast<size_t>(c)] + tok[static_cast<size_t>(c)];
    }

    auto scan = [&](const SelectiveTokenSsm& ssm, ScanDirection dir) {
      const std::vector<Index> rho = direction_row_perm(order, dir, seed);
      // seq[q] = z at the q-th visited voxel.
      std::vector<std::vector<double>> seq(static_cast<size_t>(V));
      for (Index q = 0; q < V; ++q)
        seq[static_cast<size_t>(q)] =
            z[static_cast<size_t>(order.perm[static_cast<size_t>(
                rho[static_cast<size_t>(q)])])];
      const Array& wd = ssm.delta_proj.w.value();
      const Array& bd = ssm.delta_proj.b.value();
      const Array& wb = ssm.b_proj.w.value();
      const Array& wc = ssm.c_proj.w.value();
      const Array& alog = ssm.a_log.value();
      std::vector<std::vector<double>> y(static_cast<size_t>(V),
                                         std::vector<double>(static_cast<size_t>(dim)));
      std::vector<double> h(static_cast<size_t>(dim * state), 0.0);
      for (Index q = 0; q < V; ++q) {
        const auto& u = seq[static_cast<size_t>(q)];
        for (Index dd = 0; dd < dim; ++dd) {
          double pre = bd[dd];
          for (Index e = 0; e < dim; ++e) pre += u[static_cast<size_t>(e)] * wd[e * dim + dd];
          const double delta = std::log1p(std::exp(pre));
          double acc = 0;
          for (Index n = 0; n < state; ++n) {
            double bq = 0, cq = 0;
            for (Index e = 0; e < dim; ++e) {
              bq += u[static_cast<size_t>(e)] * wb[e * state + n];
              cq += u[static_cast<size_t>(e)] * wc[e * state + n];
            }
            const double a = -std::exp(alog[dd * state + n]);
            double& hn = h[static_cast<size_t>(dd * state + n)];
            hn = std::exp(delta * a) * hn +
                 zoh_input_factor(delta, a) * bq * u[static_cast<size_t>(dd)];
            acc += cq * hn;
          }
          y[static_cast<size_t>(q)][static_cast<size_t>(dd)] = acc;
        }
      }
      // Scatter back: visited position q came from storage position
      // order.perm[rho[q]].
      std::vector<std::vector<double>> out(static_cast<size_t>(V));
      for (Index q = 0; q < V; ++q)
        out[static_cast<size_t>(order.perm[static_cast<size_t>(
            rho[static_cast<size_t>(q)])])] = y[static_cast<size_t>(q)];
      return out;
    };

    auto fwd = scan(branch.scan_fwd, ScanDirection::Forward);
    auto bwd = scan(branch.scan_bwd, ScanDirection::Backward);
    auto sli = scan(branch.scan_slice, ScanDirection::InterSlice);

    double worst = 0;
    for (Index v = 0; v < V; ++v) {
      std::vector<double> psi(static_cast<size_t>(dim));
      for (Index c = 0; c < dim; ++c)
        psi[static_cast<size_t>(c)] = z[static_cast<size_t>(v)][static_cast<size_t>(c)] +
                                      fwd[static_cast<size_t>(v)][static_cast<size_t>(c)] +
                                      bwd[static_cast<size_t>(v)][static_cast<size_t>(c)] +
                                      sli[static_cast<size_t>(v)][static_cast<size_t>(c)];
      std::vector<double> n = ln(psi, branch.ln_mid.gamma, branch.ln_mid.beta);
      // mlp: fc1 + gelu + fc2, then the token residual.
      const Index hidden = branch.mlp.fc1.w.extent(1);
      std::vector<double> mid(static_cast<size_t>(hidden));
      for (Index o = 0; o < hidden; ++o) {
        double acc = branch.mlp.fc1.b.value()[o];
        for (Index e = 0; e < dim; ++e)
          acc += n[static_cast<size_t>(e)] * branch.mlp.fc1.w.value()[e * hidden + o];
        mid[static_cast<size_t>(o)] = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
      }
      for (Index c = 0; c < dim; ++c) {
        double acc = branch.mlp.fc2.b.value()[c];
        for (Index o = 0; o < hidden; ++o)
          acc += mid[static_cast<size_t>(o)] * branch.mlp.fc2.w.value()[o * dim + c];
        const double want = acc + psi[static_cast<size_t>(c)];
        worst = std::max(worst, std::abs(got.value()[c * V + v] - want));
      }
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("full and ablation blocks draw identical parameter streams") {
  Rng r1(42), r2(42);
  CylinderScanBlock full(3, 2, 1, true, r1);
  CylinderScanBlock abl(3, 2, 1, false, r2);
  CHECK((full.raster.mlp.fc1.w.value() == abl.raster.mlp.fc1.w.value()).all());
  CHECK((full.raster.scan_fwd.a_log.value() == abl.raster.scan_fwd.a_log.value()).all());
  // Both constructors leave the stream at the same point.
  CHECK(r1.uniform(0.0, 1.0) == r2.uniform(0.0, 1.0));
}

TEST_CASE("the ablation block runs the raster branch alone") {
  Rng rng(14);
  const Dims d{2, 2, 2};
  ScanOrder ro = make_scan_order(ScanKind::Cartesian, d);
  ScanOrder co = make_scan_order(ScanKind::Cylinder, d);
  CylinderScanBlock blk(3, 2, 5, false, rng);
  Tensor vol = random_tensor({3, d.L, d.W, d.H}, rng);
  Tensor got = blk.forward(vol, ro, co, 7);
  Tensor want = as_volume(
      blk.raster.forward(as_rows(vol), ro, mix_seed(10, 7)), vol.shape());
  CHECK(max_abs_diff(got, want) == 0.0);
}

TEST_CASE("the full block sums its branch outputs at pinned seeds") {
  Rng rng(15);
  const Dims d{2, 3, 2};
  ScanOrder ro = make_scan_order(ScanKind::Cartesian, d);
  ScanOrder co = make_scan_order(ScanKind::Cylinder, d);
  const int layer = 3;
  CylinderScanBlock blk(3, 2, layer, true, rng);
  Tensor vol = random_tensor({3, d.L, d.W, d.H}, rng);
  const std::uint64_t epoch = 11;
  Tensor got = blk.forward(vol, ro, co, epoch);
  Tensor rows = as_rows(vol);
  Tensor want = add(blk.raster.forward(rows, ro, mix_seed(2 * layer, epoch)),
                    blk.cylinder.forward(rows, co, mix_seed(2 * layer + 1, epoch)));
  CHECK(max_abs_diff(got, as_volume(want, vol.shape())) < 1e-12);
}

TEST_CASE("identical orders and shared weights double the branch output") {
  Rng rng(16);
  const Dims d{3, 4, 1};  // one z-slice: the slice shuffle cannot differ by seed
  ScanOrder ro = make_scan_order(ScanKind::Cartesian, d);
  CylinderScanBlock blk(3, 2, 0, true, rng);
  blk.cylinder = blk.raster;
  Tensor vol = random_tensor({3, d.L, d.W, d.H}, rng);
  Tensor got = blk.forward(vol, ro, ro, 4);
  Tensor one = blk.raster.forward(as_rows(vol), ro, mix_seed(0, 4));
  CHECK(max_abs_diff(got, as_volume(add(one, one), vol.shape())) < 1e-12);
}

TEST_CASE("parameter names stay unique across a whole model") {
  Rng rng(17);
  Denoiser den({4, 4, 2}, 3, 2, {4, 5, 6}, 3, 1, true, rng);
  ParamStore ps;
  den.collect(ps, "denoiser");
  std::set<std::string> names;
  for (const auto& item : ps.items) names.insert(item.first);
  CHECK(names.size() == ps.items.size());
  CHECK(ps.total_size() > 0);
}

TEST_CASE("gradients flow correctly through every composite block") {
  Rng rng(18);

  SUBCASE("factorized convolution") {
    DdrBlock ddr(2, 3, 3, 2, rng);
    ParamStore ps;
    ddr.collect(ps, "ddr");
    Tensor vol = random_tensor({2, 3, 4, 3}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(vol);
    gradcheck::check_gradients([&] { return mean_all(square(ddr.forward(vol))); },
                               leaves, rng, 10);
  }

  SUBCASE("conv cascade") {
    Cscb cscb(2, 3, 1, rng);
    ParamStore ps;
    cscb.collect(ps, "cscb");
    Tensor vol = random_tensor({2, 3, 3, 2}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(vol);
    gradcheck::check_gradients([&] { return mean_all(square(cscb.forward(vol))); },
                               leaves, rng, 10);
  }

  SUBCASE("dilated fusion") {
    Ddcb ddcb(2, 3, rng);
    ParamStore ps;
    ddcb.collect(ps, "ddcb");
    Tensor vol = random_tensor({2, 3, 3, 3}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(vol);
    gradcheck::check_gradients([&] { return mean_all(square(ddcb.forward(vol))); },
                               leaves, rng, 10);
  }

  SUBCASE("scan branch") {
    TripleScanBranch branch(3, 2, rng);
    ParamStore ps;
    branch.collect(ps, "branch");
    const Dims d{2, 2, 2};
    ScanOrder order = make_scan_order(ScanKind::Cylinder, d);
    Tensor rows = random_tensor({3, d.volume()}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(rows);
    gradcheck::check_gradients(
        [&] { return mean_all(square(branch.forward(rows, order, 5))); }, leaves, rng,
        10);
  }

  SUBCASE("cylinder scan block") {
    CylinderScanBlock blk(3, 2, 0, true, rng);
    ParamStore ps;
    blk.collect(ps, "blk");
    const Dims d{2, 2, 2};
    ScanOrder ro = make_scan_order(ScanKind::Cartesian, d);
    ScanOrder co = make_scan_order(ScanKind::Cylinder, d);
    Tensor vol = random_tensor({3, d.L, d.W, d.H}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(vol);
    gradcheck::check_gradients(
        [&] { return mean_all(square(blk.forward(vol, ro, co, 2))); }, leaves, rng, 10);
  }

  // Spatial extents stay above one voxel after every downsample: a channel
  // norm over a single voxel pins its output at beta, which parks the relus
  // on their kink and silences every upstream parameter.
  SUBCASE("sketch encoder") {
    SketchEncoder ssen({8, 8, 8}, 3, 4, rng);
    ParamStore ps;
    ssen.collect(ps);
    Tensor plane = random_tensor({4, 64}, rng, 0.0, 1.0);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(plane);
    gradcheck::check_gradients([&] { return mean_all(square(ssen.forward(plane))); },
                               leaves, rng, 10);
  }

  SUBCASE("scene encoder") {
    VaeEncoder enc(3, 4, 2, rng);
    ParamStore ps;
    enc.collect(ps, "enc");
    Tensor vol = random_tensor({3, 8, 8, 8}, rng, 0.0, 1.0);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(vol);
    gradcheck::check_gradients(
        [&] {
          auto [mean, logvar] = enc.forward(vol);
          return add(mean_all(square(mean)), mean_all(square(logvar)));
        },
        leaves, rng, 10);
  }

  SUBCASE("scene decoder") {
    VaeDecoder dec(3, 4, 2, rng);
    ParamStore ps;
    dec.collect(ps, "dec");
    Tensor z = random_tensor({2, 4, 4, 2}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(z);
    gradcheck::check_gradients([&] { return mean_all(square(dec.forward(z))); },
                               leaves, rng, 10);
  }

  SUBCASE("denoiser") {
    Denoiser den({8, 8, 4}, 3, 2, {4, 5, 6}, 3, 1, true, rng);
    // The output conv starts at zero; spread it out so gradients reach the
    // rest of the stack at first order.
    for (Index i = 0; i < den.conv_out.w.size(); ++i)
      den.conv_out.w.raw_value()[i] = rng.uniform(-0.05, 0.05);
    ParamStore ps;
    den.collect(ps, "den");
    Tensor x_t = random_tensor({3, 8, 8, 4}, rng);
    Tensor cond = random_tensor({2, 8, 8, 4}, rng);
    std::vector<Tensor> leaves = leaves_of(ps);
    leaves.push_back(x_t);
    leaves.push_back(cond);
    gradcheck::check_gradients(
        [&] { return mean_all(square(den.forward(x_t, cond, 7, 1))); }, leaves, rng,
        10);
  }
}

TEST_CASE("the sketch encoder maps a conditioning plane to quarter-scale scores") {
  Rng rng(19);
  const Dims d{8, 8, 4};
  SketchEncoder ssen(d, 5, 8, rng);
  Tensor plane = Tensor::zeros({6, d.L * d.W});
  Tensor scores = ssen.forward(plane);
  CHECK(scores.shape() == Shape{5, 2, 2, 1});
  CHECK(scores.value().isFinite().all());
}

TEST_CASE("column lifting replicates a plane along the vertical axis") {
  Rng rng(20);
  Tensor plane = random_tensor({2, 6}, rng);
  Tensor vol = lift_columns(plane, 2, 3, 2);
  CHECK(vol.shape() == Shape{2, 2, 3, 2});
  for (Index c = 0; c < 2; ++c)
    for (Index x = 0; x < 2; ++x)
      for (Index y = 0; y < 3; ++y)
        for (Index z = 0; z < 2; ++z)
          CHECK(vol.value()[((c * 2 + x) * 3 + y) * 2 + z] ==
                plane.value()[c * 6 + x * 3 + y]);
}

TEST_CASE("step embeddings are sinusoidal and distinguish steps") {
  Tensor e0 = sinusoidal_embedding(0, 8);
  for (Index i = 0; i < 4; ++i) {
    CHECK(e0.value()[i] == 0.0);
    CHECK(e0.value()[4 + i] == 1.0);
  }
  Tensor e7 = sinusoidal_embedding(7, 8);
  Tensor e9 = sinusoidal_embedding(9, 8);
  CHECK((e7.value() - e9.value()).abs().maxCoeff() > 1e-6);
  CHECK_THROWS_AS(sinusoidal_embedding(1, 7), std::invalid_argument);
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include <torch/torch.h>

#include "mccsod/errors.hpp"
#include "mccsod/mccm.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/mccm_scalar.hpp"

using namespace mccsod;

namespace {

void zero_params(torch::nn::Module& m) {
  torch::NoGradGuard g;
  for (auto& p : m.parameters()) p.zero_();
}

// Writes the centre tap of a (possibly larger) kernel; every other tap is zero.
void set_centre(const torch::nn::Conv2d& conv, std::vector<double> taps, double bias) {
  torch::NoGradGuard g;
  conv->weight.zero_();
  const auto k = conv->weight.size(2) / 2;
  for (std::size_t i = 0; i < taps.size(); ++i) conv->weight[0][static_cast<long>(i)][k][k] = taps[i];
  conv->bias.fill_(bias);
}

const oracle::ScalarMccmWeights kWeights{
    0.5, 0.1, 0.7, -0.2,   // channel attention
    1.5, -0.3,             // foreground SA
    -0.8, 0.2,             // edge SA
    0.6, 0.05,             // GIC 1x1
    0.9, -0.1,             // GIC SA
    0.4, 0.02,             // polish fe
    -0.5, 0.3,             // polish bg
    0.7, -0.01,            // polish gic
    {0.3, 0.2, -0.25}, 0.05};

Mccm scalar_module(bool short_connection) {
  auto cfg = MccmConfig::full();
  cfg.short_connection = short_connection;
  Mccm m(1, cfg);
  m->to(torch::kFloat64);
  const auto& w = kWeights;
  torch::NoGradGuard g;
  m->ca->fc1->weight.fill_(w.ca_fc1_w);
  m->ca->fc1->bias.fill_(w.ca_fc1_b);
  m->ca->fc2->weight.fill_(w.ca_fc2_w);
  m->ca->fc2->bias.fill_(w.ca_fc2_b);
  set_centre(m->sa_fg->conv, {w.sa_fg_w}, w.sa_fg_b);
  set_centre(m->sa_edge->conv, {w.sa_edge_w}, w.sa_edge_b);
  set_centre(m->gic_conv, {w.gic_w}, w.gic_b);
  set_centre(m->sa_gic->conv, {w.sa_gic_w}, w.sa_gic_b);
  set_centre(m->polish_fe, {w.polish_fe_w}, w.polish_fe_b);
  set_centre(m->polish_bg, {w.polish_bg_w}, w.polish_bg_b);
  set_centre(m->polish_gic, {w.polish_gic_w}, w.polish_gic_b);
  set_centre(m->fuse, {w.fuse_w[0], w.fuse_w[1], w.fuse_w[2]}, w.fuse_b);
  return m;
}

std::vector<MccmConfig> all_valid_configs() {
  std::vector<MccmConfig> out;
  for (int bits = 0; bits < 32; ++bits) {
    MccmConfig c{bool(bits & 1), bool(bits & 2), bool(bits & 4), bool(bits & 8), bool(bits & 16)};
    try {
      c.validate();
      out.push_back(c);
    } catch (const ConfigError&) {
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("mccm") {
  TEST_CASE("scalar oracle reproduces the frozen reference values") {
    auto t = oracle::scalar_mccm(0.8, kWeights);
    CHECK(t.f_ca == doctest::Approx(0.4299438762749997).epsilon(1e-14));
    CHECK(t.a_f == doctest::Approx(0.5853841366303559).epsilon(1e-14));
    CHECK(t.a_e == doctest::Approx(0.4640732460500419).epsilon(1e-14));
    CHECK(t.a_fe == doctest::Approx(1.049457382680398).epsilon(1e-14));
    CHECK(t.a_b == doctest::Approx(-0.0494573826803979).epsilon(1e-12));
    CHECK(t.a_g == doctest::Approx(0.5931493361286236).epsilon(1e-14));
    CHECK(t.out == doctest::Approx(0.8917304158353985).epsilon(1e-14));
  }

  TEST_CASE("1-channel 1x1 module matches the scalar trace") {
    for (bool skip : {true, false}) {
      auto m = scalar_module(skip);
      auto expect = oracle::scalar_mccm(0.8, kWeights, skip);
      torch::NoGradGuard g;
      auto tr = m->trace(torch::full({1, 1, 1, 1}, 0.8, torch::kFloat64));
      CHECK(tr.f_ca.item<double>() == doctest::Approx(expect.f_ca).epsilon(1e-12));
      CHECK(tr.a_f.values.item<double>() == doctest::Approx(expect.a_f).epsilon(1e-12));
      CHECK(tr.a_e.values.item<double>() == doctest::Approx(expect.a_e).epsilon(1e-12));
      CHECK(tr.a_b.values.item<double>() == doctest::Approx(expect.a_b).epsilon(1e-12));
      CHECK(tr.a_g.values.item<double>() == doctest::Approx(expect.a_g).epsilon(1e-12));
      CHECK(tr.features.item<double>() == doctest::Approx(expect.out).epsilon(1e-12));
    }
  }

  TEST_CASE("purify: zero parameters halve, zero input annihilates") {
    Mccm m(4);
    zero_params(*m);
    torch::NoGradGuard g;
    auto f = torch::randn({2, 4, 6, 6});
    CHECK(torch::allclose(m->purify(f), 0.5 * f));
    CHECK(m->purify(torch::zeros({2, 4, 6, 6})).abs().max().item<double>() == 0.0);
  }

  TEST_CASE("purify composes the 2-channel channel-attention hand case") {
    Mccm m(2, MccmConfig::full(), MccmOptions{1, 7});
    m->to(torch::kFloat64);
    torch::NoGradGuard g;
    m->ca->fc1->weight.copy_(torch::eye(2, torch::kFloat64));
    m->ca->fc2->weight.copy_(torch::eye(2, torch::kFloat64));
    m->ca->fc1->bias.zero_();
    m->ca->fc2->bias.zero_();
    auto f = torch::tensor({2.0, -1.0}, torch::kFloat64).view({1, 2, 1, 1});
    auto f_ca = m->purify(f).view(-1);
    const double s2 = 1.0 / (1.0 + std::exp(-2.0)), sm1 = 1.0 / (1.0 + std::exp(1.0));
    CHECK(f_ca[0].item<double>() == doctest::Approx(2.0 * s2).epsilon(1e-14));
    CHECK(f_ca[1].item<double>() == doctest::Approx(-1.0 * sm1).epsilon(1e-14));
  }

  TEST_CASE("foreground-edge and background maps") {
    auto u = [](double v) { return AttentionMap{torch::full({1, 1, 3, 3}, v, torch::kFloat64), kUnitRange}; };
    CHECK(foreground_edge_map(u(0), u(0)).values.abs().max().item<double>() == 0.0);
    CHECK(torch::all(foreground_edge_map(u(1), u(1)).values == 2.0).item<bool>());
    CHECK(torch::allclose(foreground_edge_map(u(0.3), u(0.4)).values, torch::full({1, 1, 3, 3}, 0.7, torch::kFloat64),
                          0, 1e-15));
    AttentionMap other{torch::zeros({1, 1, 2, 3}), kUnitRange};
    CHECK_THROWS_AS(foreground_edge_map(u(0.1), other), DimensionError);

    auto fe = [](double v) { return AttentionMap{torch::full({1, 1, 2, 2}, v, torch::kFloat64), kForegroundEdgeRange}; };
    CHECK(torch::all(background_map(fe(0)).values == 1.0).item<bool>());
    CHECK(torch::all(background_map(fe(2)).values == -1.0).item<bool>());
    CHECK(torch::all(background_map(fe(0.5)).values == 0.5).item<bool>());
#ifndef NDEBUG
    CHECK_THROWS_AS(background_map(fe(2.5)), ContractError);
#endif
  }

  TEST_CASE("global image map hand cases") {
    MccmConfig cfg{false, false, false, true, true};
    Mccm m(1, cfg);
    m->to(torch::kFloat64);
    zero_params(*m);
    torch::NoGradGuard g;
    auto a0 = m->global_image_map(torch::zeros({1, 1, 4, 4}, torch::kFloat64));
    CHECK(torch::all(a0.values == 0.5).item<bool>());

    set_centre(m->gic_conv, {1.0}, 0.0);
    set_centre(m->sa_gic->conv, {1.0}, -2.0);
    auto f = torch::tensor({1.0, 3.0, 3.0, 1.0}, torch::kFloat64).view({1, 1, 2, 2});
    auto a = m->global_image_map(f);
    CHECK(torch::allclose(a.values, torch::full({1, 1, 2, 2}, 0.5, torch::kFloat64), 0, 1e-15));
  }

  TEST_CASE("global image map is spatially constant away from the SA border") {
    MccmConfig cfg{false, false, false, true, true};
    Mccm m(3, cfg);
    torch::NoGradGuard g;
    auto a = m->global_image_map(torch::randn({1, 3, 16, 16})).values;
    auto interior = a.index({0, 0, torch::indexing::Slice(3, 13), torch::indexing::Slice(3, 13)});
    CHECK((interior.max() - interior.min()).item<double>() < 1e-6);
  }

  TEST_CASE("configuration validation, labels and branch counts") {
    CHECK(all_valid_configs().size() == 27);
    CHECK_THROWS_AS((MccmConfig{false, false, true, false, true}.validate()), ConfigError);
    CHECK_THROWS_AS((MccmConfig{false, false, false, false, false}.validate()), ConfigError);
    CHECK_THROWS_AS(Mccm(4, MccmConfig{false, false, true, true, true}), ConfigError);
    CHECK(MccmConfig::full().label() == "Baseline+FG+EG+BG+GIC");
    CHECK(MccmConfig::baseline().label() == "Baseline");
    CHECK((MccmConfig{true, true, true, true, false}.label()) == "Baseline+FG+EG+BG+GIC w/o original content");
    CHECK(MccmConfig::full().branch_count() == 3);
    CHECK((MccmConfig{true, false, false, true, true}.branch_count()) == 2);
    CHECK(MccmConfig::baseline().is_identity());
  }

  TEST_CASE("disabled branches create no parameters") {
    Mccm base(8, MccmConfig::baseline());
    CHECK(base->parameters().empty());
    Mccm fg(8, MccmConfig{true, false, false, false, true});
    CHECK(fg->sa_edge.is_empty());
    CHECK(fg->polish_bg.is_empty());
    CHECK(fg->gic_conv.is_empty());
    CHECK(fg->fuse->weight.size(1) == 8);
    Mccm full(8);
    CHECK(full->fuse->weight.size(1) == 24);
    CHECK(full->sa_fg->conv->weight.data_ptr() != full->sa_edge->conv->weight.data_ptr());
  }

  TEST_CASE("output shape equals input shape for every valid config") {
    torch::NoGradGuard g;
    auto f = torch::randn({2, 8, 6, 10});
    for (const auto& cfg : all_valid_configs()) {
      CAPTURE(cfg.label());
      Mccm m(8, cfg);
      auto out = m->forward(f);
      CHECK(out.features.sizes() == f.sizes());
      CHECK(out.edge_map.has_value() == cfg.edge);
      if (cfg.edge) CHECK(out.edge_map->values.sizes() == torch::IntArrayRef{2, 1, 6, 10});
    }
  }

  TEST_CASE("baseline is the identity and a zeroed fusion reduces to the skip") {
    torch::NoGradGuard g;
    auto f = torch::randn({1, 8, 5, 5});
    Mccm base(8, MccmConfig::baseline());
    CHECK(torch::equal(base->forward(f).features, f));

    Mccm full(8);
    full->fuse->weight.zero_();
    full->fuse->bias.zero_();
    CHECK(torch::equal(full->forward(f).features, f));
  }

  TEST_CASE("range invariants and exact complement of the background map") {
    torch::manual_seed(11);
    Mccm m(4);
    torch::NoGradGuard g;
    for (int draw = 0; draw < 40; ++draw) {
      auto tr = m->trace(torch::randn({1, 4, 6, 6}) * (1.0 + draw));
      CHECK(tr.a_f.within_range());
      CHECK(tr.a_e.within_range());
      CHECK(tr.a_g.within_range());
      CHECK(tr.a_fe.within_range());
      CHECK(tr.a_b.within_range());
      CHECK(torch::equal(tr.a_b.values, 1.0 - tr.a_fe.values));
    }
  }

  TEST_CASE("global branch multiplies the encoder features, not the purified ones") {
    torch::NoGradGuard g;
    Mccm m(4);
    auto f = torch::randn({1, 4, 6, 6});
    auto tr = m->trace(f);
    CHECK(torch::allclose(tr.f_g, tr.a_g.values * f));
    CHECK(torch::allclose(tr.f_fe, tr.a_fe.values * tr.f_ca));
    CHECK(torch::allclose(tr.f_b, tr.a_b.values * tr.f_ca));
  }

  TEST_CASE("mccm gradients match central differences on 1x2x4x4") {
    torch::manual_seed(5);
    for (const auto& cfg : {MccmConfig::full(), MccmConfig{true, true, true, true, false}}) {
      CAPTURE(cfg.label());
      Mccm m(2, cfg, MccmOptions{1, 3});
      m->to(torch::kFloat64);
      auto probe = torch::randn({1, 2, 4, 4}, torch::kFloat64);
      auto f = [&](const torch::Tensor& x) {
        auto out = m->forward(x);
        return (out.features * probe).sum() + out.edge_map->values.sum();
      };
      auto x = torch::randn({1, 2, 4, 4}, torch::kFloat64);
      CHECK(oracle::relative_error(oracle::analytic_gradient(f, x), oracle::numeric_gradient(f, x)) <= 1e-3);
    }
  }

  TEST_CASE("channel mismatch and wrong rank are dimension errors") {
    Mccm m(4);
    CHECK_THROWS_AS(m->forward(torch::randn({1, 3, 4, 4})), DimensionError);
    CHECK_THROWS_AS(m->forward(torch::randn({4, 4, 4})), DimensionError);
  }
}

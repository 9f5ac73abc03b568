#include <gtest/gtest.h>

#include <cmath>
#include <future>

#include "obscert/sampling.hpp"
#include "obscert/model.hpp"

using namespace obscert;

namespace {

double mean_of(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

double std_of(const Vec& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

TEST(Sampling, StateUniformOverBox) {
  const SystemModel m = cstr_model();
  SubStream s(1, 0, StreamRole::TrueState);
  const std::size_t n = 100000;
  std::vector<Vec> per_comp(3);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = sample_state(m.state_box, s);
    ASSERT_TRUE(m.state_box.contains(x));
    for (int c = 0; c < 3; ++c) per_comp[c].push_back(x[c]);
  }
  for (int c = 0; c < 3; ++c) {
    const double width = m.state_box.hi[c] - m.state_box.lo[c];
    const double se = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mean_of(per_comp[c]), m.state_box.midpoint(c), 3.0 * se);
  }
}

TEST(Sampling, DegenerateBoxAlwaysReturnsCenter) {
  Box box{{0.7, -2.0}, {0.7, -2.0}};
  SubStream s(1, 1, StreamRole::TrueState);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_state(box, s), (Vec{0.7, -2.0}));
}

TEST(Sampling, ParamUniformSupportAndMoments) {
  const Vec p_nom{1.0e4, 4.0e2, 0.55};
  SubStream zero_width(2, 0, StreamRole::TrueParam);
  EXPECT_EQ(sample_param_uniform(p_nom, 0.0, zero_width), p_nom);

  SubStream s(2, 1, StreamRole::TrueParam);
  const std::size_t n = 100000;
  std::vector<Vec> draws(3);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec p = sample_param_uniform(p_nom, 0.05, s);
    EXPECT_GE(p[0], 9500.0);
    EXPECT_LE(p[0], 10500.0);
    for (int c = 0; c < 3; ++c) draws[c].push_back(p[c]);
  }
  for (int c = 0; c < 3; ++c) {
    const double width = 0.1 * p_nom[c];
    const double se = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mean_of(draws[c]), p_nom[c], 3.0 * se);
  }
}

TEST(Sampling, ParamGaussianRelativeStd) {
  const Vec p_nom{1.0e4, 4.0e2, 0.55};
  SubStream zero(3, 0, StreamRole::TrueParam);
  EXPECT_EQ(sample_param_gaussian(p_nom, 0.0, zero), p_nom);

  SubStream s(3, 1, StreamRole::TrueParam);
  const std::size_t n = 100000;
  Vec rel;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec p = sample_param_gaussian(p_nom, 0.2, s);
    rel.push_back(p[1] / p_nom[1]);
  }
  EXPECT_NEAR(std_of(rel), 0.2, 0.01);  // within 5%
}

TEST(Sampling, ParamGaussianSignFlipsAreRedrawnAndCounted) {
  const Vec p_nom{1.0};
  SubStream s(4, 0, StreamRole::TrueParam);
  std::uint32_t rejects = 0;
  for (int i = 0; i < 2000; ++i) {
    const Vec p = sample_param_gaussian(p_nom, 5.0, s, &rejects);
    EXPECT_GT(p[0], 0.0);
  }
  EXPECT_GT(rejects, 0u);  // sigma = 5 flips sign ~42% of the time
}

TEST(Sampling, FourierProfileStaysInBoxAndSaturatesAtZeroAmplitude) {
  const SystemModel m = cstr_model();
  SubStream s(5, 0, StreamRole::InputProfile);
  const Profile flat = sample_input_fourier(m.input_box, 20, 10, 0.0, 0.0, s);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(flat.at(0, k), 0.049);

  for (int rep = 0; rep < 200; ++rep) {
    SubStream sr(5, rep + 1, StreamRole::InputProfile);
    const Profile u = sample_input_fourier(m.input_box, 20, 10, 0.2, 0.249, sr);
    for (std::size_t k = 0; k < 20; ++k) {
      EXPECT_GE(u.at(0, k), 0.049);
      EXPECT_LE(u.at(0, k), 0.449);
    }
  }
}

TEST(Sampling, UniformInputMomentsAndDegenerateBox) {
  const SystemModel m = cstr_model();
  SubStream s(6, 0, StreamRole::InputProfile);
  Vec all;
  for (int rep = 0; rep < 5000; ++rep) {
    const Profile u = sample_input_uniform(m.input_box, 20, s);
    for (std::size_t k = 0; k < 20; ++k) {
      EXPECT_GE(u.at(0, k), 0.049);
      EXPECT_LE(u.at(0, k), 0.449);
      all.push_back(u.at(0, k));
    }
  }
  const double se = 0.4 / std::sqrt(12.0) / std::sqrt(static_cast<double>(all.size()));
  EXPECT_NEAR(mean_of(all), 0.249, 3.0 * se);

  Box degenerate{{0.2}, {0.2}};
  const Profile u = sample_input_uniform(degenerate, 5, s);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(u.at(0, k), 0.2);
}

TEST(Sampling, NoiseZeroLevelAndUniformVariance) {
  SubStream s0(7, 0, StreamRole::NoiseProfile);
  const Profile zero = sample_noise(1, 20, NoiseMode::Uniform, 0.0, s0);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(zero.at(0, k), 0.0);

  SubStream s(7, 1, StreamRole::NoiseProfile);
  const double nu_bar = 0.001;
  double sum_sq = 0.0;
  const std::size_t n = 100000;
  const Profile big = sample_noise(1, n, NoiseMode::Uniform, nu_bar, s);
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_LE(std::abs(big.at(0, k)), nu_bar);
    sum_sq += big.at(0, k) * big.at(0, k);
  }
  EXPECT_NEAR(sum_sq / n, nu_bar * nu_bar / 3.0, 0.05 * nu_bar * nu_bar / 3.0);
}

TEST(Sampling, DrawScenarioDeterministicPerSeedAndId) {
  const SystemModel m = cstr_model();
  SamplingConfig cfg;
  cfg.horizon = 10;
  cfg.master_seed = 99;
  const Scenario a = draw_scenario(m, cfg, 17);
  const Scenario b = draw_scenario(m, cfg, 17);
  EXPECT_EQ(a.q_x, b.q_x);
  EXPECT_EQ(a.q_p, b.q_p);
  EXPECT_EQ(a.q_u, b.q_u);
  EXPECT_EQ(a.q_nu, b.q_nu);
  EXPECT_EQ(a.xi, b.xi);
  EXPECT_EQ(a.p, b.p);

  cfg.master_seed = 100;
  const Scenario c = draw_scenario(m, cfg, 17);
  EXPECT_NE(a.q_x, c.q_x);
}

TEST(Sampling, ScenariosIndependentOfGenerationOrderAndThreads) {
  const SystemModel m = cstr_model();
  SamplingConfig cfg;
  cfg.horizon = 8;
  std::vector<Scenario> forward, backward;
  for (std::uint64_t id = 0; id < 6; ++id) forward.push_back(draw_scenario(m, cfg, id));
  for (std::uint64_t id = 6; id-- > 0;) backward.insert(backward.begin(),
                                                        draw_scenario(m, cfg, id));
  std::vector<std::future<Scenario>> futures;
  for (std::uint64_t id = 0; id < 6; ++id)
    futures.push_back(std::async(std::launch::async,
                                 [&, id] { return draw_scenario(m, cfg, id); }));
  for (std::uint64_t id = 0; id < 6; ++id) {
    const Scenario par = futures[id].get();
    EXPECT_EQ(forward[id].q_x, backward[id].q_x);
    EXPECT_EQ(forward[id].q_x, par.q_x);
    EXPECT_EQ(forward[id].q_nu, par.q_nu);
    EXPECT_EQ(forward[id].p, par.p);
  }
}

TEST(Sampling, DrawsRespectDeclaredSupports) {
  const SystemModel m = cstr_model();
  SamplingConfig cfg;
  cfg.horizon = 12;
  cfg.param_mode = ParamMode::Uniform;
  cfg.rho = 0.05;
  for (std::uint64_t id = 0; id < 300; ++id) {
    const Scenario sc = draw_scenario(m, cfg, id);
    EXPECT_TRUE(m.state_box.contains(sc.q_x));
    EXPECT_TRUE(m.state_box.contains(sc.xi));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GE(sc.q_p[i], 0.95 * m.param_nominal[i]);
      EXPECT_LE(sc.q_p[i], 1.05 * m.param_nominal[i]);
      EXPECT_GE(sc.p[i], 0.95 * m.param_nominal[i]);
      EXPECT_LE(sc.p[i], 1.05 * m.param_nominal[i]);
    }
    for (std::size_t k = 0; k < cfg.horizon; ++k) {
      EXPECT_GE(sc.q_u.at(0, k), 0.049);
      EXPECT_LE(sc.q_u.at(0, k), 0.449);
      EXPECT_LE(std::abs(sc.q_nu.at(0, k)), cfg.noise_level);
    }
  }
}

TEST(Sampling, DegenerateSupportsForceIdenticalPairs) {
  SystemModel m = cstr_model();
  m.state_box = Box{{0.3, 0.15, 0.1}, {0.3, 0.15, 0.1}};
  SamplingConfig cfg;
  cfg.horizon = 5;
  cfg.param_mode = ParamMode::Uniform;
  cfg.rho = 0.0;
  for (std::uint64_t id = 0; id < 20; ++id) {
    const Scenario sc = draw_scenario(m, cfg, id);
    EXPECT_EQ(sc.xi, sc.q_x);
    EXPECT_EQ(sc.p, sc.q_p);
  }
}

TEST(Sampling, GuardRejectionExhaustsAfterConfiguredRedraws) {
  SystemModel m = cstr_model();
  m.state_guard = [](const Vec&) { return false; };  // rejects every draw
  SamplingConfig cfg;
  cfg.horizon = 5;
  cfg.max_redraws = 100;
  try {
    draw_scenario(m, cfg, 3);
    FAIL() << "expected ResampleExhausted";
  } catch (const ResampleExhausted& e) {
    EXPECT_EQ(e.scenario_id, 3u);
  }
}

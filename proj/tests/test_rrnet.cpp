#include <doctest.h>

#include "iprrn/blocks.hpp"
#include "iprrn/errors.hpp"
#include "iprrn/model.hpp"
#include "iprrn/resample.hpp"
#include "iprrn/rrnet.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace iprrn;

namespace {

void randomize(torch::nn::Module& m, double scale = 0.2) {
  torch::NoGradGuard g;
  for (auto& p : m.parameters()) p.copy_(torch::randn_like(p) * scale);
}

HiddenState random_hidden(const ModelConfig& cfg, int64_t h, int64_t w, torch::Dtype dtype = torch::kFloat32) {
  return {torch::rand({1, cfg.hidden_temporal, h, w}, dtype), torch::randn({1, cfg.hidden_spatial, h, w}, dtype)};
}

// Straight-line composition of the block oracles for one recurrent step.
oracle::Map step_oracle(RRNet& net, const HiddenState& h, const torch::Tensor& prev, const torch::Tensor& cur) {
  const auto& cfg = net->cfg;
  auto in = oracle::concat({oracle::from_tensor(cur), oracle::from_tensor(prev), oracle::from_tensor(h.temporal),
                            oracle::from_tensor(h.spatial)});
  auto x = oracle::relu(oracle::conv2d(in, oracle::from_conv(net->entry)));
  for (auto& b : *net->trunk) {
    auto* rdb = b.ptr()->as<ResidualDenseBlockImpl>();
    std::vector<oracle::Conv> stages;
    for (const auto& s : *rdb->stages) {
      stages.push_back(oracle::from_conv(torch::nn::Conv2d(std::dynamic_pointer_cast<torch::nn::Conv2dImpl>(s))));
    }
    x = oracle::residual_dense_block(x, stages, oracle::from_conv(rdb->fusion));
  }
  auto spatial = oracle::conv2d(x, oracle::from_conv(net->head->spatial));
  auto lr = oracle::from_tensor(cur);
  return oracle::add(oracle::bicubic(lr, lr.h * cfg.scale, lr.w * cfg.scale), oracle::pixel_shuffle(spatial, cfg.scale));
}

}  // namespace

TEST_SUITE("step") {
  TEST_CASE("zero parameters reduce the step to bicubic upscaling") {
    auto cfg = testutil::tiny_model();
    RRNet net(cfg);
    zero_parameters(*net);
    auto prev = torch::rand({1, 3, 5, 6}), cur = torch::rand({1, 3, 5, 6});
    auto out = net->step(random_hidden(cfg, 5, 6), prev, cur);
    CHECK(testutil::bit_equal(out.sr, bicubic_resize_to(cur, 10, 12)));
  }

  TEST_CASE("default widths") {
    ModelConfig cfg;
    RRNet net(cfg);
    CHECK(net->entry->weight.size(1) == 182);
    CHECK(net->head->spatial->weight.size(0) == 48);
    CHECK(net->trunk->size() == 10);
    torch::NoGradGuard g;
    auto out = net->step(HiddenState::zeros(cfg, 1, 4, 5), torch::rand({1, 3, 4, 5}), torch::rand({1, 3, 4, 5}));
    CHECK(out.sr.sizes().vec() == std::vector<int64_t>{1, 3, 16, 20});
    CHECK(out.hidden.temporal.size(1) == 128);
    CHECK(out.hidden.spatial.size(1) == 48);
  }

  TEST_CASE("tiny step matches the composed oracle") {
    torch::manual_seed(1);
    auto cfg = testutil::tiny_model();
    RRNet net(cfg);
    randomize(*net);
    auto h = random_hidden(cfg, 4, 4);
    auto prev = torch::rand({1, 3, 4, 4}), cur = torch::rand({1, 3, 4, 4});
    CHECK(oracle::max_abs_diff(step_oracle(net, h, prev, cur), net->step(h, prev, cur).sr) < 1e-5);
  }

  TEST_CASE("sr minus bicubic is the shuffled spatial head") {
    torch::manual_seed(2);
    auto cfg = testutil::tiny_model();
    RRNet net(cfg);
    randomize(*net);
    auto h = random_hidden(cfg, 4, 4, torch::kFloat64);
    net->to(torch::kFloat64);
    auto prev = torch::rand({1, 3, 4, 4}, torch::kFloat64), cur = torch::rand({1, 3, 4, 4}, torch::kFloat64);
    auto out = net->step(h, prev, cur);
    auto residual = out.sr - bicubic_resize_to(cur, 8, 8);
    CHECK((residual - iprrn::pixel_shuffle(out.hidden.spatial, 2)).abs().max().item<double>() < 1e-14);
    CHECK(out.hidden.temporal.min().item<double>() >= 0.0);
  }

  TEST_CASE("mismatched hidden split is a configuration error") {
    auto cfg = testutil::tiny_model();
    RRNet net(cfg);
    auto f = torch::rand({1, 3, 4, 4});
    HiddenState bad{torch::zeros({1, 7, 4, 4}), torch::zeros({1, 12, 4, 4})};
    CHECK_THROWS_AS(net->step(bad, f, f), ConfigError);
    HiddenState wrong_res{torch::zeros({1, 8, 3, 4}), torch::zeros({1, 12, 3, 4})};
    CHECK_THROWS_AS(net->step(wrong_res, f, f), ConfigError);
    CHECK_THROWS_AS(net->step(HiddenState::zeros(cfg, 1, 4, 4), torch::rand({1, 3, 4, 5}), f), ConfigError);
  }

  TEST_CASE("hidden spatial width must equal s^2 C") {
    auto cfg = testutil::tiny_model();
    cfg.hidden_spatial = 10;
    CHECK_THROWS_AS(RRNet{cfg}, ConfigError);
  }

  TEST_CASE("analytic gradients of the step match finite differences") {
    torch::manual_seed(3);
    auto cfg = testutil::tiny_model();
    RRNet net(cfg);
    net->to(torch::kFloat64);
    randomize(*net, 0.3);
    auto h = random_hidden(cfg, 4, 4, torch::kFloat64);
    auto prev = torch::rand({1, 3, 4, 4}, torch::kFloat64), cur = torch::rand({1, 3, 4, 4}, torch::kFloat64);
    auto target = torch::rand({1, 3, 8, 8}, torch::kFloat64);
    std::vector<std::pair<std::string, torch::Tensor>> params;
    for (const auto& item : net->named_parameters()) params.emplace_back(item.key(), item.value());
    auto res = oracle::finite_difference_check(
        params, [&] { return (net->step(h, prev, cur).sr - target).abs().mean(); }, 1e-6, 1e-4);
    INFO("worst tensor " << res.worst_name << " rel " << res.worst_tensor_rel);
    CHECK(res.worst_tensor_rel < 1e-4);
    CHECK(res.bad_elements == 0);
  }
}

TEST_SUITE("run_sequence") {
  TEST_CASE("one frame uses itself as the neighbor") {
    torch::manual_seed(4);
    IPRRN model(testutil::tiny_model());
    auto seq = torch::rand({1, 1, 3, 4, 4});
    auto h0 = model->prebuild_hidden(seq);
    auto out = model->run_sequence(seq, h0);
    CHECK(out.sizes().vec() == std::vector<int64_t>{1, 1, 3, 8, 8});
    auto direct = model->rrnet->step(h0, seq.select(1, 0), seq.select(1, 0)).sr;
    CHECK(testutil::bit_equal(out.select(1, 0), direct));
  }

  TEST_CASE("an empty sequence is an input error") {
    IPRRN model(testutil::tiny_model());
    auto h0 = HiddenState::zeros(model->cfg, 1, 4, 4);
    CHECK_THROWS_AS(model->run_sequence(torch::zeros({1, 0, 3, 4, 4}), h0), InputError);
  }

  TEST_CASE("zero parameters give per-frame bicubic") {
    IPRRN model(testutil::tiny_model(3));
    zero_parameters(*model);
    auto seq = torch::rand({2, 5, 3, 4, 6});
    auto out = model->forward(seq);
    for (int64_t t = 0; t < 5; ++t) CHECK(testutil::bit_equal(out.select(1, t), bicubic_resize_to(seq.select(1, t), 8, 12)));
  }

  TEST_CASE("future frames never change past outputs") {
    torch::manual_seed(5);
    IPRRN model(testutil::tiny_model());
    auto seq = torch::rand({1, 6, 3, 4, 4});
    auto base = model->forward(seq);
    for (int64_t t = 1; t < 6; ++t) {
      auto pert = seq.clone();
      pert.select(1, t).add_(torch::randn({1, 3, 4, 4}));
      auto out = model->forward(pert);
      CHECK(testutil::bit_equal(out.slice(1, 0, t), base.slice(1, 0, t)));
      CHECK(!torch::equal(out.select(1, t), base.select(1, t)));
    }
  }

  TEST_CASE("with IPNet frame 2 reaches output 1") {
    torch::manual_seed(6);
    IPRRN model(testutil::tiny_model(3));
    auto seq = torch::rand({1, 5, 3, 4, 4});
    auto pert = seq.clone();
    pert.select(1, 1).add_(0.5);
    auto diff = (model->forward(pert).select(1, 0) - model->forward(seq).select(1, 0)).norm().item<double>();
    CHECK(diff > 0.0);
    // Frame 4 lies beyond the prebuild window and cannot.
    auto far = seq.clone();
    far.select(1, 3).add_(0.5);
    CHECK(testutil::bit_equal(model->forward(far).slice(1, 0, 3), model->forward(seq).slice(1, 0, 3)));
  }

  TEST_CASE("disabled IPNet equals a hard-coded zero initial state") {
    torch::manual_seed(7);
    IPRRN model(testutil::tiny_model(0));
    auto seq = torch::rand({2, 4, 3, 4, 4});
    HiddenState zeros{torch::zeros({2, 8, 4, 4}), torch::zeros({2, 12, 4, 4})};
    CHECK(testutil::bit_equal(model->forward(seq), model->run_sequence(seq, zeros)));
  }

  TEST_CASE("toggling IPNet keeps the RRNet initialization") {
    IPRRN with(testutil::tiny_model(3)), without(testutil::tiny_model(0));
    auto a = with->rrnet->named_parameters(), b = without->rrnet->named_parameters();
    for (const auto& item : a) CHECK(torch::equal(item.value(), b[item.key()]));
  }

  TEST_CASE("the residual backbone runs the same recurrence") {
    auto cfg = testutil::tiny_model(3);
    cfg.backbone = Backbone::kResidual;
    cfg.n_blocks = 2;
    IPRRN model(cfg);
    CHECK(model->rrnet->trunk[0]->as<ResidualBlockImpl>() != nullptr);
    auto out = model->forward(torch::rand({1, 3, 3, 4, 4}));
    CHECK(out.sizes().vec() == std::vector<int64_t>{1, 3, 3, 8, 8});
  }
}

TEST_SUITE("streaming") {
  TEST_CASE("streaming equals the batch unroll and honours the latency bound") {
    torch::manual_seed(8);
    for (int64_t m : {0, 3}) {
      IPRRN model(testutil::tiny_model(m));
      auto seq = torch::rand({1, 6, 3, 4, 4});
      auto batch = model->forward(seq);
      StreamingReconstructor stream(model);
      std::vector<torch::Tensor> got;
      for (int64_t t = 0; t < 6; ++t) {
        for (auto& f : stream.push(seq.select(1, t))) got.push_back(f);
        // Frame k (1-based) is out once max(k, m) inputs were read.
        const int64_t read = t + 1;
        const int64_t expect = read < std::max<int64_t>(m, 1) ? 0 : read;
        CHECK(stream.frames_emitted() == expect);
      }
      REQUIRE(got.size() == 6);
      for (int64_t t = 0; t < 6; ++t) CHECK(testutil::bit_equal(got[static_cast<size_t>(t)], batch.select(1, t)));
    }
  }

  TEST_CASE("finish flushes sequences shorter than m") {
    IPRRN model(testutil::tiny_model(5));
    auto seq = torch::rand({1, 3, 3, 4, 4});
    StreamingReconstructor stream(model);
    for (int64_t t = 0; t < 3; ++t) CHECK(stream.push(seq.select(1, t)).empty());
    auto rest = stream.finish();
    REQUIRE(rest.size() == 3);
    auto batch = model->forward(seq);
    for (int64_t t = 0; t < 3; ++t) CHECK(testutil::bit_equal(rest[static_cast<size_t>(t)], batch.select(1, t)));
  }
}

TEST_SUITE("count_params") {
  TEST_CASE("analytic count equals the module count") {
    for (int64_t m : {0, 3, 7}) {
      auto cfg = testutil::tiny_model(m);
      IPRRN model(cfg);
      CHECK(count_params(cfg) == count_params(*model));
    }
    auto cfg = testutil::tiny_model(3);
    cfg.backbone = Backbone::kResidual;
    cfg.se_enabled = false;
    IPRRN model(cfg);
    CHECK(count_params(cfg) == count_params(*model));
  }

  TEST_CASE("zero-layer config counts only entry and head convs") {
    auto cfg = testutil::tiny_model(0);
    cfg.n_blocks = 0;
    const int64_t in = 6 + 20;
    const int64_t expect = (in * 8 * 9 + 8) + (8 * 8 * 9 + 8) + (8 * 12 * 9 + 12);
    CHECK(count_params(cfg) == expect);
  }

  TEST_CASE("doubling the trunk width about quadruples trunk convs") {
    auto a = testutil::tiny_model(0), b = a;
    a.width = 32;
    a.rdb_growth = 32;
    a.n_blocks = 4;
    b.width = 64;
    b.rdb_growth = 64;
    b.n_blocks = 4;
    auto trunk_only = [](ModelConfig c) {
      auto none = c;
      none.n_blocks = 0;
      return static_cast<double>(count_params(c) - count_params(none));
    };
    const double ratio = trunk_only(b) / trunk_only(a);
    CHECK(ratio > 3.9);
    CHECK(ratio < 4.0);
  }
}

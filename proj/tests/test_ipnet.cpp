#include <doctest.h>

#include "iprrn/blocks.hpp"
#include "iprrn/errors.hpp"
#include "iprrn/ipnet.hpp"
#include "iprrn/model.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace iprrn;

namespace {

void randomize(torch::nn::Module& m, double scale = 0.2) {
  torch::NoGradGuard g;
  for (auto& p : m.parameters()) p.copy_(torch::randn_like(p) * scale);
}

void zero_biases(torch::nn::Module& m) {
  torch::NoGradGuard g;
  for (auto& item : m.named_parameters()) {
    if (item.key().ends_with("bias")) item.value().zero_();
  }
}

ModelConfig small_ipnet(int64_t m) {
  auto cfg = testutil::tiny_model(m);
  cfg.ipnet_res_blocks = 2;
  return cfg;
}

}  // namespace

TEST_CASE("shallow extraction uses one filter bank per frame") {
  ModelConfig cfg;  // m = 7, C = 3, 16 maps per frame
  IPNet net(cfg);
  CHECK(cfg.shallow_width() == 112);
  CHECK(net->shallow->options.groups() == 7);
  CHECK(net->shallow->weight.sizes().vec() == std::vector<int64_t>{112, 3, 3, 3});
  auto f = net->shallow_extract(torch::rand({1, 7, 3, 6, 6}));
  CHECK(f.sizes().vec() == std::vector<int64_t>{1, 112, 6, 6});
}

TEST_CASE("grouped conv keeps frames apart") {
  torch::manual_seed(1);
  IPNet net(small_ipnet(3));
  randomize(*net);
  auto frames = torch::rand({1, 3, 3, 5, 5});
  auto base = net->shallow_extract(frames);
  auto bumped = frames.clone();
  bumped.index_put_({0, 1}, bumped.index({0, 1}) + 1.0);
  auto diff = (net->shallow_extract(bumped) - base).abs().sum({0, 2, 3});
  const int64_t per = 4;
  CHECK(diff.slice(0, 0, per).max().item<double>() == 0.0);
  CHECK(diff.slice(0, per, 2 * per).min().item<double>() > 0.0);
  CHECK(diff.slice(0, 2 * per, 3 * per).max().item<double>() == 0.0);
}

TEST_CASE("zero frames with zero biases give zero shallow features") {
  torch::manual_seed(2);
  IPNet net(small_ipnet(3));
  randomize(*net);
  zero_biases(*net);
  CHECK(net->shallow_extract(torch::zeros({1, 3, 3, 4, 4})).abs().max().item<double>() == 0.0);
}

TEST_CASE("m = 1 is an ordinary 3x3 convolution") {
  torch::manual_seed(3);
  IPNet net(small_ipnet(1));
  net->to(torch::kFloat64);
  randomize(*net);
  auto frame = torch::rand({1, 1, 3, 5, 5}, torch::kFloat64);
  auto expect = oracle::conv2d(oracle::from_tensor(frame[0]), oracle::from_conv(net->shallow));
  CHECK(net->shallow->options.groups() == 1);
  CHECK(oracle::max_abs_diff(expect, net->shallow_extract(frame)) < 1e-12);
}

TEST_CASE("shallow extraction matches the grouped conv oracle") {
  torch::manual_seed(4);
  IPNet net(small_ipnet(3));
  net->to(torch::kFloat64);
  randomize(*net);
  auto frames = torch::rand({1, 3, 3, 4, 4}, torch::kFloat64);
  auto stacked = oracle::from_tensor(frames.reshape({1, 9, 4, 4}));
  CHECK(oracle::max_abs_diff(oracle::conv2d(stacked, oracle::from_conv(net->shallow)), net->shallow_extract(frames)) <
        1e-12);
}

TEST_CASE("wrong frame count is an input error") {
  IPNet net(small_ipnet(3));
  CHECK_THROWS_AS(net->shallow_extract(torch::zeros({1, 2, 3, 4, 4})), InputError);
  CHECK_THROWS_AS(net->shallow_extract(torch::zeros({3, 3, 4, 4})), InputError);
}

TEST_CASE("filter_features without SE and an identity 1x1 selects channels") {
  auto cfg = small_ipnet(3);
  cfg.se_enabled = false;
  IPNet net(cfg);
  CHECK(net->se.is_empty());
  {
    torch::NoGradGuard g;
    net->reduce->weight.zero_();
    net->reduce->bias.zero_();
    for (int64_t i = 0; i < cfg.ipnet_width; ++i) net->reduce->weight[i][i][0][0] = 1.0;
  }
  auto f = torch::randn({1, cfg.shallow_width(), 4, 4});
  auto out = net->filter_features(f);
  CHECK(out.size(1) == cfg.ipnet_width);
  CHECK(testutil::bit_equal(out, f.slice(1, 0, cfg.ipnet_width)));
}

TEST_CASE("zero SE weights feed half the features to the 1x1 conv") {
  torch::manual_seed(5);
  IPNet net(small_ipnet(3));
  randomize(*net);
  zero_parameters(*net->se);
  auto f = torch::randn({1, 12, 4, 4});
  CHECK(torch::allclose(net->filter_features(f), net->reduce(0.5 * f), 1e-6, 1e-6));
}

TEST_CASE("filter_features matches the composed oracle") {
  torch::manual_seed(6);
  IPNet net(small_ipnet(3));
  net->to(torch::kFloat64);
  randomize(*net, 0.5);
  auto f = torch::randn({1, 12, 4, 4}, torch::kFloat64);
  const int64_t hidden = se_hidden_channels(12, 4);
  auto gated = oracle::se_block(oracle::from_tensor(f), oracle::linear_weights(net->se->reduce),
                                oracle::linear_weights(net->se->expand), hidden);
  CHECK(oracle::max_abs_diff(oracle::conv2d(gated, oracle::from_conv(net->reduce)), net->filter_features(f)) < 1e-12);
}

TEST_CASE("deep extraction") {
  SUBCASE("no blocks is identity") {
    auto cfg = small_ipnet(3);
    cfg.ipnet_res_blocks = 0;
    IPNet net(cfg);
    auto x = torch::randn({1, 8, 4, 4});
    CHECK(testutil::bit_equal(net->deep_extract(x), x));
  }
  SUBCASE("zero-weight blocks are identity") {
    IPNet net(small_ipnet(3));
    for (auto& b : *net->deep) zero_parameters(*b.ptr());
    auto x = torch::randn({1, 8, 4, 4});
    CHECK(testutil::bit_equal(net->deep_extract(x), x));
  }
  SUBCASE("two blocks match two chained oracles") {
    torch::manual_seed(7);
    IPNet net(small_ipnet(3));
    net->to(torch::kFloat64);
    randomize(*net);
    auto x = torch::randn({1, 8, 4, 4}, torch::kFloat64);
    auto y = oracle::from_tensor(x);
    for (auto& b : *net->deep) {
      auto* rb = b.ptr()->as<ResidualBlockImpl>();
      REQUIRE(rb != nullptr);
      y = oracle::residual_block(y, oracle::from_conv(rb->conv1), oracle::from_conv(rb->conv2));
    }
    CHECK(oracle::max_abs_diff(y, net->deep_extract(x)) < 1e-12);
  }
}

TEST_CASE("prebuilt hidden state shape at the default widths") {
  ModelConfig cfg;
  IPNet net(cfg);
  auto h = net(torch::rand({1, 7, 3, 6, 5}));
  CHECK(h.temporal.sizes().vec() == std::vector<int64_t>{1, 128, 6, 5});
  CHECK(h.spatial.sizes().vec() == std::vector<int64_t>{1, 48, 6, 5});
  CHECK(h.concat().size(1) == 176);
}

TEST_CASE("zero frames and zero biases give a zero hidden state") {
  torch::manual_seed(8);
  IPNet net(small_ipnet(3));
  randomize(*net);
  zero_biases(*net);
  auto h = net(torch::zeros({1, 3, 3, 4, 4}));
  CHECK(h.temporal.abs().max().item<double>() == 0.0);
  CHECK(h.spatial.abs().max().item<double>() == 0.0);
}

TEST_CASE("prebuild is deterministic") {
  IPRRN model(small_ipnet(3));
  auto seq = torch::rand({2, 5, 3, 4, 4});
  auto a = model->prebuild_hidden(seq), b = model->prebuild_hidden(seq);
  CHECK(testutil::bit_equal(a.concat(), b.concat()));
}

TEST_CASE("disabled IPNet prebuilds zeros") {
  IPRRN model(testutil::tiny_model(0));
  CHECK(model->ipnet.is_empty());
  auto h = model->prebuild_hidden(torch::rand({2, 4, 3, 5, 6}));
  CHECK(h.temporal.sizes().vec() == std::vector<int64_t>{2, 8, 5, 6});
  CHECK(h.spatial.sizes().vec() == std::vector<int64_t>{2, 12, 5, 6});
  CHECK(h.concat().abs().max().item<double>() == 0.0);
}

TEST_CASE("short sequences are left-padded with frame 1") {
  auto seq = torch::rand({1, 2, 3, 4, 4});
  auto lead = leading_frames(seq, 4);
  CHECK(lead.size(1) == 4);
  CHECK(testutil::bit_equal(lead[0][0], seq[0][0]));
  CHECK(testutil::bit_equal(lead[0][1], seq[0][0]));
  CHECK(testutil::bit_equal(lead[0][2], seq[0][0]));
  CHECK(testutil::bit_equal(lead[0][3], seq[0][1]));
}

TEST_CASE("IPNet and RRNet heads do not share weights") {
  IPRRN model(small_ipnet(3));
  CHECK(model->ipnet->head->spatial->weight.data_ptr() != model->rrnet->head->spatial->weight.data_ptr());
}

TEST_CASE("the frame-1 loss reaches every IPNet parameter") {
  torch::manual_seed(9);
  IPRRN model(small_ipnet(3));
  auto seq = torch::rand({2, 4, 3, 6, 6});
  auto sr = model->forward(seq);
  auto target = torch::rand_like(sr.select(1, 0));
  (sr.select(1, 0) - target).abs().mean().backward();
  for (const auto& item : model->ipnet->named_parameters()) {
    INFO(item.key());
    REQUIRE(item.value().grad().defined());
    CHECK(item.value().grad().norm().item<double>() > 0.0);
  }
}

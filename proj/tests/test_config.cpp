#include <doctest.h>

#include "iprrn/config.hpp"
#include "iprrn/errors.hpp"
#include "iprrn/manifest.hpp"
#include "testutil.hpp"

using namespace iprrn;

TEST_SUITE("kv document") {
  TEST_CASE("sections, comments and order") {
    auto doc = KvDocument::parse("top = 1\n# note\n[model]\nscale = 2 ; trailing\n\n[train]\nlr=0.5\n", "cfg.ini");
    CHECK(doc.sections() == std::vector<std::string>{"", "model", "train"});
    REQUIRE(doc.find("model", "scale") != nullptr);
    CHECK(doc.find("model", "scale")->value == "2");
    CHECK(doc.find("model", "scale")->line == 4);
    CHECK(doc.find("train", "lr")->value == "0.5");
    CHECK(doc.where(*doc.find("train", "lr")) == "cfg.ini:7");
    CHECK(doc.find("train", "missing") == nullptr);
  }

  TEST_CASE("render parses back to the same document") {
    auto doc = KvDocument::parse("[a]\nx = 1\ny = two words\n[b]\nz = 3\n");
    auto again = KvDocument::parse(doc.render());
    CHECK(again.render() == doc.render());
    CHECK(again.find("a", "y")->value == "two words");
  }

  TEST_CASE("malformed lines and duplicates name the line") {
    CHECK_THROWS_WITH_AS(KvDocument::parse("[a]\nx = 1\nx = 2\n", "f.ini"), doctest::Contains("f.ini:3"), ConfigError);
    CHECK_THROWS_WITH_AS(KvDocument::parse("[a]\nnot a pair\n", "f.ini"), doctest::Contains("f.ini:2"), ConfigError);
    CHECK_THROWS_WITH_AS(KvDocument::parse("[a\n", "f.ini"), doctest::Contains("f.ini:1"), ConfigError);
  }

  TEST_CASE("missing file is a configuration error naming the path") {
    CHECK_THROWS_WITH_AS(KvDocument::load("/nonexistent/cfg.ini"), doctest::Contains("/nonexistent/cfg.ini"),
                         ConfigError);
  }
}

TEST_SUITE("typed configs") {
  TEST_CASE("defaults") {
    ModelConfig m;
    CHECK(m.scale == 4);
    CHECK(m.ipnet_frames == 7);
    CHECK(m.hidden_temporal == 128);
    CHECK(m.hidden_spatial == 48);
    CHECK(m.n_blocks == 10);
    CHECK(m.se_reduction == 16);
    CHECK_NOTHROW(m.validate());
    TrainConfig t;
    CHECK(t.batch_size == 8);
    CHECK(t.lr == 1e-4);
    CHECK(t.beta1 == 0.9);
    CHECK(t.beta2 == 0.999);
    CHECK(t.decay_factor == 0.1);
    CHECK(t.decay_every == 60);
    DegradationSpec d;
    CHECK(d.blur_sigma == 1.6);
    CHECK(d.kernel_size == 13);
    CHECK(d.scale == 4);
  }

  TEST_CASE("values are read and unknown keys rejected with file:line") {
    auto doc = KvDocument::parse("[model]\nscale = 2\nhidden_spatial = 12\nbackbone = resblock\nse_enabled = false\n"
                                 "[train]\nmax_epochs = 3\nlr = 2e-4\n[degradation]\nmode = bicubic\nscale = 2\n",
                                 "run.ini");
    auto m = model_config_from(doc);
    CHECK(m.scale == 2);
    CHECK(m.backbone == Backbone::kResidual);
    CHECK(!m.se_enabled);
    auto t = train_config_from(doc);
    CHECK(t.max_epochs == 3);
    CHECK(t.lr == 2e-4);
    CHECK(degradation_from(doc).mode == DegradationMode::kBicubic);

    auto bad = KvDocument::parse("[model]\nscale = 4\nwidht = 64\n", "bad.ini");
    CHECK_THROWS_WITH_AS(model_config_from(bad), doctest::Contains("bad.ini:3"), ConfigError);
    CHECK_THROWS_WITH_AS(model_config_from(bad), doctest::Contains("widht"), ConfigError);
    auto junk = KvDocument::parse("[train]\nlr = fast\n", "junk.ini");
    CHECK_THROWS_WITH_AS(train_config_from(junk), doctest::Contains("junk.ini:2"), ConfigError);
    auto flag = KvDocument::parse("[model]\nse_enabled = maybe\n");
    CHECK_THROWS_AS(model_config_from(flag), ConfigError);
  }

  TEST_CASE("write_section materializes every field and round trips") {
    ModelConfig m = testutil::tiny_model(3);
    m.init_seed = 99;
    TrainConfig t;
    t.max_epochs = 7;
    t.lr = 3.5e-4;
    t.grad_clip = 0.25;
    DegradationSpec d;
    d.blur_sigma = 1.2;
    d.kernel_size = 9;
    KvDocument doc;
    write_section(doc, "model", m);
    write_section(doc, "train", t);
    write_section(doc, "degradation", d);
    auto back = KvDocument::parse(doc.render());
    CHECK(model_config_from(back) == m);
    CHECK(train_config_from(back) == t);
    CHECK(degradation_from(back) == d);
    CHECK(doc.keys("model").size() == 15);
    CHECK(render(d).rfind("[degradation]\n", 0) == 0);
  }

  TEST_CASE("validation") {
    ModelConfig m;
    m.hidden_spatial = 40;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("hidden_spatial"), ConfigError);
    m = ModelConfig{};
    m.scale = 0;
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = ModelConfig{};
    m.se_reduction = 5;
    m.shallow_per_frame = 16;  // 112 channels, 5 does not divide
    CHECK_THROWS_AS(m.validate(), ConfigError);
    TrainConfig t;
    CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("max_epochs"), ConfigError);
    t.max_epochs = 1;
    CHECK_NOTHROW(t.validate());
    t.decay_every = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
  }

  TEST_CASE("set_field") {
    ModelConfig m;
    set_field(m, "ipnet_frames", "0");
    CHECK(!m.ipnet_enabled());
    CHECK_THROWS_AS(set_field(m, "nope", "1"), ConfigError);
  }
}

TEST_SUITE("run manifest") {
  TEST_CASE("git blob hash") {
    testutil::TempDir dir;
    testutil::write_text(dir / "hello.txt", "hello\n");
    CHECK(git_blob_hash(dir / "hello.txt") == "ce013625030ba8dba906f756967f9e9ca394464a");
    testutil::write_text(dir / "empty", "");
    CHECK(git_blob_hash(dir / "empty") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  }

  TEST_CASE("content hash follows content and ignores manifests") {
    testutil::TempDir dir;
    testutil::write_text(dir / "d" / "a.txt", "a");
    testutil::write_text(dir / "d" / "b.txt", "b");
    const auto h1 = content_hash({dir / "d"});
    CHECK(h1.size() == 40);
    testutil::write_text(dir / "d" / kRunManifest, "[run]\n");
    CHECK(content_hash({dir / "d"}) == h1);
    testutil::write_text(dir / "d" / "b.txt", "B");
    CHECK(content_hash({dir / "d"}) != h1);
  }

  TEST_CASE("render carries the run fields and the resolved config") {
    RunManifest m;
    m.command = "train";
    m.seed = 5;
    m.input_hash = "abc";
    m.started_at = utc_timestamp();
    write_section(m.config, "model", ModelConfig{});
    auto doc = KvDocument::parse(m.render());
    CHECK(doc.find("run", "command")->value == "train");
    CHECK(doc.find("run", "seed")->value == "5");
    CHECK(model_config_from(doc) == ModelConfig{});
    CHECK(m.started_at.size() == 20);
    CHECK(m.started_at.back() == 'Z');
  }
}

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

using namespace littleyolo;

namespace {

std::string shape_error(const std::string& cfg) {
  try {
    build_graph(parse_network(cfg));
  } catch (const ShapeError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected ShapeError";
  return "";
}

}  // namespace

TEST(BuildGraph, ReferenceShapesFrozen) {
  const Shape want[34] = {
      {16, 416, 416}, {32, 208, 208}, {64, 208, 208}, {64, 208, 208}, {32, 104, 104},
      {64, 104, 104}, {128, 104, 104}, {128, 104, 104}, {256, 52, 52}, {128, 52, 52},
      {128, 52, 52}, {256, 26, 26},   {512, 26, 26},  {256, 26, 26},  {256, 26, 26},
      {512, 13, 13},  {1024, 13, 13}, {1024, 13, 13}, {1024, 13, 13}, {1024, 13, 13},
      {1024, 13, 13}, {1024, 13, 13}, {4096, 13, 13}, {256, 13, 13},  {512, 13, 13},
      {21, 13, 13},   {21, 13, 13},   {256, 13, 13},  {128, 13, 13},  {128, 26, 26},
      {384, 26, 26},  {256, 26, 26},  {21, 26, 26},   {21, 26, 26}};
  const auto g = fixture::reference_graph();
  ASSERT_EQ(g.size(), 34u);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.layers[i].output, want[i]) << "layer " << i;
  EXPECT_EQ(g.yolo_layers(), (std::vector<int>{26, 33}));
  EXPECT_EQ(g.layers[26].input_shape, (Shape{21, 13, 13}));
  EXPECT_EQ(g.layers[33].input_shape, (Shape{21, 26, 26}));
  EXPECT_EQ(g.layers[22].inputs, (std::vector<int>{21, 19, 17, 16}));
}

TEST(BuildGraph, ReferenceStructure) {
  const auto g = fixture::reference_graph();
  int feature_convs = 0, shortcuts = 0;
  for (int i = 0; i <= 16; ++i) {
    feature_convs += g.layers[i].is_conv();
    shortcuts += std::holds_alternative<ShortcutSpec>(g.layers[i].spec);
  }
  EXPECT_EQ(feature_convs, 13);
  EXPECT_EQ(shortcuts, 4);
  for (int i : g.conv_layers()) {
    const bool head = i == 25 || i == 32;
    EXPECT_EQ(g.layers[i].conv->batch_norm.has_value(), !head) << i;
    EXPECT_EQ(g.layers[i].activation, head ? Activation::linear : Activation::leaky) << i;
  }
  for (int i : {17, 19, 21}) {
    const auto& m = std::get<MaxpoolSpec>(g.layers[i].spec);
    EXPECT_EQ(m.stride, 1);
    EXPECT_EQ(m.padding, m.size / 2);
  }
}

TEST(BuildGraph, HeadChannelsFollowClassCount) {
  for (auto [name, ch] : {std::pair{"littleyolo-spp-416.cfg", 21}, {"littleyolo-spp-416-3class.cfg", 24}}) {
    const auto g = fixture::reference_graph(name);
    EXPECT_EQ(g.layers[25].conv->filters, ch);
    EXPECT_EQ(g.layers[32].conv->filters, ch);
  }
}

TEST(BuildGraph, LargeInputVariant) {
  const auto g = fixture::reference_graph("littleyolo-spp-640.cfg");
  EXPECT_EQ(g.layers[26].output, (Shape{21, 20, 20}));
  EXPECT_EQ(g.layers[33].output, (Shape{21, 40, 40}));
}

TEST(BuildGraph, ShortcutSpatialMismatchFails) {
  const std::string msg = shape_error(
      "[net]\nwidth=16\nheight=16\nchannels=3\n[convolutional]\nfilters=4\nsize=3\npad=1\n"
      "[convolutional]\nfilters=4\nsize=3\nstride=2\npad=1\n[shortcut]\nfrom=-2\n");
  EXPECT_NE(msg.find("layer 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("4x8x8"), std::string::npos) << msg;
  EXPECT_NE(msg.find("4x16x16"), std::string::npos) << msg;
}

TEST(BuildGraph, RouteSpatialMismatchFails) {
  const std::string msg = shape_error(
      "[net]\nwidth=16\nheight=16\nchannels=3\n[convolutional]\nfilters=4\n"
      "[maxpool]\nsize=2\nstride=2\n[route]\nlayers=-1,-2\n");
  EXPECT_NE(msg.find("layer 2"), std::string::npos) << msg;
}

TEST(BuildGraph, YoloChannelMismatchFails) {
  const std::string msg = shape_error(
      "[net]\nwidth=16\nheight=16\nchannels=3\n[convolutional]\nfilters=20\n"
      "[yolo]\nmask=0,1,2\nanchors=1,1,2,2,3,3\nclasses=2\n");
  EXPECT_NE(msg.find("21"), std::string::npos) << msg;
  EXPECT_NE(msg.find("20"), std::string::npos) << msg;
}

TEST(BuildGraph, KernelLargerThanInputFails) {
  EXPECT_FALSE(shape_error("[net]\nwidth=2\nheight=2\nchannels=1\n[convolutional]\nsize=5\n").empty());
  EXPECT_FALSE(shape_error("[net]\nwidth=2\nheight=2\nchannels=1\n[maxpool]\nsize=5\npadding=0\n").empty());
}

TEST(Diagnostics, ParamCounts) {
  EXPECT_EQ(param_count(build_graph(parse_network("[net]\nwidth=8\nheight=8\n"))), 0u);
  EXPECT_EQ(model_bytes(build_graph(parse_network("[net]\nwidth=8\nheight=8\n"))), 20u);
  const auto one = build_graph(parse_network(
      "[net]\nwidth=4\nheight=4\nchannels=1\n[convolutional]\nfilters=1\nsize=1\nbatch_normalize=1\n"));
  EXPECT_EQ(param_count(one), 5u);
}

TEST(Diagnostics, ReferenceTotals) {
  const auto g = fixture::reference_graph();
  EXPECT_EQ(param_count(g), 12455962u);
  EXPECT_EQ(model_bytes(g), 49823868u);
  EXPECT_NEAR(model_bytes(g) / 1e6, 49.77, 49.77 * 0.02);
  EXPECT_NEAR(flops(g), 16.128, 16.128 * 0.10);
  EXPECT_NEAR(flops(g), 15.2786, 5e-4);
}

TEST(Diagnostics, SingleConvFlops) {
  const auto g = build_graph(parse_network(
      "[net]\nwidth=416\nheight=416\nchannels=3\n[convolutional]\nfilters=16\nsize=3\nstride=1\npad=1\n"));
  EXPECT_DOUBLE_EQ(flops(g), 2.0 * 9 * 3 * 16 * 416 * 416 / 1e9);
  EXPECT_NEAR(flops(g), 0.1495, 5e-5);
}

TEST(Diagnostics, FlopsScaleWithInputArea) {
  auto spec = parse_network(fixture::reference_cfg_text());
  const double base = flops(build_graph(spec.layers, {3, 416, 416}));
  EXPECT_NEAR(flops(build_graph(spec.layers, {3, 832, 832})), 4.0 * base, 1e-9 * base);
}

TEST(Forward, ReferenceHeadShapes) {
  for (auto [name, ch] : {std::pair{"littleyolo-spp-416.cfg", 21}, {"littleyolo-spp-416-3class.cfg", 24}}) {
    const auto g = init_random(fixture::reference_graph(name), 5);
    const auto heads = forward(g, fixture::noise_image(416, 416, 1));
    ASSERT_EQ(heads.size(), 2u);
    EXPECT_EQ(heads.at(26).shape(), (Shape{ch, 13, 13}));
    EXPECT_EQ(heads.at(33).shape(), (Shape{ch, 26, 26}));
    EXPECT_TRUE(heads.at(26).all_finite());
    EXPECT_TRUE(heads.at(33).all_finite());
  }
}

TEST(Forward, ZeroWeightsGiveZeroOutputs) {
  auto g = fixture::reference_graph();
  for (auto& l : g.layers)
    if (l.conv && l.conv->batch_norm) std::fill(l.conv->batch_norm->scale.begin(), l.conv->batch_norm->scale.end(), 0.0f);
  const auto heads = forward(g, fixture::noise_image(416, 416, 2));
  for (const auto& [index, t] : heads)
    for (float v : t.data()) ASSERT_EQ(v, 0.0f) << "head " << index;
}

TEST(Forward, ComposesKernelsInOrder) {
  const std::string cfg =
      "[net]\nwidth=12\nheight=12\nchannels=2\n"
      "[convolutional]\nbatch_normalize=1\nfilters=6\nsize=3\npad=1\nactivation=leaky\n"  // 0
      "[maxpool]\nsize=2\nstride=2\n"                                                       // 1
      "[convolutional]\nfilters=4\nsize=3\npad=1\nactivation=mish\n"                       // 2
      "[shortcut]\nfrom=-2\nactivation=leaky\n"                                             // 3
      "[upsample]\nstride=2\n"                                                              // 4
      "[route]\nlayers=-1,0\n"                                                              // 5
      "[convolutional]\nfilters=7\nsize=1\nactivation=linear\n"                             // 6
      "[yolo]\nmask=0\nanchors=3,4\nclasses=2\n";                                           // 7
  auto g = build_graph(parse_network(cfg));
  oracle::Random rng(8);
  for (auto& l : g.layers) {
    if (!l.conv) continue;
    for (float& v : l.conv->weights) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    for (float& v : l.conv->bias) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    if (l.conv->batch_norm)
      for (float& v : l.conv->batch_norm->rolling_var) v = static_cast<float>(rng.uniform(0.5, 2));
  }
  Tensor x = rng.tensor(2, 12, 12);
  Tensor l0 = activate(conv2d(x, *g.layers[0].conv), Activation::leaky);
  Tensor l1 = maxpool(l0, 2, 2, 0);
  Tensor l2 = activate(conv2d(l1, *g.layers[2].conv), Activation::mish);
  Tensor l3 = activate(shortcut_add(l2, l1), Activation::leaky);
  Tensor l4 = upsample_nearest(l3, 2);
  Tensor l5 = concat_channels(std::vector<const Tensor*>{&l4, &l0});
  Tensor l6 = conv2d(l5, *g.layers[6].conv);
  const auto heads = forward(g, x);
  ASSERT_EQ(heads.size(), 1u);
  EXPECT_EQ(heads.at(7), l6);
}

TEST(Forward, DeterministicAcrossRunsAndThreads) {
  const auto g = init_random(fixture::reference_graph(), 9);
  const Tensor img = fixture::noise_image(416, 416, 3);
  const auto a = forward(g, img, 1);
  EXPECT_EQ(forward(g, img, 1), a);
  EXPECT_EQ(forward(g, img, 4), a);
}

TEST(Forward, RejectsWrongInputShape) {
  const auto g = fixture::planted_graph();
  EXPECT_THROW(forward(g, Tensor(3, 32, 32)), ShapeError);
}

// Builds the shipped reference network and runs one forward pass with
// seeded random weights, printing the head shapes and the totals.
#include <chrono>
#include <cstdio>

#include "littleyolo/littleyolo.hpp"

int main(int argc, char** argv) {
  namespace ly = littleyolo;
  const char* cfg = argc > 1 ? argv[1] : LITTLEYOLO_CFG_DIR "/littleyolo-spp-416.cfg";
  auto graph = ly::init_random(ly::build_graph(ly::parse_network(ly::read_text_file(cfg))), 42);
  std::printf("%zu layers, %llu params, %.2f MB, %.3f BFLOPs\n", graph.size(),
              static_cast<unsigned long long>(ly::param_count(graph)), ly::model_bytes(graph) / 1e6,
              ly::flops(graph));
  ly::Tensor input(graph.input, 0.5f);
  const auto t0 = std::chrono::steady_clock::now();
  auto heads = ly::forward(graph, input, ly::default_threads());
  const auto t1 = std::chrono::steady_clock::now();
  for (const auto& [index, raw] : heads)
    std::printf("yolo layer %d: %s\n", index, ly::to_string(raw.shape()).c_str());
  std::printf("forward: %.1f ms\n", std::chrono::duration<double, std::milli>(t1 - t0).count());
}

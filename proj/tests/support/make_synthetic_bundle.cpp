// Writes a synthetic labelled citation-style bundle for manual runs.
#include <cstdlib>
#include <iostream>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_synthetic_bundle DIR [nodes] [features] [seed] [classes] [mean_degree] [word_rate] "
                 "[topic_rate]\n";
    return 1;
  }
  selfgnn::testing::CitationSpec spec;
  if (argc > 2) spec.nodes = std::atoi(argv[2]);
  if (argc > 3) spec.features = std::atoi(argv[3]);
  if (argc > 4) spec.seed = std::strtoull(argv[4], nullptr, 10);
  if (argc > 5) spec.classes = std::atoi(argv[5]);
  if (argc > 6) spec.mean_degree = std::atof(argv[6]);
  if (argc > 7) spec.word_rate = std::atof(argv[7]);
  if (argc > 8) spec.topic_rate = std::atof(argv[8]);
  selfgnn::save_graph_bundle(selfgnn::testing::citation_graph(spec), argv[1]);
  return 0;
}
